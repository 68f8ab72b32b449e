// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "capsyolo/capsyolo.h"

namespace capsyolo::server {

// JSON-over-HTTP front end for a diagnoser handle (not owned):
//   GET  /health
//   POST /diagnose   multipart/form-data, field "image"
class DiagnosisServer {
public:
    DiagnosisServer(const cy_diagnoser* diagnoser, std::size_t max_upload_bytes);
    ~DiagnosisServer();
    DiagnosisServer(const DiagnosisServer&) = delete;
    DiagnosisServer& operator=(const DiagnosisServer&) = delete;

    // Port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    bool serve();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace capsyolo::server
