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

#include <cstdio>
#include <fstream>
#include <string>

#include "capsyolo/capsyolo.h"

namespace capsyolo::cli {

// Owns a string handed out by the C API.
struct Owned {
    char* p = nullptr;
    ~Owned() { cy_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

// Prints the last error and maps the status to the process exit code.
inline int fail(cy_status st, const char* what)
{
    std::fprintf(stderr, "%s: %s: %s\n", what, cy_status_name(st), cy_last_error());
    return static_cast<int>(st);
}

inline bool write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) std::fprintf(stderr, "cannot write %s\n", path.c_str());
    return static_cast<bool>(out);
}

}  // namespace capsyolo::cli
