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

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "model/model.hpp"
#include "yolo/yolo_head.hpp"

namespace capsyolo::service {

// JSON: {"default": text, "uncertain": text, "classes": {label: text, ...}}
class RecommendationTable {
public:
    static RecommendationTable parse(const std::string& json_text, const std::string& origin = "<string>");
    static RecommendationTable load(const std::string& path);

    // Throws ConfigError naming every label without an entry.
    void validate_against(const std::vector<std::string>& labels) const;

    struct Advice {
        std::string text;
        bool uncertain = false;
    };
    // Below `threshold` the uncertainty guidance replaces the treatment text.
    // Unknown classes get the default text, or ContractError when strict.
    Advice recommend(const std::string& disease_class, double confidence, double threshold, bool strict = false) const;

    const std::map<std::string, std::string>& entries() const { return by_class_; }

private:
    std::string default_text_;
    std::string uncertain_text_;
    std::map<std::string, std::string> by_class_;
};

struct ServiceConfig {
    std::string listen_host = "0.0.0.0";
    int listen_port = 8080;
    std::string model_path = "model.bin";
    std::string recommendations_path = "recommendations.json";
    double confidence_threshold = 0.5;  // below: uncertain
    double detection_threshold = 0.25;  // minimum detection score
    double nms_iou = 0.5;
    std::size_t max_upload_bytes = 8u << 20;
    bool strict_classes = false;

    void validate() const;
    // `service.*` keys, then CAPSYOLO_* environment variables on top.
    void apply(const KvConfig& cfg);
    void apply_env();
};

struct DiagnosisReport {
    std::string disease_class;
    double confidence = 0.0;
    std::vector<yolo::Detection> detections;
    std::string recommendation;
    std::string model_version;
    bool uncertain = false;

    std::string to_json(const std::vector<std::string>& class_names) const;
};

// Read-only inference over a resident model; safe to share across threads.
class Diagnoser {
public:
    Diagnoser(model::CapsYoloModel model, RecommendationTable table, ServiceConfig config);

    // Throws BadInputError("upload_too_large" | "undecodable_image").
    DiagnosisReport diagnose(std::span<const std::uint8_t> image_bytes) const;

    std::string health_json() const;
    const model::CapsYoloModel& model() const { return model_; }
    const ServiceConfig& config() const { return config_; }
    const std::string& model_version() const { return version_; }

private:
    model::CapsYoloModel model_;
    RecommendationTable table_;
    ServiceConfig config_;
    std::string version_;
};

}  // namespace capsyolo::service
