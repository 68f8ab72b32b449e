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

#include "service/diagnoser.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"
#include "data/image_io.hpp"

namespace capsyolo::service {

using nlohmann::json;

RecommendationTable RecommendationTable::parse(const std::string& json_text, const std::string& origin)
{
    RecommendationTable t;
    try {
        auto j = json::parse(json_text);
        t.default_text_ = j.at("default").get<std::string>();
        t.uncertain_text_ = j.at("uncertain").get<std::string>();
        t.by_class_ = j.at("classes").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": malformed recommendation table: " + e.what());
    }
    if (t.default_text_.empty() || t.uncertain_text_.empty()) {
        throw ConfigError(origin + ": default and uncertain texts must be non-empty");
    }
    for (const auto& [cls, text] : t.by_class_)
        if (text.empty()) throw ConfigError(origin + ": empty recommendation for '" + cls + "'");
    return t;
}

RecommendationTable RecommendationTable::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open recommendation table " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

void RecommendationTable::validate_against(const std::vector<std::string>& labels) const
{
    std::string missing;
    for (const auto& l : labels)
        if (!by_class_.count(l)) missing += (missing.empty() ? "" : ", ") + l;
    if (!missing.empty()) throw ConfigError("recommendation table has no entry for: " + missing);
}

RecommendationTable::Advice RecommendationTable::recommend(const std::string& disease_class, double confidence,
                                                           double threshold, bool strict) const
{
    auto it = by_class_.find(disease_class);
    if (it == by_class_.end() && strict) throw ContractError("no recommendation for class '" + disease_class + "'");
    if (confidence < threshold) return {uncertain_text_, true};
    return {it == by_class_.end() ? default_text_ : it->second, false};
}

void ServiceConfig::validate() const
{
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
    };
    unit(confidence_threshold, "service.confidence_threshold");
    unit(detection_threshold, "service.detection_threshold");
    unit(nms_iou, "service.nms_iou");
    if (listen_port < 0 || listen_port > 65535) throw ConfigError("service.port must be in 0..65535 (0 picks a free port)");
    if (max_upload_bytes == 0) throw ConfigError("service.max_upload_bytes must be positive");
}

void ServiceConfig::apply(const KvConfig& cfg)
{
    listen_host = cfg.get_string("service.host", listen_host);
    listen_port = static_cast<int>(cfg.get_int("service.port", listen_port));
    model_path = cfg.get_string("service.model", model_path);
    recommendations_path = cfg.get_string("service.recommendations", recommendations_path);
    confidence_threshold = cfg.get_double("service.confidence_threshold", confidence_threshold);
    detection_threshold = cfg.get_double("service.detection_threshold", detection_threshold);
    nms_iou = cfg.get_double("service.nms_iou", nms_iou);
    const auto max_upload = cfg.get_int("service.max_upload_bytes", static_cast<std::int64_t>(max_upload_bytes));
    if (max_upload <= 0) throw ConfigError("service.max_upload_bytes must be positive");
    max_upload_bytes = static_cast<std::size_t>(max_upload);
    strict_classes = cfg.get_bool("service.strict_classes", strict_classes);
    validate();
}

void ServiceConfig::apply_env()
{
    KvConfig env;
    const std::pair<const char*, const char*> vars[] = {
        {"CAPSYOLO_HOST", "service.host"},
        {"CAPSYOLO_PORT", "service.port"},
        {"CAPSYOLO_MODEL", "service.model"},
        {"CAPSYOLO_RECOMMENDATIONS", "service.recommendations"},
        {"CAPSYOLO_CONFIDENCE_THRESHOLD", "service.confidence_threshold"},
        {"CAPSYOLO_DETECTION_THRESHOLD", "service.detection_threshold"},
        {"CAPSYOLO_NMS_IOU", "service.nms_iou"},
        {"CAPSYOLO_MAX_UPLOAD_BYTES", "service.max_upload_bytes"},
        {"CAPSYOLO_STRICT_CLASSES", "service.strict_classes"},
    };
    for (const auto& [var, key] : vars)
        if (const char* v = std::getenv(var)) env.set(key, v);
    apply(env);
}

std::string DiagnosisReport::to_json(const std::vector<std::string>& class_names) const
{
    json j;
    j["disease_class"] = disease_class;
    j["confidence"] = confidence;
    j["detections"] = json::array();
    for (const auto& d : detections) {
        j["detections"].push_back({{"box", {{"x_min", d.box.x_min}, {"y_min", d.box.y_min}, {"x_max", d.box.x_max},
                                            {"y_max", d.box.y_max}}},
                                   {"class", d.class_id < class_names.size() ? class_names[d.class_id] : ""},
                                   {"objectness", d.objectness},
                                   {"score", d.score()}});
    }
    j["recommendation"] = recommendation;
    j["model_version"] = model_version;
    j["uncertain"] = uncertain;
    return j.dump();
}

Diagnoser::Diagnoser(model::CapsYoloModel model, RecommendationTable table, ServiceConfig config)
    : model_(std::move(model)), table_(std::move(table)), config_(std::move(config))
{
    config_.validate();
    if (model_.config().image_channels != 3) throw ConfigError("the service needs a model with RGB input");
    table_.validate_against(model_.config().class_names);
    version_ = model_.version_id();
}

DiagnosisReport Diagnoser::diagnose(std::span<const std::uint8_t> image_bytes) const
{
    if (image_bytes.size() > config_.max_upload_bytes) {
        throw BadInputError("upload_too_large", "upload of " + std::to_string(image_bytes.size()) +
                                                    " bytes exceeds the limit of " +
                                                    std::to_string(config_.max_upload_bytes));
    }
    const auto& mc = model_.config();
    const auto img = data::resize_rgb(data::decode_rgb(image_bytes), mc.image_size, mc.image_size);

    ad::NoGradGuard guard;
    const auto out = model_.forward(data::to_tensor(img), std::nullopt);
    auto dets = yolo::nms(yolo::decode_predictions(out.head, mc.grid(), config_.detection_threshold), config_.nms_iou);
    std::erase_if(dets, [&](const yolo::Detection& d) { return d.score() < config_.detection_threshold; });

    DiagnosisReport r;
    if (!dets.empty()) {
        r.disease_class = mc.class_names.at(dets.front().class_id);
        r.confidence = dets.front().score();
    } else {
        auto norms = out.class_norms.data();
        const auto best = static_cast<std::size_t>(std::max_element(norms.begin(), norms.end()) - norms.begin());
        r.disease_class = mc.class_names.at(best);
        r.confidence = norms[best];
    }
    r.detections = std::move(dets);
    const auto advice = table_.recommend(r.disease_class, r.confidence, config_.confidence_threshold,
                                         config_.strict_classes);
    r.recommendation = advice.text;
    r.uncertain = advice.uncertain;
    r.model_version = version_;
    return r;
}

std::string Diagnoser::health_json() const
{
    json j;
    j["status"] = "ok";
    j["model_version"] = version_;
    j["classes"] = model_.config().class_names;
    return j.dump();
}

}  // namespace capsyolo::service
