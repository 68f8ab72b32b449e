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

#include "capsyolo/capsyolo.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"
#include "common/kv_config.hpp"
#include "data/container.hpp"
#include "data/forge.hpp"
#include "model/model.hpp"
#include "report/svg.hpp"
#include "service/diagnoser.hpp"
#include "train/metrics.hpp"
#include "train/trainer.hpp"

using namespace capsyolo;
using nlohmann::json;

struct cy_model {
    model::CapsYoloModel model;
};

struct cy_diagnoser {
    service::Diagnoser diagnoser;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_reason;

cy_status status_of(ErrorKind k)
{
    switch (k) {
        case ErrorKind::Dimension: return CY_ERR_DIMENSION;
        case ErrorKind::Contract: return CY_ERR_CONTRACT;
        case ErrorKind::Config: return CY_ERR_CONFIG;
        case ErrorKind::Io: return CY_ERR_IO;
        case ErrorKind::Validation: return CY_ERR_VALIDATION;
        case ErrorKind::BadInput: return CY_ERR_BAD_INPUT;
        case ErrorKind::Numeric: return CY_ERR_NUMERIC;
    }
    return CY_ERR_INTERNAL;
}

template <typename F>
cy_status guarded(F&& body)
{
    g_last_error.clear();
    g_last_reason.clear();
    try {
        body();
        return CY_OK;
    } catch (const BadInputError& e) {
        g_last_error = e.what();
        g_last_reason = e.reason;
        return CY_ERR_BAD_INPUT;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown failure";
    }
    return CY_ERR_INTERNAL;
}

char* dup(const std::string& s)
{
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void emit(char** out, const std::string& s)
{
    if (out) *out = dup(s);
}

void require(const void* p, const char* what)
{
    if (!p) throw ContractError(std::string(what) + " must not be NULL");
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + path);
}

std::vector<std::size_t> split_indices(const data::Dataset& ds, const std::string& split)
{
    if (split == "train") return ds.indices(true);
    if (split == "test") return ds.indices(false);
    if (split == "all") {
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    throw ContractError("split must be train, test or all; got '" + split + "'");
}

service::ServiceConfig from_options(const cy_service_options& o)
{
    service::ServiceConfig c;
    if (o.model_path) c.model_path = o.model_path;
    if (o.recommendations_path) c.recommendations_path = o.recommendations_path;
    c.confidence_threshold = o.confidence_threshold;
    c.detection_threshold = o.detection_threshold;
    c.nms_iou = o.nms_iou;
    c.max_upload_bytes = o.max_upload_bytes;
    c.strict_classes = o.strict_classes != 0;
    c.validate();
    return c;
}

cy_diagnoser* build_diagnoser(const service::ServiceConfig& c)
{
    auto table = service::RecommendationTable::load(c.recommendations_path);
    auto m = model::CapsYoloModel::load(c.model_path);
    return new cy_diagnoser{service::Diagnoser(std::move(m), std::move(table), c)};
}

}  // namespace

extern "C" {

const char* cy_version(void)
{
    return "0.1.0";
}

const char* cy_status_name(cy_status status)
{
    switch (status) {
        case CY_OK: return "ok";
        case CY_ERR_DIMENSION: return "dimension_error";
        case CY_ERR_CONTRACT: return "contract_error";
        case CY_ERR_CONFIG: return "config_error";
        case CY_ERR_IO: return "io_error";
        case CY_ERR_VALIDATION: return "validation_error";
        case CY_ERR_BAD_INPUT: return "bad_input";
        case CY_ERR_NUMERIC: return "numeric_error";
        case CY_ERR_INTERNAL: return "internal_error";
    }
    return "unknown";
}

const char* cy_last_error(void)
{
    return g_last_error.c_str();
}

const char* cy_last_error_reason(void)
{
    return g_last_reason.c_str();
}

void cy_string_free(char* s)
{
    std::free(s);
}

cy_status cy_forge_build(const char* sources, const char* targets_path, const char* out_path,
                         const char* manifest_path, uint64_t seed, double train_fraction, size_t image_size,
                         char** report_json)
{
    return guarded([&] {
        require(sources, "sources");
        require(targets_path, "targets_path");
        require(out_path, "out_path");
        if (image_size == 0) throw ConfigError("image size must be positive");
        std::vector<std::string> roots;
        for (const auto& r : split(sources, ','))
            if (!trim(r).empty()) roots.push_back(trim(r));

        auto scan = data::scan_sources(roots);
        auto manifest = data::balance_merge(scan.corpora, data::load_targets(targets_path), seed);
        data::split(manifest, train_fraction, seed);
        auto ds = data::assemble(manifest, image_size, image_size);
        data::write_container(ds, out_path);
        if (manifest_path) spit(manifest_path, data::manifest_to_json(manifest));

        json r;
        r["container"] = out_path;
        r["images"] = manifest.entries.size();
        r["train"] = manifest.train_count();
        r["test"] = manifest.entries.size() - manifest.train_count();
        r["seed"] = seed;
        r["classes"] = json::array();
        const auto counts = manifest.class_counts();
        for (std::size_t c = 0; c < manifest.classes.size(); ++c)
            r["classes"].push_back({{"name", manifest.classes[c]},
                                    {"count", counts[c]},
                                    {"from_source", manifest.plans[c].from_source}});
        r["sources"] = json::array();
        for (const auto& corpus : scan.corpora) r["sources"].push_back({{"name", corpus.name}, {"images", corpus.total()}});
        r["skipped"] = json::array();
        for (const auto& s : scan.skipped) r["skipped"].push_back({{"path", s.path}, {"reason", s.reason}});
        emit(report_json, r.dump(2));
    });
}

cy_status cy_container_validate(const char* path, double ratio_bound, char** report_json, int* ok)
{
    return guarded([&] {
        require(path, "path");
        const auto ds = data::read_container(path);
        std::vector<std::size_t> labels(ds.labels.begin(), ds.labels.end());
        const auto rep = data::validate_balance(ds.class_names, labels, ds.sources, ratio_bound);
        if (ok) *ok = rep.ok() ? 1 : 0;
        auto j = json::parse(rep.to_json());
        j["images"] = ds.size();
        j["train"] = ds.indices(true).size();
        j["test"] = ds.indices(false).size();
        j["image_size"] = {ds.height, ds.width};
        j["seed"] = ds.seed;
        emit(report_json, j.dump(2));
    });
}

cy_status cy_container_stats_svg(const char* path, char** svg)
{
    return guarded([&] {
        require(path, "path");
        const auto ds = data::read_container(path);
        std::vector<double> counts(ds.class_names.size(), 0.0);
        for (auto l : ds.labels) counts.at(static_cast<std::size_t>(l)) += 1.0;
        emit(svg, report::bar_chart_svg("Images per class", ds.class_names, counts));
    });
}

cy_status cy_train(const char* data_path, const char* config_path, const char* model_out, const char* history_path,
                   cy_epoch_callback on_epoch, void* user, char** summary_json)
{
    return guarded([&] {
        require(data_path, "data_path");
        require(model_out, "model_out");
        const auto ds = data::read_container(data_path);
        if (ds.height != ds.width) throw ValidationError("training needs square images");

        model::ModelConfig mc;
        mc.image_size = ds.height;
        mc.class_names = ds.class_names;
        train::TrainConfig tc;
        if (config_path) {
            const auto kv = KvConfig::load(config_path);
            mc.apply(kv);
            tc.apply(kv);
        }
        model::CapsYoloModel m(mc);
        const auto train_set = train::samples_from(ds, ds.indices(true));
        const auto val_set = train::samples_from(ds, ds.indices(false));

        auto result = train::train(m, train_set, val_set, tc, [&](const train::EpochRecord& r) {
            if (on_epoch) {
                const cy_epoch_record rec{r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc};
                on_epoch(&rec, user);
            }
        });
        m.save(model_out);
        if (history_path) spit(history_path, train::history_to_csv(result.history));

        json s;
        s["epochs_run"] = result.history.size();
        s["best_epoch"] = result.best_epoch;
        s["stopped_early"] = result.stopped_early;
        s["initial_train_loss"] = result.initial_train_loss;
        const auto& best = result.history.at(result.best_epoch - 1);
        s["best"] = {{"train_loss", best.train_loss},
                     {"val_loss", std::isfinite(best.val_loss) ? json(best.val_loss) : json(nullptr)},
                     {"train_acc", best.train_acc},
                     {"val_acc", std::isfinite(best.val_acc) ? json(best.val_acc) : json(nullptr)}};
        s["model_version"] = m.version_id();
        s["parameters"] = m.parameter_count();
        s["train_images"] = train_set.size();
        s["val_images"] = val_set.size();
        emit(summary_json, s.dump(2));
    });
}

cy_status cy_evaluate(const char* data_path, const char* model_path, const char* split, char** metrics_json,
                      char** cm_csv)
{
    return guarded([&] {
        require(data_path, "data_path");
        require(model_path, "model_path");
        const auto ds = data::read_container(data_path);
        const auto m = model::CapsYoloModel::load(model_path);
        const auto& mc = m.config();
        if (mc.class_names != ds.class_names) throw ValidationError("model classes differ from the dataset classes");
        if (mc.image_size != ds.height || mc.image_size != ds.width) {
            throw ValidationError("model input size " + std::to_string(mc.image_size) + " differs from dataset images");
        }
        const std::string which = split ? split : "test";
        const auto samples = train::samples_from(ds, split_indices(ds, which));
        if (samples.empty()) throw ValidationError("the " + which + " split is empty");
        const auto eval = train::evaluate_samples(m, samples, train::TrainConfig{}.weights);

        std::vector<std::size_t> truth;
        for (const auto& s : samples) truth.push_back(s.label);
        const auto cm = train::confusion(truth, eval.predictions, mc.num_classes());
        auto j = json::parse(train::metrics(cm).to_json(mc.class_names));
        j["split"] = which;
        j["samples"] = samples.size();
        j["mean_loss"] = eval.loss;
        j["model_version"] = m.version_id();
        emit(metrics_json, j.dump(2));
        emit(cm_csv, cm.to_csv(mc.class_names));
    });
}

cy_status cy_plot_history(const char* history_csv_path, char** svg)
{
    return guarded([&] {
        require(history_csv_path, "history_csv_path");
        emit(svg, train::history_svg(train::history_from_csv(slurp(history_csv_path))));
    });
}

cy_status cy_model_load(const char* path, cy_model** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new cy_model{model::CapsYoloModel::load(path)};
    });
}

cy_status cy_model_info(const cy_model* m, char** info_json)
{
    return guarded([&] {
        require(m, "model");
        const auto& c = m->model.config();
        json j;
        j["version"] = m->model.version_id();
        j["classes"] = c.class_names;
        j["image_size"] = c.image_size;
        j["parameters"] = m->model.parameter_count();
        j["config"] = json::parse(model::to_json(c));
        emit(info_json, j.dump(2));
    });
}

void cy_model_free(cy_model* m)
{
    delete m;
}

void cy_service_options_default(cy_service_options* o)
{
    if (!o) return;
    const service::ServiceConfig d;
    o->model_path = nullptr;
    o->recommendations_path = nullptr;
    o->confidence_threshold = d.confidence_threshold;
    o->detection_threshold = d.detection_threshold;
    o->nms_iou = d.nms_iou;
    o->max_upload_bytes = d.max_upload_bytes;
    o->strict_classes = d.strict_classes ? 1 : 0;
}

cy_status cy_diagnoser_create(const cy_service_options* options, cy_diagnoser** out)
{
    return guarded([&] {
        require(options, "options");
        require(out, "out");
        require(options->model_path, "options->model_path");
        require(options->recommendations_path, "options->recommendations_path");
        *out = build_diagnoser(from_options(*options));
    });
}

cy_status cy_diagnoser_open(const char* config_path, const char* overrides, cy_diagnoser** out)
{
    return guarded([&] {
        require(out, "out");
        service::ServiceConfig c;
        if (config_path) c.apply(KvConfig::load(config_path));
        c.apply_env();
        if (overrides) c.apply(KvConfig::parse(overrides, "<overrides>"));
        *out = build_diagnoser(c);
    });
}

cy_status cy_diagnoser_listen(const cy_diagnoser* d, char** host, int* port, size_t* max_upload_bytes)
{
    return guarded([&] {
        require(d, "diagnoser");
        const auto& c = d->diagnoser.config();
        emit(host, c.listen_host);
        if (port) *port = c.listen_port;
        if (max_upload_bytes) *max_upload_bytes = c.max_upload_bytes;
    });
}

cy_status cy_diagnoser_diagnose(const cy_diagnoser* d, const uint8_t* bytes, size_t len, char** report_json)
{
    return guarded([&] {
        require(d, "diagnoser");
        if (!bytes && len > 0) throw ContractError("bytes must not be NULL");
        const auto report = d->diagnoser.diagnose({bytes, len});
        emit(report_json, report.to_json(d->diagnoser.model().config().class_names));
    });
}

cy_status cy_diagnoser_health(const cy_diagnoser* d, char** health_json)
{
    return guarded([&] {
        require(d, "diagnoser");
        emit(health_json, d->diagnoser.health_json());
    });
}

void cy_diagnoser_free(cy_diagnoser* d)
{
    delete d;
}

}  // extern "C"
