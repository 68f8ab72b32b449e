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

#include "train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "ad/ops.hpp"
#include "common/errors.hpp"
#include "common/rng.hpp"
#include "report/svg.hpp"

namespace capsyolo::train {

void TrainConfig::validate() const
{
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.learning_rate must be a finite non-negative number");
    }
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("train.patience must be at least 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
    if (!(min_improvement >= 0.0)) throw ConfigError("train.min_improvement must be >= 0");
    weights.validate();
}

void TrainConfig::apply(const KvConfig& cfg)
{
    auto count = [&](const char* key, std::size_t& field) {
        auto v = cfg.get_int(key, static_cast<std::int64_t>(field));
        if (v < 1) throw ConfigError(std::string(key) + " must be at least 1");
        field = static_cast<std::size_t>(v);
    };
    learning_rate = cfg.get_double("train.learning_rate", learning_rate);
    count("train.max_epochs", max_epochs);
    count("train.patience", patience);
    count("train.batch_size", batch_size);
    seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<std::int64_t>(seed)));
    min_improvement = cfg.get_double("train.min_improvement", min_improvement);

    auto& w = weights;
    w.lambda_coord = cfg.get_double("loss.lambda_coord", w.lambda_coord);
    w.lambda_noobj = cfg.get_double("loss.lambda_noobj", w.lambda_noobj);
    w.m_plus = cfg.get_double("loss.m_plus", w.m_plus);
    w.m_minus = cfg.get_double("loss.m_minus", w.m_minus);
    w.margin_lambda = cfg.get_double("loss.margin_lambda", w.margin_lambda);
    w.localization = cfg.get_double("loss.localization", w.localization);
    w.classification = cfg.get_double("loss.classification", w.classification);
    w.reconstruction = cfg.get_double("loss.reconstruction", w.reconstruction);
    validate();
}

EarlyStopper::EarlyStopper(std::size_t patience, double min_improvement)
    : patience_(patience), min_improvement_(min_improvement)
{
    if (patience_ < 1) throw ConfigError("early stopping patience must be at least 1");
}

bool EarlyStopper::update(double loss)
{
    ++epochs_;
    if (epochs_ == 1) {
        best_epoch_ = 1;
        best_loss_ = loss;
        return false;
    }
    const bool improved = loss < best_loss_ - min_improvement_;
    if (loss < best_loss_) {
        best_loss_ = loss;
        best_epoch_ = epochs_;
    }
    stale_ = improved ? 0 : stale_ + 1;
    return stale_ >= patience_;
}

EarlyStop early_stop(std::span<const double> losses, std::size_t patience, double min_improvement)
{
    if (losses.empty()) throw ContractError("early_stop: empty loss history");
    EarlyStopper s(patience, min_improvement);
    EarlyStop r;
    for (double l : losses) {
        if (s.update(l)) {
            r.stop = true;
            r.stop_epoch = s.epochs();
            break;
        }
    }
    r.best_epoch = s.best_epoch();
    return r;
}

EvalResult evaluate_samples(const model::CapsYoloModel& model, std::span<const Sample> samples,
                            const loss::LossWeights& weights)
{
    ad::NoGradGuard guard;
    EvalResult r;
    if (samples.empty()) {
        r.loss = r.accuracy = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    std::size_t correct = 0;
    double total = 0.0;
    for (const auto& s : samples) {
        model::ForwardResult out;
        total += sample_objective(model, s, weights, &out).total;
        const std::size_t pred = argmax(out.class_norms.data());
        r.predictions.push_back(pred);
        correct += pred == s.label;
    }
    r.loss = total / static_cast<double>(samples.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    return r;
}

TrainResult train(model::CapsYoloModel& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch)
{
    config.validate();
    if (train_set.empty()) throw ValidationError("training split is empty");

    TrainResult result;
    result.initial_train_loss = evaluate_samples(model, train_set, config.weights).loss;
    Rng rng(config.seed);
    EarlyStopper stopper(config.patience, config.min_improvement);
    auto best = model.clone();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            model.zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                const auto& s = train_set[order[k]];
                auto parts = sample_objective(model, s, config.weights);
                if (!std::isfinite(parts.total)) {
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (localization " +
                                       std::to_string(parts.localization) + ", classification " +
                                       std::to_string(parts.classification) + ", reconstruction " +
                                       std::to_string(parts.reconstruction) + ")");
                }
                ad::scale(parts.total_tensor, inv).backward();
            }
            for (auto& np : model.parameters()) {
                if (!np.value.has_grad()) continue;
                auto g = np.value.grad();
                auto d = np.value.mutable_data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] -= config.learning_rate * g[i];
            }
        }
        model.zero_grad();

        const auto tr = evaluate_samples(model, train_set, config.weights);
        const auto va = evaluate_samples(model, val_set, config.weights);
        if (!std::isfinite(tr.loss)) throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
        EpochRecord rec{epoch, tr.loss, va.loss, tr.accuracy, va.accuracy};
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const double monitored = val_set.empty() ? tr.loss : va.loss;
        const bool stop = stopper.update(monitored);
        if (stopper.best_epoch() == epoch) best.copy_values_from(model);
        if (stop) {
            result.stopped_early = true;
            break;
        }
    }
    result.best_epoch = stopper.best_epoch();
    model.copy_values_from(best);
    return result;
}

std::vector<Sample> samples_from(const data::Dataset& ds, const std::vector<std::size_t>& indices)
{
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        Sample s;
        s.image = ds.image(i);
        s.label = static_cast<std::size_t>(ds.labels.at(i));
        s.objects = {{ds.box(i), s.label}};
        out.push_back(std::move(s));
    }
    return out;
}

std::string history_to_csv(const std::vector<EpochRecord>& history)
{
    auto f = [](double v) {
        if (!std::isfinite(v)) return std::string();
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream o;
    o << "epoch,train_loss,val_loss,train_acc,val_acc\n";
    for (const auto& r : history)
        o << r.epoch << "," << f(r.train_loss) << "," << f(r.val_loss) << "," << f(r.train_acc) << "," << f(r.val_acc)
          << "\n";
    return o.str();
}

std::vector<EpochRecord> history_from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "epoch,train_loss,val_loss,train_acc,val_acc") {
        throw ValidationError("history: unexpected header");
    }
    std::vector<EpochRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != 5) throw ValidationError("history line " + std::to_string(lineno) + ": expected 5 fields");
        auto num = [&](const std::string& c) {
            const auto t = trim(c);
            if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
            try {
                return std::stod(t);
            } catch (const std::exception&) {
                throw ValidationError("history line " + std::to_string(lineno) + ": bad number '" + t + "'");
            }
        };
        EpochRecord r;
        r.epoch = static_cast<std::size_t>(num(cells[0]));
        r.train_loss = num(cells[1]);
        r.val_loss = num(cells[2]);
        r.train_acc = num(cells[3]);
        r.val_acc = num(cells[4]);
        out.push_back(r);
    }
    return out;
}

std::string history_svg(const std::vector<EpochRecord>& history)
{
    report::Series tl{"train loss", {}, "#1f77b4"}, vl{"validation loss", {}, "#d62728"};
    report::Series ta{"train accuracy", {}, "#1f77b4"}, va{"validation accuracy", {}, "#d62728"};
    for (const auto& r : history) {
        tl.y.push_back(r.train_loss);
        vl.y.push_back(r.val_loss);
        ta.y.push_back(r.train_acc);
        va.y.push_back(r.val_acc);
    }
    return report::stack_svg({report::line_chart_svg("Loss", "epoch", {tl, vl}),
                              report::line_chart_svg("Accuracy", "epoch", {ta, va})},
                             360, 720);
}

}  // namespace capsyolo::train
