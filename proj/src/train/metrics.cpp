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

#include "train/metrics.hpp"

#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"

namespace capsyolo::train {

using nlohmann::json;

void ConfusionMatrix::add(std::size_t truth, std::size_t pred)
{
    if (truth >= k_ || pred >= k_) {
        throw ContractError("confusion: label " + std::to_string(truth >= k_ ? truth : pred) + " outside [0," +
                            std::to_string(k_) + ")");
    }
    ++counts_[truth * k_ + pred];
}

std::uint64_t ConfusionMatrix::total() const
{
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::trace() const
{
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += counts_[i * k_ + i];
    return t;
}

std::string ConfusionMatrix::to_csv(const std::vector<std::string>& names) const
{
    auto quote = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
        return out + "\"";
    };
    auto name = [&](std::size_t i) { return i < names.size() ? names[i] : std::to_string(i); };
    std::ostringstream o;
    o << "true\\pred";
    for (std::size_t j = 0; j < k_; ++j) o << "," << quote(name(j));
    o << "\n";
    for (std::size_t i = 0; i < k_; ++i) {
        o << quote(name(i));
        for (std::size_t j = 0; j < k_; ++j) o << "," << at(i, j);
        o << "\n";
    }
    return o.str();
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k)
{
    if (truth.size() != pred.size()) throw ContractError("confusion: label sequences differ in length");
    if (k == 0) throw ContractError("confusion: need at least one class");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return cm;
}

Ratios ratios(const BinaryCounts& c)
{
    auto frac = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    Ratios r;
    r.accuracy = frac(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
    r.precision = frac(c.tp, c.tp + c.fp);
    r.recall = frac(c.tp, c.tp + c.fn);
    r.false_alarm_rate = frac(c.fp, c.fp + c.tn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    return r;
}

MetricsReport metrics(const ConfusionMatrix& cm)
{
    const std::uint64_t n = cm.total();
    if (n == 0) throw ContractError("metrics: confusion matrix is empty");
    const std::size_t k = cm.classes();
    MetricsReport rep;
    rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(n);
    for (std::size_t c = 0; c < k; ++c) {
        BinaryCounts b;
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        b.tp = cm.at(c, c);
        b.fn = row - b.tp;
        b.fp = col - b.tp;
        b.tn = n - b.tp - b.fn - b.fp;
        rep.counts.push_back(b);
        rep.per_class.push_back(ratios(b));
    }
    auto mean = [&](std::optional<double> Ratios::*field) -> std::optional<double> {
        double s = 0.0;
        std::size_t m = 0;
        for (const auto& r : rep.per_class)
            if (r.*field) {
                s += *(r.*field);
                ++m;
            }
        if (m == 0) return std::nullopt;
        return s / static_cast<double>(m);
    };
    rep.macro.accuracy = mean(&Ratios::accuracy);
    rep.macro.precision = mean(&Ratios::precision);
    rep.macro.recall = mean(&Ratios::recall);
    rep.macro.f1 = mean(&Ratios::f1);
    rep.macro.false_alarm_rate = mean(&Ratios::false_alarm_rate);
    return rep;
}

namespace {

json ratios_json(const Ratios& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"accuracy", opt(r.accuracy)},
            {"precision", opt(r.precision)},
            {"recall", opt(r.recall)},
            {"f1", opt(r.f1)},
            {"false_alarm_rate", opt(r.false_alarm_rate)}};
}

}  // namespace

std::string MetricsReport::to_json(const std::vector<std::string>& names) const
{
    json j;
    j["accuracy"] = accuracy;
    j["macro"] = ratios_json(macro);
    j["per_class"] = json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        json e = ratios_json(per_class[c]);
        e["class"] = c < names.size() ? names[c] : std::to_string(c);
        e["tp"] = counts[c].tp;
        e["tn"] = counts[c].tn;
        e["fp"] = counts[c].fp;
        e["fn"] = counts[c].fn;
        j["per_class"].push_back(e);
    }
    return j.dump(2);
}

}  // namespace capsyolo::train
