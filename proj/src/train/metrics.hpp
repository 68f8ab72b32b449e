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
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capsyolo::train {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

    std::size_t classes() const { return k_; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * k_ + pred); }
    void add(std::size_t truth, std::size_t pred);
    std::uint64_t total() const;
    std::uint64_t trace() const;

    std::string to_csv(const std::vector<std::string>& names) const;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k);

struct BinaryCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// Ratios with a zero denominator stay empty.
struct Ratios {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> false_alarm_rate;
};

Ratios ratios(const BinaryCounts& c);

struct MetricsReport {
    double accuracy = 0.0;  // trace / total
    std::vector<BinaryCounts> counts;  // one-vs-rest per class
    std::vector<Ratios> per_class;
    Ratios macro;  // mean over classes where the ratio exists

    std::string to_json(const std::vector<std::string>& names) const;
};

MetricsReport metrics(const ConfusionMatrix& cm);

}  // namespace capsyolo::train
