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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "common/kv_config.hpp"
#include "data/container.hpp"
#include "loss/composite_loss.hpp"
#include "model/model.hpp"
#include "train/objective.hpp"

namespace capsyolo::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t max_epochs = 40;
    std::size_t patience = 5;
    std::size_t batch_size = 1;
    std::uint64_t seed = 1;
    double min_improvement = 1e-6;
    loss::LossWeights weights;

    void validate() const;
    // Reads `train.*` and `loss.*` keys.
    void apply(const KvConfig& cfg);
};

struct EarlyStop {
    bool stop = false;
    std::size_t stop_epoch = 0;  // 1-based; 0 when not stopping
    std::size_t best_epoch = 0;  // 1-based argmin, earliest on ties
};

class EarlyStopper {
public:
    EarlyStopper(std::size_t patience, double min_improvement = 1e-6);

    // Feeds one epoch's validation loss; true once patience is exhausted.
    bool update(double loss);
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    std::size_t epochs() const { return epochs_; }

private:
    std::size_t patience_;
    double min_improvement_;
    std::size_t epochs_ = 0;
    std::size_t best_epoch_ = 0;
    double best_loss_ = 0.0;
    std::size_t stale_ = 0;
};

// Replays a loss trace and reports where training would halt.
EarlyStop early_stop(std::span<const double> losses, std::size_t patience, double min_improvement = 1e-6);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN without a validation split
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::size_t> predictions;
};

// Mean objective and capsule-length accuracy, without recording gradients.
EvalResult evaluate_samples(const model::CapsYoloModel& model, std::span<const Sample> samples,
                            const loss::LossWeights& weights);

struct TrainResult {
    std::vector<EpochRecord> history;
    double initial_train_loss = 0.0;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch SGD on the mean per-sample objective. The model ends up holding
// the weights of the best validation epoch.
TrainResult train(model::CapsYoloModel& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

std::vector<Sample> samples_from(const data::Dataset& ds, const std::vector<std::size_t>& indices);

std::string history_to_csv(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> history_from_csv(const std::string& text);
std::string history_svg(const std::vector<EpochRecord>& history);

}  // namespace capsyolo::train
