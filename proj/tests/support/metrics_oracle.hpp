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

#include <optional>
#include <vector>

namespace capsyolo::testing {

struct OracleCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;
};

// Walks the samples one at a time; no confusion matrix involved.
inline OracleCounts count_one_vs_rest(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                                      std::size_t cls)
{
    OracleCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual = truth[i] == cls, said = pred[i] == cls;
        if (actual && said) ++c.tp;
        else if (!actual && !said) ++c.tn;
        else if (!actual && said) ++c.fp;
        else ++c.fn;
    }
    return c;
}

inline std::optional<double> oracle_ratio(long num, long den)
{
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline double oracle_accuracy(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred)
{
    long hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace capsyolo::testing
