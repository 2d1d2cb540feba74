// Copyright 2026 The cropseg Authors.
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

#include <cmath>
#include <vector>

#include "cropseg/error.hpp"

namespace cropseg {

struct EvalResult {
  std::vector<double> predicted;
  std::vector<double> truth;
  double rmse = 0.0;
  double mape = 0.0;  // percent
};

/// Root mean squared count error and mean absolute percentage error.
/// MAPE needs every truth to be positive.
inline EvalResult evaluate(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size()) {
    throw DataError("prediction and truth lists differ in length (" +
                    std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()) + ")");
  }
  if (predicted.empty()) throw DataError("nothing to evaluate");
  EvalResult out{predicted, truth, 0.0, 0.0};
  double squared = 0.0;
  double percent = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(truth[i] > 0.0)) {
      throw DataError("MAPE is undefined for scene " + std::to_string(i) + " with zero truth");
    }
    const double err = predicted[i] - truth[i];
    squared += err * err;
    percent += std::abs(err) / truth[i] * 100.0;
  }
  const auto n = static_cast<double>(truth.size());
  out.rmse = std::sqrt(squared / n);
  out.mape = percent / n;
  return out;
}

}  // namespace cropseg
