// Copyright 2026 The GeoFuse Authors. All Rights Reserved.
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

#include <map>
#include <string>

#include "geofuse/core/params.hpp"

namespace geofuse::refine {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long horizon = 0;  // updates until the cosine schedule reaches 0; 0 keeps lr constant
};

// Decoupled weight decay Adam with a cosine learning-rate schedule.
template <typename T>
class AdamW {
 public:
  struct Moments {
    ad::Mat<T> m, v;
  };

  AdamW() = default;
  explicit AdamW(const AdamConfig& config) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  double learning_rate() const;  // for the next update
  long updates() const { return updates_; }
  void set_updates(long n) { updates_ = n; }

  // Updates every parameter that requires grad and holds a gradient (others
  // are skipped entirely, moments included), then clears all gradients. Returns false (and changes nothing) when no
  // parameter has a gradient.
  bool step(const ParamList<T>& params);

  std::map<std::string, Moments>& state() { return state_; }
  const std::map<std::string, Moments>& state() const { return state_; }

 private:
  AdamConfig config_;
  long updates_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace geofuse::refine
