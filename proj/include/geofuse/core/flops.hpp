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

#include <atomic>
#include <cstdint>

namespace geofuse::flops {

// Instrumented multiply-add counter. Kernels report 2*m*n*k for every
// matrix product they execute while counting is enabled.
inline std::atomic<std::uint64_t>& counter() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}
inline std::atomic<bool>& enabled() {
  static std::atomic<bool> e{false};
  return e;
}
inline void add(std::uint64_t n) {
  if (enabled().load(std::memory_order_relaxed)) counter().fetch_add(n, std::memory_order_relaxed);
}

class Scope {
 public:
  Scope() {
    counter().store(0);
    enabled().store(true);
  }
  ~Scope() { enabled().store(false); }
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
  std::uint64_t count() const { return counter().load(); }
};

}  // namespace geofuse::flops
