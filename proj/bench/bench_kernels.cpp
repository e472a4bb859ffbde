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

// OpenMP kernels against the scalar serial reference. Thread counts are
// swept up to the machine's core count.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "geofuse/core/rng.hpp"
#include "geofuse/scenekit/camera.hpp"
#include "geofuse/triplane/field.hpp"
#include "geofuse/triplane/kernels.hpp"
#include "geofuse/triplane/reference.hpp"

namespace {

using namespace geofuse;
using MatF = ad::Mat<float>;

struct Field {
  MatF planes;
  triplane::FieldMlp<float> mlp;
  int resolution = 8;
  kernels::FieldRefs<float> refs() const {
    return {&planes,           resolution,       &mlp.w1.value(), &mlp.b1.value(),
            &mlp.w2.value(),   &mlp.b2.value(),  &mlp.w3.value(), &mlp.b3.value()};
  }
};

const Field& field() {
  static const Field f = [] {
    Rng rng(1);
    Field f;
    f.planes = MatF::Random(3 * 8 * 8, 32);
    f.mlp = triplane::FieldMlp<float>::init(32, 32, rng);
    return f;
  }();
  return f;
}

kernels::RaySetup setup(int res) {
  kernels::RaySetup s;
  s.resolution = res;
  s.samples = 32;
  return s;
}

void BM_RenderKernel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(1)));
  const auto cam = scenekit::orbit_camera(20, 30, 2.0);
  const auto s = setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = kernels::render_forward<float>(field().refs(), cam, s, nullptr);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * s.resolution * s.resolution);
}

void BM_RenderSerial(benchmark::State& state) {
  const auto cam = scenekit::orbit_camera(20, 30, 2.0);
  const auto s = setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = reference::render_view_serial<float>(field().refs(), cam, s);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * s.resolution * s.resolution);
}

void BM_FieldKernel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(1)));
  const MatF pts = MatF::Random(state.range(0), 3);
  MatF raw;
  for (auto _ : state) {
    kernels::field_forward<float>(field().refs(), pts, raw, nullptr);
    benchmark::DoNotOptimize(raw.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FieldSerial(benchmark::State& state) {
  const MatF pts = MatF::Random(state.range(0), 3);
  const auto& f = field();
  for (auto _ : state) {
    float acc = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const float p[3] = {pts(i, 0), pts(i, 1), pts(i, 2)};
      const auto feat = reference::sample_triplane_point<float>(f.planes, f.resolution, p);
      acc += reference::field_point<float>(f.refs(), feat)[0];
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void thread_sweep(benchmark::internal::Benchmark* b, std::vector<int64_t> sizes) {
  const int max_threads = omp_get_num_procs();
  for (auto n : sizes)
    for (int t = 1; t <= max_threads; t *= 2) b->Args({n, t});
}

}  // namespace

BENCHMARK(BM_RenderKernel)->Apply([](auto* b) { thread_sweep(b, {32, 64}); })->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderSerial)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FieldKernel)->Apply([](auto* b) { thread_sweep(b, {4096, 32768}); })->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FieldSerial)->Arg(4096)->Arg(32768)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
