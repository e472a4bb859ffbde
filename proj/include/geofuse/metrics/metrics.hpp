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

#include <functional>
#include <string>
#include <vector>

#include "geofuse/core/image.hpp"

namespace geofuse::metrics {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 8;
inline constexpr int kSsimStride = 4;

// 10 log10(1 / MSE) over all pixels and channels; kPsnrCap when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

// Mean SSIM over 8x8 uniform windows at stride 4 on the channel-mean
// grayscale image, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const Image& a, const Image& b);

// Laplacian-pyramid L1 of a - b (3 levels, 2x2 average pooling, nearest
// upsampling), in double. Zero iff the images are equal; symmetric.
double pyramid_distance(const Image& a, const Image& b);

using PerceptualFn = std::function<double(const Image&, const Image&)>;
// Perceptual metric by name; "pyramid-l1" is the only built-in entry.
PerceptualFn perceptual_metric(const std::string& name);
void register_perceptual_metric(const std::string& name, PerceptualFn fn);
inline double perceptual_distance(const Image& a, const Image& b) { return pyramid_distance(a, b); }

// (n + 1) / 2 per channel where mask > 0.5, white elsewhere.
Image encode_normals(const Image& normal, const Image& mask);
// Inverse of encode_normals on the foreground (2v - 1).
Image decode_normals(const Image& encoded);
// 8-bit quantisation as written to PNG.
Image quantize8(const Image& img);

struct Triple {
  double psnr = 0, ssim = 0, perceptual = 0;
};

Triple compare(const Image& pred, const Image& gt, const PerceptualFn& perceptual = pyramid_distance);

// Per-view triples averaged per object first, then across objects.
Triple average_per_object(const std::vector<std::vector<Triple>>& per_object_views);

}  // namespace geofuse::metrics
