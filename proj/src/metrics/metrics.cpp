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

#include "geofuse/metrics/metrics.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "geofuse/core/error.hpp"

namespace geofuse::metrics {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw ValidationError(std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
                          std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                          std::to_string(b.height) + "x" + std::to_string(b.width) + "x" + std::to_string(b.channels));
}

std::vector<double> gray(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0;
      for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
      g[static_cast<std::size_t>(y) * img.width + x] = s / img.channels;
    }
  return g;
}

std::map<std::string, PerceptualFn>& registry() {
  static std::map<std::string, PerceptualFn> r{{"pyramid-l1", pyramid_distance}};
  return r;
}
std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same(a, b, "psnr");
  if (a.data.empty()) throw ValidationError("psnr: empty image");
  double se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / a.data.size();
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow)
    throw ValidationError("ssim: image smaller than the 8x8 window");
  const std::vector<double> ga = gray(a), gb = gray(b);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double n = kSsimWindow * kSsimWindow;
  double total = 0;
  int windows = 0;
  for (int y = 0; y + kSsimWindow <= a.height; y += kSsimStride)
    for (int x = 0; x + kSsimWindow <= a.width; x += kSsimStride) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int r = y; r < y + kSsimWindow; ++r)
        for (int q = x; q < x + kSsimWindow; ++q) {
          const double va = ga[static_cast<std::size_t>(r) * a.width + q];
          const double vb = gb[static_cast<std::size_t>(r) * a.width + q];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  return total / windows;
}

double pyramid_distance(const Image& a, const Image& b) {
  require_same(a, b, "perceptual");
  if (a.height != a.width || a.height % 4 != 0)
    throw ValidationError("perceptual: needs a square image with side divisible by 4");
  const int ch = a.channels;
  std::vector<double> cur(a.data.size());
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<double>(a.data[i]) - b.data[i];
  int s = a.height;
  double total = 0;
  for (int level = 0; level < 3; ++level) {
    if (level == 2) {
      double acc = 0;
      for (double v : cur) acc += std::abs(v);
      total += acc / cur.size();
      break;
    }
    const int h = s / 2;
    std::vector<double> down(static_cast<std::size_t>(h) * h * ch);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < h; ++c)
        for (int k = 0; k < ch; ++k) {
          double acc = 0;
          for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) acc += cur[((2 * r + dr) * s + 2 * c + dc) * ch + k];
          down[(r * h + c) * ch + k] = acc / 4;
        }
    double acc = 0;
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c)
        for (int k = 0; k < ch; ++k)
          acc += std::abs(cur[(r * s + c) * ch + k] - down[((r / 2) * h + c / 2) * ch + k]);
    total += acc / cur.size();
    cur.swap(down);
    s = h;
  }
  return total;
}

PerceptualFn perceptual_metric(const std::string& name) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  const auto it = registry().find(name);
  if (it == registry().end()) throw ValidationError("unknown perceptual metric '" + name + "'");
  return it->second;
}

void register_perceptual_metric(const std::string& name, PerceptualFn fn) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[name] = std::move(fn);
}

Image encode_normals(const Image& normal, const Image& mask) {
  if (normal.channels != 3 || mask.channels != 1 || normal.height != mask.height || normal.width != mask.width)
    throw ValidationError("encode_normals: expects HxWx3 normals and an HxWx1 mask");
  Image out(normal.height, normal.width, 3, 1.0f);
  for (int y = 0; y < normal.height; ++y)
    for (int x = 0; x < normal.width; ++x) {
      if (!(mask.at(y, x, 0) > 0.5f)) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0.5f * (normal.at(y, x, c) + 1.0f);
    }
  return out;
}

Image decode_normals(const Image& encoded) {
  Image out = encoded;
  for (float& v : out.data) v = 2.0f * v - 1.0f;
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out;
}

Triple compare(const Image& pred, const Image& gt, const PerceptualFn& perceptual) {
  return {psnr(pred, gt), ssim(pred, gt), perceptual(pred, gt)};
}

Triple average_per_object(const std::vector<std::vector<Triple>>& per_object_views) {
  Triple out;
  if (per_object_views.empty()) return out;
  for (const auto& views : per_object_views) {
    if (views.empty()) throw ValidationError("average_per_object: object without views");
    Triple o;
    for (const auto& t : views) {
      o.psnr += t.psnr;
      o.ssim += t.ssim;
      o.perceptual += t.perceptual;
    }
    out.psnr += o.psnr / views.size();
    out.ssim += o.ssim / views.size();
    out.perceptual += o.perceptual / views.size();
  }
  const double n = static_cast<double>(per_object_views.size());
  out.psnr /= n;
  out.ssim /= n;
  out.perceptual /= n;
  return out;
}

}  // namespace geofuse::metrics
