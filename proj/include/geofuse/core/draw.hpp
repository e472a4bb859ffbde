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

#include <array>
#include <string>

#include "geofuse/core/image.hpp"

namespace geofuse::draw {

using Color = std::array<float, 3>;

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

// Paints `img` (3 channels) in place; everything is clipped to the image.
void fill_rect(Image& img, int y, int x, int h, int w, const Color& c);
void line(Image& img, int y0, int x0, int y1, int x1, const Color& c);
// 5x7 bitmap text, upper-cased; unknown characters draw as blanks.
// Each glyph advances (kGlyphWidth + 1) * scale pixels.
void text(Image& img, int y, int x, const std::string& s, const Color& c, int scale = 1);
int text_width(const std::string& s, int scale = 1);

// Copies `src` (1 or 3 channels) into `dst` at (y, x).
void blit(Image& dst, const Image& src, int y, int x);

}  // namespace geofuse::draw
