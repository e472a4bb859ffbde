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

#include <string>
#include <vector>

#include "geofuse/core/image.hpp"
#include "geofuse/refine/model.hpp"
#include "geofuse/triplane/renderer.hpp"

namespace geofuse::app {

inline constexpr int kGridUpscale = 4;
inline constexpr int kGridSeparator = 2;
inline constexpr int kGridHeader = 11;  // label band: 7px glyphs plus padding

// Layout of a grid of rows x cols tiles of res x res pixels, upscaled by
// kGridUpscale (nearest). With s = res * kGridUpscale:
//   width  = cols * (s + 2) + 2
//   height = kGridHeader + rows * (s + 2) + 2
struct GridLayout {
  int rows = 0, cols = 0, tile = 0;
  int width() const { return cols * (tile + kGridSeparator) + kGridSeparator; }
  int height() const { return kGridHeader + rows * (tile + kGridSeparator) + kGridSeparator; }
  int tile_y(int row) const { return kGridHeader + kGridSeparator + row * (tile + kGridSeparator); }
  int tile_x(int col) const { return kGridSeparator + col * (tile + kGridSeparator); }
};

// Tiles (all res x res, 3 channels) with column labels in the header band and
// row labels burned into each row's first tile.
Image tile_grid(const std::vector<std::vector<Image>>& tiles, const std::vector<std::string>& column_labels,
                const std::vector<std::string>& row_labels);

// RGB and encoded normals (white background) of a state seen from `camera`.
struct TilePair {
  Image rgb, normal;
};
TilePair render_tiles(const refine::ReconstructionState<float>& state, const triplane::FieldMlp<float>& field,
                      const scenekit::CameraPose& camera, const triplane::RenderSettings& settings);

// One row per state: input image, then V RGB renders and V normal renders at
// the cameras of `views` (so 1 + 2V columns). views[0].rgb is the input tile.
Image grid_image(const std::vector<refine::ReconstructionState<float>>& states, const triplane::FieldMlp<float>& field,
                 const std::vector<scenekit::ViewRecord>& views, int samples);
void emit_grid(const std::vector<refine::ReconstructionState<float>>& states, const triplane::FieldMlp<float>& field,
               const std::vector<scenekit::ViewRecord>& views, int samples, const std::string& path);

// One row per view: input | baseline rgb | refined rgb | baseline normals |
// refined normals. `input` is the first conditioning image.
Image comparison_image(const Image& input, const refine::ReconstructionState<float>& baseline,
                       const refine::ReconstructionState<float>& refined, const triplane::FieldMlp<float>& field,
                       const std::vector<scenekit::ViewRecord>& views, int samples);

}  // namespace geofuse::app
