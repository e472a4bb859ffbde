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

#include "geofuse/app/grid.hpp"

#include "geofuse/core/draw.hpp"
#include "geofuse/core/error.hpp"
#include "geofuse/metrics/metrics.hpp"

namespace geofuse::app {

namespace {

Image upscale(const Image& img, int factor) {
  Image out(img.height * factor, img.width * factor, 3);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y / factor, x / factor, img.channels == 3 ? c : 0);
  return out;
}

triplane::RenderSettings tile_settings(int resolution, int samples) {
  triplane::RenderSettings rs;
  rs.resolution = resolution;
  rs.samples = samples;
  return rs;
}

}  // namespace

Image tile_grid(const std::vector<std::vector<Image>>& tiles, const std::vector<std::string>& column_labels,
                const std::vector<std::string>& row_labels) {
  if (tiles.empty() || tiles[0].empty()) throw ValidationError("grid needs at least one tile");
  const int res = tiles[0][0].height;
  GridLayout g{static_cast<int>(tiles.size()), static_cast<int>(tiles[0].size()), res * kGridUpscale};
  Image img(g.height(), g.width(), 3, 0.35f);
  draw::fill_rect(img, 0, 0, kGridHeader, img.width, {1, 1, 1});
  for (int c = 0; c < g.cols && c < static_cast<int>(column_labels.size()); ++c)
    draw::text(img, 2, g.tile_x(c) + 1, column_labels[c], {0, 0, 0});
  for (int r = 0; r < g.rows; ++r) {
    if (static_cast<int>(tiles[r].size()) != g.cols) throw ValidationError("grid rows differ in length");
    for (int c = 0; c < g.cols; ++c) {
      const Image& t = tiles[r][c];
      if (t.height != res || t.width != res) throw ValidationError("grid tiles differ in size");
      draw::blit(img, upscale(t, kGridUpscale), g.tile_y(r), g.tile_x(c));
    }
    if (r < static_cast<int>(row_labels.size())) {
      const int w = draw::text_width(row_labels[r]);
      draw::fill_rect(img, g.tile_y(r), g.tile_x(0), draw::kGlyphHeight + 2, w + 2, {0, 0, 0});
      draw::text(img, g.tile_y(r) + 1, g.tile_x(0) + 1, row_labels[r], {1, 1, 1});
    }
  }
  return img;
}

TilePair render_tiles(const refine::ReconstructionState<float>& state, const triplane::FieldMlp<float>& field,
                      const scenekit::CameraPose& camera, const triplane::RenderSettings& settings) {
  const auto out = triplane::render_view(state.triplane, field, camera, settings);
  const auto view = triplane::unpack_render(out.value(), settings.resolution, camera);
  return {view.rgb, metrics::encode_normals(view.normal, view.mask)};
}

Image grid_image(const std::vector<refine::ReconstructionState<float>>& states, const triplane::FieldMlp<float>& field,
                 const std::vector<scenekit::ViewRecord>& views, int samples) {
  if (states.empty()) throw ValidationError("grid needs at least one state");
  if (views.empty()) throw ValidationError("grid needs at least one view");
  const int res = views[0].resolution();
  const auto rs = tile_settings(res, samples);
  const int v = static_cast<int>(views.size());
  std::vector<std::string> cols{"INPUT"};
  for (int i = 0; i < v; ++i) cols.push_back("RGB" + std::to_string(i));
  for (int i = 0; i < v; ++i) cols.push_back("N" + std::to_string(i));
  std::vector<std::vector<Image>> tiles;
  std::vector<std::string> rows;
  for (const auto& st : states) {
    std::vector<Image> row(1 + 2 * v);
    row[0] = views[0].rgb;
    for (int i = 0; i < v; ++i) {
      auto t = render_tiles(st, field, views[i].camera, rs);
      row[1 + i] = std::move(t.rgb);
      row[1 + v + i] = std::move(t.normal);
    }
    tiles.push_back(std::move(row));
    rows.push_back("T" + std::to_string(st.step + 1));
  }
  return tile_grid(tiles, cols, rows);
}

void emit_grid(const std::vector<refine::ReconstructionState<float>>& states, const triplane::FieldMlp<float>& field,
               const std::vector<scenekit::ViewRecord>& views, int samples, const std::string& path) {
  write_png(path, grid_image(states, field, views, samples));
}

Image comparison_image(const Image& input, const refine::ReconstructionState<float>& baseline,
                       const refine::ReconstructionState<float>& refined, const triplane::FieldMlp<float>& field,
                       const std::vector<scenekit::ViewRecord>& views, int samples) {
  if (views.empty()) throw ValidationError("comparison needs at least one view");
  const auto rs = tile_settings(views[0].resolution(), samples);
  std::vector<std::vector<Image>> tiles;
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto b = render_tiles(baseline, field, views[i].camera, rs);
    auto r = render_tiles(refined, field, views[i].camera, rs);
    tiles.push_back({input, b.rgb, r.rgb, b.normal, r.normal});
    rows.push_back("V" + std::to_string(i));
  }
  return tile_grid(tiles, {"INPUT", "BASE", "REFINED", "BASE N", "REFINED N"}, rows);
}

}  // namespace geofuse::app
