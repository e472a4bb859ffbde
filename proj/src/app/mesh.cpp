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

#include "geofuse/app/mesh.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <map>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::app {

std::vector<double> field_density(const triplane::Triplane<float>& tp, const triplane::FieldMlp<float>& field,
                                  const std::vector<Eigen::Vector3d>& points) {
  constexpr std::size_t kChunk = 8192;
  const triplane::Triplane<float> frozen{ad::detach(tp.planes), tp.resolution, tp.channels};
  const triplane::FieldMlp<float> f{ad::detach(field.w1), ad::detach(field.b1), ad::detach(field.w2),
                                    ad::detach(field.b2), ad::detach(field.w3), ad::detach(field.b3)};
  std::vector<double> out(points.size());
  for (std::size_t begin = 0; begin < points.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, points.size() - begin);
    ad::Mat<float> pts(n, 3);
    for (std::size_t i = 0; i < n; ++i) pts.row(i) = points[begin + i].cast<float>().transpose();
    const auto raw = triplane::field_raw(triplane::sample_triplane(frozen.planes, frozen.resolution, ad::constant(pts)), f);
    const auto sigma = ad::softplus(ad::slice_cols(raw, 0, 1));
    for (std::size_t i = 0; i < n; ++i) out[begin + i] = sigma.value()(i, 0);
  }
  return out;
}

namespace {

// Cube corners as (dx, dy, dz) bits, and the six tetrahedra around 0-7.
constexpr std::array<std::array<int, 3>, 8> kCorner{{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                                    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};
constexpr std::array<std::array<int, 4>, 6> kTets{
    {{0, 6, 1, 2}, {0, 6, 2, 3}, {0, 6, 3, 7}, {0, 6, 7, 4}, {0, 6, 4, 5}, {0, 6, 5, 1}}};

}  // namespace

Mesh extract_mesh(const triplane::Triplane<float>& tp, const triplane::FieldMlp<float>& field, int grid, double level,
                  int bisection_steps) {
  if (grid < 2) throw ValidationError("mesh grid must be >= 2");
  if (!(level > 0)) throw ValidationError("mesh level must be positive");
  const int n = grid;
  auto node_index = [n](int x, int y, int z) { return (static_cast<long>(z) * n + y) * n + x; };
  auto node_pos = [n](int x, int y, int z) {
    return Eigen::Vector3d(-1.0 + 2.0 * x / (n - 1), -1.0 + 2.0 * y / (n - 1), -1.0 + 2.0 * z / (n - 1));
  };
  std::vector<Eigen::Vector3d> nodes;
  nodes.reserve(static_cast<std::size_t>(n) * n * n);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) nodes.push_back(node_pos(x, y, z));
  const std::vector<double> rho = field_density(tp, field, nodes);

  Mesh mesh;
  std::map<std::pair<long, long>, int> edge_vertex;
  std::vector<std::pair<long, long>> vertex_edge;  // (inside node, outside node)
  auto vertex_on = [&](long a, long b) {
    // a inside (rho >= level), b outside
    const auto key = std::minmax(a, b);
    const auto it = edge_vertex.find({key.first, key.second});
    if (it != edge_vertex.end()) return it->second;
    const double t = (rho[a] - level) / (rho[a] - rho[b]);
    mesh.vertices.push_back(nodes[a] + t * (nodes[b] - nodes[a]));
    vertex_edge.emplace_back(a, b);
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    edge_vertex[{key.first, key.second}] = id;
    return id;
  };
  auto emit = [&](int i0, int i1, int i2, const Eigen::Vector3d& outward) {
    const Eigen::Vector3d nrm = (mesh.vertices[i1] - mesh.vertices[i0]).cross(mesh.vertices[i2] - mesh.vertices[i0]);
    if (nrm.dot(outward) < 0) std::swap(i1, i2);
    mesh.faces.emplace_back(i0, i1, i2);
  };

  for (int z = 0; z + 1 < n; ++z)
    for (int y = 0; y + 1 < n; ++y)
      for (int x = 0; x + 1 < n; ++x) {
        long corner[8];
        for (int c = 0; c < 8; ++c) corner[c] = node_index(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]);
        for (const auto& tet : kTets) {
          std::vector<long> in, out;
          for (int v : tet) (rho[corner[v]] >= level ? in : out).push_back(corner[v]);
          if (in.empty() || out.empty()) continue;
          Eigen::Vector3d c_in = Eigen::Vector3d::Zero(), c_out = Eigen::Vector3d::Zero();
          for (long v : in) c_in += nodes[v] / static_cast<double>(in.size());
          for (long v : out) c_out += nodes[v] / static_cast<double>(out.size());
          const Eigen::Vector3d outward = c_out - c_in;
          if (in.size() == 1) {
            emit(vertex_on(in[0], out[0]), vertex_on(in[0], out[1]), vertex_on(in[0], out[2]), outward);
          } else if (in.size() == 3) {
            emit(vertex_on(in[0], out[0]), vertex_on(in[1], out[0]), vertex_on(in[2], out[0]), outward);
          } else {
            const int a = vertex_on(in[0], out[0]), b = vertex_on(in[0], out[1]);
            const int c = vertex_on(in[1], out[1]), d = vertex_on(in[1], out[0]);
            emit(a, b, c, outward);
            emit(a, c, d, outward);
          }
        }
      }

  // Bisection along each crossing edge, all vertices per batch.
  std::vector<double> lo(mesh.vertices.size(), 0.0), hi(mesh.vertices.size(), 1.0);
  for (int it = 0; it < bisection_steps && !mesh.vertices.empty(); ++it) {
    std::vector<Eigen::Vector3d> mid(mesh.vertices.size());
    for (std::size_t v = 0; v < mid.size(); ++v) {
      const auto [a, b] = vertex_edge[v];
      mid[v] = nodes[a] + 0.5 * (lo[v] + hi[v]) * (nodes[b] - nodes[a]);
    }
    const std::vector<double> r = field_density(tp, field, mid);
    for (std::size_t v = 0; v < mid.size(); ++v) (r[v] >= level ? lo[v] : hi[v]) = 0.5 * (lo[v] + hi[v]);
  }
  if (bisection_steps > 0)
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      const auto [a, b] = vertex_edge[v];
      mesh.vertices[v] = nodes[a] + 0.5 * (lo[v] + hi[v]) * (nodes[b] - nodes[a]);
    }
  return mesh;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write " + path);
    char buf[96];
    for (const auto& v : mesh.vertices) {
      std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
      out << buf;
    }
    for (const auto& f : mesh.faces) out << "f " << f.x() + 1 << ' ' << f.y() + 1 << ' ' << f.z() + 1 << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeFailure("cannot write " + path);
}

}  // namespace geofuse::app
