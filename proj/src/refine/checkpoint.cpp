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

#include "geofuse/refine/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "geofuse/core/error.hpp"
#include "geofuse/core/hash.hpp"

namespace geofuse::refine {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::string& path) {
  V v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw ValidationError("truncated checkpoint: " + path);
  return v;
}

const char* channels_name(const encoders::GeometryChannels& c) {
  if (c.normal && c.depth) return "both";
  return c.normal ? "normal" : "depth";
}

encoders::GeometryChannels channels_from(const std::string& s) {
  if (s == "both") return {true, true};
  if (s == "normal") return {true, false};
  if (s == "depth") return {false, true};
  throw ValidationError("unknown geometry_channels '" + s + "' (both, normal, depth)");
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + where + "." + it.key() + "'");
  }
}

template <typename V>
void read_key(const Json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("bad value for '" + where + "." + key + "'");
  }
}

}  // namespace

const ad::Mat<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : records)
    if (n == name) return &m;
  return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot write checkpoint " + tmp);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    const std::string header = ckpt.header.dump(2);
    put<std::uint64_t>(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.records.size()));
    for (const auto& [name, m] : ckpt.records) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(os, 2);
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
      os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    }
    if (!os) throw RuntimeFailure("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  const auto header_len = get<std::uint64_t>(is, path);
  if (header_len > (1u << 26)) throw ValidationError("corrupt checkpoint header length in " + path);
  std::string header(header_len, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(header_len)))
    throw ValidationError("truncated checkpoint: " + path);
  Checkpoint ckpt;
  try {
    ckpt.header = Json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    if (len > 4096) throw ValidationError("corrupt record name in " + path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ValidationError("truncated checkpoint: " + path);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank != 2) throw ValidationError("unsupported tensor rank in " + path);
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    if (rows * cols > (1ull << 28)) throw ValidationError("corrupt tensor shape in " + path);
    ad::Mat<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
      throw ValidationError("truncated checkpoint: " + path);
    ckpt.records.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

template <typename T>
std::string parameter_hash(const ParamList<T>& params) {
  Sha256 h;
  for (const auto& p : params) {
    h.update(p.name);
    const ad::Mat<float> v = p.var.value().template cast<float>();
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(v.rows()), static_cast<std::uint64_t>(v.cols())};
    h.update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(dims), sizeof(dims)));
    h.update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(float)));
  }
  return h.hex_digest();
}

template std::string parameter_hash<float>(const ParamList<float>&);
template std::string parameter_hash<double>(const ParamList<double>&);

Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["encoder"] = {{"image_size", c.encoder.image_size},
                  {"patch", c.encoder.patch},
                  {"dim", c.encoder.dim},
                  {"layers", c.encoder.layers},
                  {"heads", c.encoder.heads}};
  j["decoder"] = {{"resolution", c.decoder.resolution},
                  {"layers", c.decoder.layers},
                  {"heads", c.decoder.heads},
                  {"channels", c.decoder.channels},
                  {"field_hidden", c.decoder.field_hidden}};
  j["fuser_hidden"] = c.fuser_hidden;
  j["fusion"] = geofuser::to_string(c.fusion);
  j["geometry_channels"] = channels_name(c.geometry_channels);
  j["geoformer_random_init"] = c.geoformer_random_init;
  j["render_samples"] = c.render_samples;
  j["chunk_rays"] = c.chunk_rays;
  j["depth_scale"] = c.depth_scale;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  check_keys(j, {"encoder", "decoder", "fuser_hidden", "fusion", "geometry_channels", "geoformer_random_init",
                 "render_samples", "chunk_rays", "depth_scale"},
             "model");
  ModelConfig c;
  if (j.contains("encoder")) {
    const Json& e = j["encoder"];
    check_keys(e, {"image_size", "patch", "dim", "layers", "heads"}, "model.encoder");
    read_key(e, "image_size", c.encoder.image_size, "model.encoder");
    read_key(e, "patch", c.encoder.patch, "model.encoder");
    read_key(e, "dim", c.encoder.dim, "model.encoder");
    read_key(e, "layers", c.encoder.layers, "model.encoder");
    read_key(e, "heads", c.encoder.heads, "model.encoder");
  }
  if (j.contains("decoder")) {
    const Json& d = j["decoder"];
    check_keys(d, {"resolution", "layers", "heads", "channels", "field_hidden"}, "model.decoder");
    read_key(d, "resolution", c.decoder.resolution, "model.decoder");
    read_key(d, "layers", c.decoder.layers, "model.decoder");
    read_key(d, "heads", c.decoder.heads, "model.decoder");
    read_key(d, "channels", c.decoder.channels, "model.decoder");
    read_key(d, "field_hidden", c.decoder.field_hidden, "model.decoder");
  }
  c.decoder.dim = c.encoder.dim;
  read_key(j, "fuser_hidden", c.fuser_hidden, "model");
  std::string fusion = geofuser::to_string(c.fusion);
  read_key(j, "fusion", fusion, "model");
  c.fusion = geofuser::fusion_mode_from_string(fusion);
  std::string channels = channels_name(c.geometry_channels);
  read_key(j, "geometry_channels", channels, "model");
  c.geometry_channels = channels_from(channels);
  read_key(j, "geoformer_random_init", c.geoformer_random_init, "model");
  read_key(j, "render_samples", c.render_samples, "model");
  read_key(j, "chunk_rays", c.chunk_rays, "model");
  read_key(j, "depth_scale", c.depth_scale, "model");
  c.validate();
  return c;
}

void append_model(Checkpoint& ckpt, const Model<float>& model) {
  for (const auto& p : model.parameters()) ckpt.records.emplace_back(p.name, p.var.value());
}

void append_optimizer(Checkpoint& ckpt, const AdamW<float>& opt) {
  for (const auto& [name, mom] : opt.state()) {
    ckpt.records.emplace_back("adam.m/" + name, mom.m);
    ckpt.records.emplace_back("adam.v/" + name, mom.v);
  }
}

void load_model(const Checkpoint& ckpt, Model<float>& model) {
  for (const auto& p : model.parameters()) {
    const ad::Mat<float>* m = ckpt.find(p.name);
    if (!m) throw ValidationError("checkpoint lacks parameter '" + p.name + "'");
    if (m->rows() != p.var.rows() || m->cols() != p.var.cols())
      throw ValidationError("checkpoint parameter '" + p.name + "' has shape " + std::to_string(m->rows()) + "x" +
                            std::to_string(m->cols()) + ", model expects " + std::to_string(p.var.rows()) + "x" +
                            std::to_string(p.var.cols()));
    const_cast<ad::Var<float>&>(p.var).mutable_value() = *m;
  }
}

void load_optimizer(const Checkpoint& ckpt, AdamW<float>& opt) {
  opt.state().clear();
  for (const auto& [name, m] : ckpt.records) {
    if (name.rfind("adam.m/", 0) == 0) opt.state()[name.substr(7)].m = m;
    if (name.rfind("adam.v/", 0) == 0) opt.state()[name.substr(7)].v = m;
  }
  if (ckpt.header.contains("optimizer") && ckpt.header["optimizer"].contains("updates"))
    opt.set_updates(ckpt.header["optimizer"]["updates"].get<long>());
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.header.contains("model")) throw ValidationError("checkpoint header lacks the model config");
  const ModelConfig config = model_config_from_json(ckpt.header["model"]);
  Model<float> model = Model<float>::init_baseline(config, 0);
  if (ckpt.header.value("has_refiner", false)) model.attach_refiner(0);
  load_model(ckpt, model);
  return model;
}

}  // namespace geofuse::refine
