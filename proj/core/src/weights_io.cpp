// Copyright 2026 The fer Authors.
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

#include "fer/weights_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "fer/error.hpp"

namespace fer {

namespace {

using nlohmann::json;

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw LoadError(std::string("weights file truncated in ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

json config_to_json(const ResNetConfig& c) {
  return {{"stage_filters", c.stage_filters},
          {"blocks_per_stage", c.blocks_per_stage},
          {"num_classes", c.num_classes},
          {"input_shape", {c.input_channels, c.input_height, c.input_width}},
          {"weight_decay", c.weight_decay}};
}

ResNetConfig config_from_json(const json& j) {
  ResNetConfig c;
  c.stage_filters = j.at("stage_filters").get<std::array<std::size_t, 4>>();
  c.blocks_per_stage =
      j.at("blocks_per_stage").get<std::array<std::size_t, 4>>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  const auto shape = j.at("input_shape").get<std::array<std::size_t, 3>>();
  c.input_channels = shape[0];
  c.input_height = shape[1];
  c.input_width = shape[2];
  c.weight_decay = j.at("weight_decay").get<double>();
  return c;
}

}  // namespace

void save_weights(const ResNet<float>& model, std::ostream& out) {
  const auto state = model.state();
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& nt : state) {
    tensors.push_back({{"layer", nt.layer},
                       {"role", nt.role},
                       {"shape", nt.tensor->shape()},
                       {"offset", offset}});
    offset += nt.tensor->size() * sizeof(float);
  }
  const std::string header =
      json{{"config", config_to_json(model.config())}, {"tensors", tensors}}
          .dump();

  out.write(kWeightsMagic, 4);
  put_le<std::uint32_t>(out, kWeightsVersion);
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& nt : state) {
    for (float v : nt.tensor->values()) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  if (!out) throw std::runtime_error("failed writing weights");
}

void save_weights(const ResNet<float>& model,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  save_weights(model, out);
}

ResNet<float> load_weights(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw LoadError("weights file truncated in magic");
  if (std::memcmp(magic, kWeightsMagic, 4) != 0) {
    throw LoadError("not a weights file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kWeightsVersion) {
    throw LoadError("unsupported weights version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(in, "header length");
  if (header_len > (1u << 26)) throw LoadError("implausible header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw LoadError("weights file truncated in header");
  }

  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw LoadError(std::string("weights header is not valid JSON: ") +
                    e.what());
  }

  ResNet<float> model;
  std::vector<json> entries;
  try {
    const ResNetConfig config = config_from_json(j.at("config"));
    Rng rng(0);
    model = ResNet<float>::build(config, rng);
    entries = j.at("tensors").get<std::vector<json>>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed weights header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw LoadError(std::string("bad config in weights header: ") + e.what());
  }

  auto state = model.state();
  if (entries.size() != state.size()) {
    throw LoadError("weights header lists " + std::to_string(entries.size()) +
                    " tensors, config builds " + std::to_string(state.size()));
  }
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& nt = state[i];
    const std::string where = nt.layer + "." + nt.role;
    try {
      const auto layer = entries[i].at("layer").get<std::string>();
      const auto role = entries[i].at("role").get<std::string>();
      const auto shape = entries[i].at("shape").get<Shape>();
      const auto off = entries[i].at("offset").get<std::uint64_t>();
      if (layer != nt.layer || role != nt.role) {
        throw LoadError("layer " + where + ": header has " + layer + "." +
                        role + " at this position");
      }
      if (shape != nt.tensor->shape()) {
        throw LoadError("layer " + where + ": shape " + shape_string(shape) +
                        " != expected " + shape_string(nt.tensor->shape()));
      }
      if (off != offset) {
        throw LoadError("layer " + where + ": offset " + std::to_string(off) +
                        " != expected " + std::to_string(offset));
      }
    } catch (const json::exception& e) {
      throw LoadError("layer " + where + ": " + e.what());
    }
    offset += nt.tensor->size() * sizeof(float);
  }
  for (const auto& nt : state) {
    for (float& v : nt.tensor->values()) {
      try {
        v = std::bit_cast<float>(get_le<std::uint32_t>(in, "payload"));
      } catch (const LoadError&) {
        throw LoadError("weights file truncated in payload of layer " +
                        nt.layer + "." + nt.role);
      }
    }
  }
  return model;
}

ResNet<float> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weights file " + path.string());
  return load_weights(in);
}

}  // namespace fer
