/*
 * Copyright (c) 2026, dbmtl-lab authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dbmtl/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dbmtl/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace dbmtl::core {

namespace {

constexpr int kFormatVersion = 1;

}  // namespace

void save_checkpoint(const ParamStore& params, const nlohmann::json& config,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = config;
  nlohmann::json tensors = nlohmann::json::array();

  std::ofstream bin(dir / "checkpoint.bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + (dir / "checkpoint.bin").string() + " for writing");
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.tensors()) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(t.value.size()) * sizeof(double);
    tensors.push_back({{"name", name},
                       {"shape", t.shape},
                       {"byte_offset", offset},
                       {"byte_len", bytes}});
    bin.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  manifest["tensors"] = std::move(tensors);
  bin.close();
  if (!bin) throw IoError("failed writing " + (dir / "checkpoint.bin").string());

  std::ofstream out(dir / "checkpoint.json");
  if (!out) throw IoError("cannot open " + (dir / "checkpoint.json").string() + " for writing");
  out << manifest.dump(2) << "\n";
}

nlohmann::json load_checkpoint(ParamStore& params, const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw IoError("cannot open " + (dir / "checkpoint.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }

  std::ifstream bin(dir / "checkpoint.bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + (dir / "checkpoint.bin").string());
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name");
    const Shape shape = entry.at("shape").get<Shape>();
    if (!params.contains(name)) {
      throw IoError("checkpoint tensor " + name + " is not present in the target store");
    }
    Matrix& value = params.value(name);
    if (shape_size(shape) != value.size()) {
      throw IoError("checkpoint tensor " + name + " has mismatching shape");
    }
    bin.seekg(static_cast<std::streamoff>(entry.at("byte_offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(value.data()),
             static_cast<std::streamsize>(entry.at("byte_len").get<std::uint64_t>()));
    if (!bin) throw IoError("failed reading values for tensor " + name);
  }
  return manifest.value("config", nlohmann::json::object());
}

}  // namespace dbmtl::core
