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

#pragma once

#include <filesystem>

#include <json.hpp>

#include "dbmtl/core/param_store.hpp"

namespace dbmtl::core {

// Checkpoint layout: a JSON manifest (checkpoint.json) listing tensors as
// {name, shape, byte_offset, byte_len} in name order, next to a sidecar
// binary (checkpoint.bin) of little-endian IEEE-754 doubles concatenated in
// manifest order, column-major within each tensor. The manifest also embeds
// an arbitrary config object for self-description.
void save_checkpoint(const ParamStore& params, const nlohmann::json& config,
                     const std::filesystem::path& dir);

// Loads values into an existing store; shapes must match. Returns the
// embedded config.
nlohmann::json load_checkpoint(ParamStore& params, const std::filesystem::path& dir);

}  // namespace dbmtl::core
