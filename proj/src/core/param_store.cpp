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

#include "dbmtl/core/param_store.hpp"

#include <cmath>

#include "dbmtl/errors.hpp"

namespace dbmtl::core {

namespace {

std::pair<Index, Index> matrix_dims(const Shape& shape) {
  if (shape.size() == 1) return {shape[0], 1};
  if (shape.size() == 2) return {shape[0], shape[1]};
  throw ConfigError("tensor shapes must have rank 1 or 2, got rank " +
                    std::to_string(shape.size()));
}

}  // namespace

Matrix& ParamStore::add(const std::string& name, const Shape& shape) {
  if (name.empty()) throw ConfigError("tensor name must not be empty");
  if (contains(name)) throw ConfigError("duplicate tensor name: " + name);
  auto [rows, cols] = matrix_dims(shape);
  if (rows < 1 || cols < 1) throw ConfigError("tensor " + name + " has a non-positive dimension");
  Tensor t;
  t.shape = shape;
  t.value = Matrix::Zero(rows, cols);
  t.grad = Matrix::Zero(rows, cols);
  auto [it, ok] = tensors_.emplace(name, std::move(t));
  (void)ok;
  return it->second.value;
}

const ParamStore::Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown tensor: " + name);
  return it->second;
}

Matrix& ParamStore::value(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown tensor: " + name);
  return it->second.value;
}

const Matrix& ParamStore::value(const std::string& name) const { return at(name).value; }

Matrix& ParamStore::grad(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown tensor: " + name);
  return it->second.grad;
}

const Matrix& ParamStore::grad(const std::string& name) const { return at(name).grad; }

void ParamStore::zero_grads() {
  for (auto& [name, t] : tensors_) t.grad.setZero();
}

Index ParamStore::total_size() const {
  Index n = 0;
  for (const auto& [name, t] : tensors_) n += t.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

void ParamStore::check_finite() const {
  for (const auto& [name, t] : tensors_) {
    if (!t.value.allFinite()) throw TrainingError("non-finite values in tensor " + name);
  }
}

std::map<std::string, Matrix> ParamStore::snapshot_values() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, t] : tensors_) out.emplace(name, t.value);
  return out;
}

void ParamStore::restore_values(const std::map<std::string, Matrix>& snapshot) {
  for (auto& [name, t] : tensors_) {
    auto it = snapshot.find(name);
    if (it == snapshot.end()) throw ContractError("snapshot is missing tensor " + name);
    t.value = it->second;
  }
}

void init_glorot(Matrix& w, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) {
      w(i, j) = rng.uniform(-bound, bound);
    }
  }
}

void add_dense_layer(ParamStore& params, const std::string& prefix, Index in, Index out,
                     std::uint64_t seed, bool zero_init) {
  Matrix& w = params.add(prefix + ".W", {in, out});
  params.add(prefix + ".b", {out});
  if (!zero_init) {
    Rng rng(derive_seed(seed, prefix + ".W"));
    init_glorot(w, in, out, rng);
  }
}

void add_embedding(ParamStore& params, const std::string& name, Index vocab, Index dim,
                   std::uint64_t seed) {
  Matrix& table = params.add(name, {vocab + 1, dim});
  Rng rng(derive_seed(seed, name));
  init_glorot(table, vocab + 1, dim, rng);
}

}  // namespace dbmtl::core
