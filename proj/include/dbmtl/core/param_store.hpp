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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dbmtl/core/rng.hpp"
#include "dbmtl/core/types.hpp"

namespace dbmtl::core {

// Named 64-bit tensors plus same-shape gradient buffers. Shapes are one- or
// two-dimensional; [n] is held as an n x 1 matrix. Iteration order is the
// lexicographic name order, which keeps serialization deterministic.
class ParamStore {
 public:
  struct Tensor {
    Shape shape;
    Matrix value;
    Matrix grad;
  };

  // Adds a zero-initialized tensor and returns its value matrix.
  Matrix& add(const std::string& name, const Shape& shape);

  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  const Tensor& at(const std::string& name) const;
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;

  void zero_grads();
  std::size_t tensor_count() const { return tensors_.size(); }
  Index total_size() const;
  std::vector<std::string> names() const;

  // Throws TrainingError naming the first non-finite tensor.
  void check_finite() const;

  std::map<std::string, Matrix> snapshot_values() const;
  void restore_values(const std::map<std::string, Matrix>& snapshot);

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
};

// Hidden-layer init: uniform in +-sqrt(6 / (fan_in + fan_out)).
void init_glorot(Matrix& w, Index fan_in, Index fan_out, Rng& rng);

// Adds "<prefix>.W" [in, out] and "<prefix>.b" [out]. Weights are Glorot
// unless zero_init is set (used for output heads so that an untrained head
// is exactly uninformative); biases are always zero.
void add_dense_layer(ParamStore& params, const std::string& prefix, Index in, Index out,
                     std::uint64_t seed, bool zero_init = false);

// Embedding table "<name>" of shape [vocab + 1, dim]; the extra final row is
// the out-of-vocabulary row.
void add_embedding(ParamStore& params, const std::string& name, Index vocab, Index dim,
                   std::uint64_t seed);

}  // namespace dbmtl::core
