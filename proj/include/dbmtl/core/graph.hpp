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
#include <span>
#include <string>
#include <vector>

#include "dbmtl/core/param_store.hpp"
#include "dbmtl/core/rng.hpp"
#include "dbmtl/core/types.hpp"

namespace dbmtl::core {

enum class Mode { kTrain, kInfer };
enum class Activation { kIdentity, kRelu, kSigmoid };

struct NodeId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

// Reverse-mode tape over batch matrices (rows = samples). Nodes are appended
// in dependency order and forward values are computed at construction, so the
// tape is acyclic by construction and ready for a backward sweep at any time.
//
// recompute() re-runs the forward sweep against the current parameter values
// while keeping every stochastic choice (dropout masks, gather ids) frozen;
// finite-difference checks rely on this.
class Graph {
 public:
  explicit Graph(ParamStore* params = nullptr) : params_(params) {}

  NodeId constant(Matrix value);
  // Leaf bound to a store tensor; reads the value at evaluation time.
  NodeId param(const std::string& name);
  // x [B, in] * W [in, out] + b [out], bias broadcast across rows. The label
  // names the layer in dimension-mismatch errors.
  NodeId dense(NodeId x, NodeId weight, NodeId bias, const std::string& label = "dense");
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  // Horizontal concatenation; all inputs share the row count.
  NodeId concat(const std::vector<NodeId>& xs);
  // Inverted dropout: kept entries scaled by 1/(1-rate). Identity when the
  // rate is zero or the mode is kInfer.
  NodeId dropout(NodeId x, Scalar rate, Mode mode, Rng& rng);
  // Elementwise product.
  NodeId mul(NodeId a, NodeId b);
  // Rows of table [vocab + 1, dim] gathered by id; ids outside [0, vocab)
  // map to the reserved final row.
  NodeId embedding(NodeId table, std::vector<std::int32_t> ids);
  // Mean over entries of -[y log p + (1-y) log(1-p)], probabilities clamped
  // to [1e-12, 1 - 1e-12]; clamped entries are counted as saturations.
  NodeId bce_mean(NodeId prob, Matrix labels);
  // Mean over entries of (pred - label)^2.
  NodeId mse_mean(NodeId pred, Matrix labels);
  // l1 * sum|theta| + l2 * sum theta^2 over every tensor in the store.
  NodeId penalty(Scalar l1, Scalar l2);
  // Scalar combination sum_i coefs[i] * terms[i]; terms must be scalar nodes.
  NodeId weighted_sum(const std::vector<NodeId>& terms, const std::vector<Scalar>& coefs);

  const Matrix& value(NodeId id) const;
  Scalar scalar_value(NodeId id) const;
  Index node_count() const { return static_cast<Index>(nodes_.size()); }
  ParamStore* params() const { return params_; }

  // Re-runs the forward sweep in construction order.
  void recompute();

  // Accumulates d loss / d theta into the store gradients. The loss node
  // must be scalar and forward values must be current.
  void backward(NodeId loss);

  long saturation_count() const;

 private:
  enum class Op {
    kConstant,
    kParam,
    kDense,
    kRelu,
    kSigmoid,
    kConcat,
    kDropout,
    kMul,
    kEmbedding,
    kBceMean,
    kMseMean,
    kPenalty,
    kWeightedSum,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Matrix value;
    Matrix adjoint;
    std::string param_name;          // kParam
    std::string label;               // kDense
    std::vector<std::int32_t> ids;   // kEmbedding
    Matrix aux;                      // dropout mask / loss labels
    std::vector<Scalar> coefs;       // kWeightedSum; kPenalty holds {l1, l2}
    long saturations = 0;            // kBceMean
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void eval(Node& n);
  void require_params(const char* op) const;

  ParamStore* params_ = nullptr;
  std::vector<Node> nodes_;
};

struct MlpOptions {
  Activation hidden = Activation::kRelu;
  Activation final = Activation::kRelu;
  Scalar dropout = 0.0;
  Mode mode = Mode::kInfer;
  Rng* rng = nullptr;
};

// Chain of dense layers "<prefix>.<i>.{W,b}" with an activation per layer;
// the final layer uses opts.final (heads pass kIdentity and attach their own
// logistic). Dropout, when requested, follows each activated layer.
NodeId mlp_forward(Graph& graph, NodeId input, std::span<const Index> layer_sizes,
                   const std::string& prefix, const MlpOptions& opts = {});

// Allocates the tensors mlp_forward expects, Glorot weights and zero biases.
void add_mlp_params(ParamStore& params, const std::string& prefix, Index in,
                    std::span<const Index> layer_sizes, std::uint64_t seed);

}  // namespace dbmtl::core
