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

#include "dbmtl/core/graph.hpp"

#include <cmath>

#include "dbmtl/errors.hpp"

namespace dbmtl::core {

namespace {

constexpr Scalar kProbFloor = 1e-12;

Matrix sigmoid_matrix(const Matrix& x) {
  return x.unaryExpr([](Scalar v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

NodeId Graph::push(Node n) {
  eval(n);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Graph::Node& Graph::node(NodeId id) const {
  if (!id.valid() || id.index >= static_cast<std::int32_t>(nodes_.size())) {
    throw ContractError("invalid node id");
  }
  return nodes_[id.index];
}

void Graph::require_params(const char* op) const {
  if (params_ == nullptr) {
    throw ContractError(std::string(op) + " requires a graph bound to a ParamStore");
  }
}

const Matrix& Graph::value(NodeId id) const { return node(id).value; }

Scalar Graph::scalar_value(NodeId id) const {
  const Matrix& v = value(id);
  if (v.size() != 1) throw ContractError("node value is not scalar");
  return v(0, 0);
}

NodeId Graph::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

NodeId Graph::param(const std::string& name) {
  require_params("param");
  Node n;
  n.op = Op::kParam;
  n.param_name = name;
  return push(std::move(n));
}

NodeId Graph::dense(NodeId x, NodeId weight, NodeId bias, const std::string& label) {
  Node n;
  n.op = Op::kDense;
  n.inputs = {x, weight, bias};
  n.label = label;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.op = Op::kRelu;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw ContractError("concat needs at least one input");
  if (xs.size() == 1) return xs[0];
  Node n;
  n.op = Op::kConcat;
  n.inputs = xs;
  return push(std::move(n));
}

NodeId Graph::dropout(NodeId x, Scalar rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kInfer || rate == 0.0) return x;
  const Matrix& v = value(x);
  const Scalar keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      mask(i, j) = rng.uniform() >= rate ? keep_scale : 0.0;
    }
  }
  Node n;
  n.op = Op::kDropout;
  n.inputs = {x};
  n.aux = std::move(mask);
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::embedding(NodeId table, std::vector<std::int32_t> ids) {
  Node n;
  n.op = Op::kEmbedding;
  n.inputs = {table};
  n.ids = std::move(ids);
  return push(std::move(n));
}

NodeId Graph::bce_mean(NodeId prob, Matrix labels) {
  for (Index i = 0; i < labels.size(); ++i) {
    const Scalar y = labels.data()[i];
    if (y != 0.0 && y != 1.0) {
      throw DataError("binary label must be 0 or 1, got " + std::to_string(y));
    }
  }
  Node n;
  n.op = Op::kBceMean;
  n.inputs = {prob};
  n.aux = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::mse_mean(NodeId pred, Matrix labels) {
  Node n;
  n.op = Op::kMseMean;
  n.inputs = {pred};
  n.aux = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::penalty(Scalar l1, Scalar l2) {
  require_params("penalty");
  if (l1 < 0.0 || l2 < 0.0) throw ConfigError("penalty coefficients must be nonnegative");
  Node n;
  n.op = Op::kPenalty;
  n.coefs = {l1, l2};
  return push(std::move(n));
}

NodeId Graph::weighted_sum(const std::vector<NodeId>& terms, const std::vector<Scalar>& coefs) {
  if (terms.size() != coefs.size()) throw ContractError("weighted_sum: terms/coefs size mismatch");
  if (terms.empty()) throw ContractError("weighted_sum needs at least one term");
  Node n;
  n.op = Op::kWeightedSum;
  n.inputs = terms;
  n.coefs = coefs;
  return push(std::move(n));
}

void Graph::eval(Node& n) {
  auto in = [&](std::size_t i) -> const Matrix& { return nodes_[n.inputs[i].index].value; };
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kParam:
      n.value = params_->value(n.param_name);
      break;
    case Op::kDense: {
      const Matrix& x = in(0);
      const Matrix& w = in(1);
      const Matrix& b = in(2);
      if (x.cols() != w.rows()) {
        throw ConfigError("layer " + n.label + ": input width " + std::to_string(x.cols()) +
                          " does not match weight rows " + std::to_string(w.rows()));
      }
      if (b.rows() != w.cols() || b.cols() != 1) {
        throw ConfigError("layer " + n.label + ": bias length " + std::to_string(b.size()) +
                          " does not match output width " + std::to_string(w.cols()));
      }
      n.value = x * w;
      n.value.rowwise() += b.col(0).transpose();
      break;
    }
    case Op::kRelu:
      n.value = in(0).cwiseMax(0.0);
      break;
    case Op::kSigmoid:
      n.value = sigmoid_matrix(in(0));
      break;
    case Op::kConcat: {
      const Index rows = in(0).rows();
      Index cols = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        if (in(i).rows() != rows) throw ContractError("concat inputs disagree on row count");
        cols += in(i).cols();
      }
      n.value.resize(rows, cols);
      Index at = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        n.value.middleCols(at, in(i).cols()) = in(i);
        at += in(i).cols();
      }
      break;
    }
    case Op::kDropout:
      n.value = in(0).cwiseProduct(n.aux);
      break;
    case Op::kMul:
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols()) {
        throw ContractError("mul inputs disagree on shape");
      }
      n.value = in(0).cwiseProduct(in(1));
      break;
    case Op::kEmbedding: {
      const Matrix& table = in(0);
      const Index oov = table.rows() - 1;
      n.value.resize(static_cast<Index>(n.ids.size()), table.cols());
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        Index row = n.ids[r];
        if (row < 0 || row >= oov) row = oov;
        n.value.row(static_cast<Index>(r)) = table.row(row);
      }
      break;
    }
    case Op::kBceMean: {
      const Matrix& p = in(0);
      const Matrix& y = n.aux;
      if (p.rows() != y.rows() || p.cols() != y.cols()) {
        throw ContractError("bce_mean: prediction/label shape mismatch");
      }
      n.saturations = 0;
      Scalar acc = 0.0;
      for (Index i = 0; i < p.size(); ++i) {
        Scalar pi = p.data()[i];
        if (pi < kProbFloor || pi > 1.0 - kProbFloor) {
          ++n.saturations;
          pi = std::min(std::max(pi, kProbFloor), 1.0 - kProbFloor);
        }
        const Scalar yi = y.data()[i];
        acc -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
      }
      n.value = Matrix::Constant(1, 1, acc / static_cast<Scalar>(p.size()));
      break;
    }
    case Op::kMseMean: {
      const Matrix& p = in(0);
      const Matrix& y = n.aux;
      if (p.rows() != y.rows() || p.cols() != y.cols()) {
        throw ContractError("mse_mean: prediction/label shape mismatch");
      }
      n.value = Matrix::Constant(1, 1, (p - y).squaredNorm() / static_cast<Scalar>(p.size()));
      break;
    }
    case Op::kPenalty: {
      Scalar acc = 0.0;
      const Scalar l1 = n.coefs[0];
      const Scalar l2 = n.coefs[1];
      for (const auto& [name, t] : params_->tensors()) {
        if (l1 != 0.0) acc += l1 * t.value.cwiseAbs().sum();
        if (l2 != 0.0) acc += l2 * t.value.squaredNorm();
      }
      n.value = Matrix::Constant(1, 1, acc);
      break;
    }
    case Op::kWeightedSum: {
      Scalar acc = 0.0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        if (in(i).size() != 1) throw ContractError("weighted_sum term is not scalar");
        acc += n.coefs[i] * in(i)(0, 0);
      }
      n.value = Matrix::Constant(1, 1, acc);
      break;
    }
  }
}

void Graph::recompute() {
  for (Node& n : nodes_) eval(n);
}

void Graph::backward(NodeId loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) throw ContractError("backward: loss node must be scalar");
  for (Node& n : nodes_) n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.index].adjoint(0, 0) = 1.0;

  for (std::int32_t idx = loss.index; idx >= 0; --idx) {
    Node& n = nodes_[idx];
    if (n.adjoint.isZero(0.0)) continue;
    auto in_val = [&](std::size_t i) -> const Matrix& { return nodes_[n.inputs[i].index].value; };
    auto in_adj = [&](std::size_t i) -> Matrix& { return nodes_[n.inputs[i].index].adjoint; };
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam:
        params_->grad(n.param_name) += n.adjoint;
        break;
      case Op::kDense: {
        const Matrix& x = in_val(0);
        const Matrix& w = in_val(1);
        in_adj(0) += n.adjoint * w.transpose();
        in_adj(1) += x.transpose() * n.adjoint;
        in_adj(2) += n.adjoint.colwise().sum().transpose();
        break;
      }
      case Op::kRelu:
        in_adj(0) += n.adjoint.cwiseProduct(
            in_val(0).unaryExpr([](Scalar v) { return v > 0.0 ? 1.0 : 0.0; }));
        break;
      case Op::kSigmoid:
        in_adj(0) += n.adjoint.cwiseProduct(
            n.value.cwiseProduct(Matrix::Ones(n.value.rows(), n.value.cols()) - n.value));
        break;
      case Op::kConcat: {
        Index at = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const Index w = in_val(i).cols();
          in_adj(i) += n.adjoint.middleCols(at, w);
          at += w;
        }
        break;
      }
      case Op::kDropout:
        in_adj(0) += n.adjoint.cwiseProduct(n.aux);
        break;
      case Op::kMul:
        in_adj(0) += n.adjoint.cwiseProduct(in_val(1));
        in_adj(1) += n.adjoint.cwiseProduct(in_val(0));
        break;
      case Op::kEmbedding: {
        Matrix& table_adj = in_adj(0);
        const Index oov = in_val(0).rows() - 1;
        for (std::size_t r = 0; r < n.ids.size(); ++r) {
          Index row = n.ids[r];
          if (row < 0 || row >= oov) row = oov;
          table_adj.row(row) += n.adjoint.row(static_cast<Index>(r));
        }
        break;
      }
      case Op::kBceMean: {
        const Matrix& p = in_val(0);
        const Matrix& y = n.aux;
        const Scalar scale = n.adjoint(0, 0) / static_cast<Scalar>(p.size());
        Matrix& dp = in_adj(0);
        for (Index i = 0; i < p.size(); ++i) {
          const Scalar pi = p.data()[i];
          if (pi < kProbFloor || pi > 1.0 - kProbFloor) continue;  // clamped: flat
          dp.data()[i] += scale * (pi - y.data()[i]) / (pi * (1.0 - pi));
        }
        break;
      }
      case Op::kMseMean: {
        const Matrix& p = in_val(0);
        const Scalar scale = 2.0 * n.adjoint(0, 0) / static_cast<Scalar>(p.size());
        in_adj(0) += scale * (p - n.aux);
        break;
      }
      case Op::kPenalty: {
        const Scalar a = n.adjoint(0, 0);
        const Scalar l1 = n.coefs[0];
        const Scalar l2 = n.coefs[1];
        for (auto& [name, t] : params_->tensors()) {
          if (l1 != 0.0) {
            t.grad += a * l1 *
                      t.value.unaryExpr([](Scalar v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
          }
          if (l2 != 0.0) t.grad += a * 2.0 * l2 * t.value;
        }
        break;
      }
      case Op::kWeightedSum:
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          in_adj(i)(0, 0) += n.adjoint(0, 0) * n.coefs[i];
        }
        break;
    }
  }
}

long Graph::saturation_count() const {
  long total = 0;
  for (const Node& n : nodes_) total += n.saturations;
  return total;
}

NodeId mlp_forward(Graph& graph, NodeId input, std::span<const Index> layer_sizes,
                   const std::string& prefix, const MlpOptions& opts) {
  if (layer_sizes.empty()) throw ConfigError("mlp " + prefix + ": layer_sizes must be nonempty");
  NodeId x = input;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    const std::string layer = prefix + "." + std::to_string(i);
    NodeId w = graph.param(layer + ".W");
    NodeId b = graph.param(layer + ".b");
    x = graph.dense(x, w, b, layer);
    const Activation act = (i + 1 == layer_sizes.size()) ? opts.final : opts.hidden;
    if (act == Activation::kRelu) x = graph.relu(x);
    if (act == Activation::kSigmoid) x = graph.sigmoid(x);
    if (opts.dropout > 0.0 && opts.mode == Mode::kTrain) {
      if (opts.rng == nullptr) throw ContractError("mlp dropout in train mode needs an rng");
      x = graph.dropout(x, opts.dropout, opts.mode, *opts.rng);
    }
  }
  return x;
}

void add_mlp_params(ParamStore& params, const std::string& prefix, Index in,
                    std::span<const Index> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.empty()) throw ConfigError("mlp " + prefix + ": layer_sizes must be nonempty");
  Index width = in;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] < 1) throw ConfigError("mlp " + prefix + ": layer sizes must be >= 1");
    add_dense_layer(params, prefix + "." + std::to_string(i), width, layer_sizes[i], seed);
    width = layer_sizes[i];
  }
}

}  // namespace dbmtl::core
