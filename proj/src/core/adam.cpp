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

#include "dbmtl/core/adam.hpp"

#include <cmath>

#include "dbmtl/errors.hpp"

namespace dbmtl::core {

AdamState::AdamState(const ParamStore& params, AdamConfig config) : cfg_(config) {
  for (const auto& [name, t] : params.tensors()) {
    m_.emplace(name, Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.emplace(name, Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

void AdamState::step(ParamStore& params) {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Scalar>(t_));
  for (auto& [name, tensor] : params.tensors()) {
    auto mi = m_.find(name);
    auto vi = v_.find(name);
    if (mi == m_.end() || vi == v_.end()) {
      throw ContractError("adam step: no state (and so no gradient contract) for tensor " + name);
    }
    const Matrix& g = tensor.grad;
    Matrix& m = mi->second;
    Matrix& v = vi->second;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    tensor.value.array() -=
        cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.epsilon);
  }
  params.check_finite();
}

}  // namespace dbmtl::core
