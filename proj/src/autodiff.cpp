// SPDX-FileCopyrightText: Copyright (c) 2026 The minifp Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "minifp/autodiff.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "minifp/error.h"
#include "minifp/rng.h"

namespace minifp {

// ---------------------------------------------------------------------------
// ParameterSet
// ---------------------------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    throw Error(ErrorCode::InvalidConfig, "duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, params_.size());
  Tensor grad(init.rows(), init.cols());
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
  return params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterSet::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter& ParameterSet::at(std::string_view name) {
  Parameter* p = find(name);
  if (p == nullptr) {
    throw Error(ErrorCode::InvalidConfig, "no parameter named '" + std::string(name) + "'");
  }
  return *p;
}

std::size_t ParameterSet::elementCount() const noexcept {
  std::size_t total = 0;
  for (const Parameter& p : params_) {
    total += p.value.size();
  }
  return total;
}

void ParameterSet::zeroGrad() {
  for (Parameter& p : params_) {
    p.grad = Tensor(p.value.rows(), p.value.cols());
  }
}

std::uint64_t ParameterSet::checksum() const noexcept {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (const Parameter& p : params_) {
    for (const double v : p.value.values()) {
      h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const Tensor& Var::value() const {
  return tape_->valueOf(id_);
}

const Tensor& Var::grad() const {
  return tape_->gradOf(id_);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& param) {
  if (!param.grad.sameShape(param.value)) {
    param.grad = Tensor(param.value.rows(), param.value.cols());
  }
  Node node;
  node.value     = param.value;
  node.needsGrad = true;
  node.param     = &param;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) {
      throw Error(ErrorCode::InvalidConfig, "operands recorded on different tapes");
    }
    node.needsGrad = node.needsGrad || nodes_[in.id()].needsGrad;
  }
  if (node.needsGrad) {
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::gradBuffer(int id) {
  Node& node = nodes_[id];
  if (!node.hasGrad) {
    node.grad    = Tensor(node.value.rows(), node.value.cols());
    node.hasGrad = true;
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) {
    throw Error(ErrorCode::InvalidConfig, "loss recorded on a different tape");
  }
  if (loss.value().size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "loss must be scalar, got " + loss.value().shapeString());
  }
  if (!nodes_[loss.id()].needsGrad) {
    throw Error(ErrorCode::DisconnectedGraph, "loss does not depend on any parameter");
  }
  for (Node& node : nodes_) {
    node.hasGrad = false;
    node.grad    = Tensor();
  }
  gradBuffer(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needsGrad || !node.hasGrad) {
      continue;
    }
    if (node.backward) {
      node.backward(*this, id);
    }
    if (node.param != nullptr) {
      node.param->grad.addInPlace(nodes_[id].grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace ad {

namespace {

[[noreturn]] void shapeError(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + a.shapeString() + " vs " + b.shapeString());
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcastKind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.sameShape(b)) {
    return Broadcast::Same;
  }
  if (b.rows() == 1 && b.cols() == 1) {
    return Broadcast::Scalar;
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    return Broadcast::Row;
  }
  shapeError(op, a, b);
}

std::size_t bIndex(Broadcast kind, std::size_t r, std::size_t c, std::size_t cols) {
  switch (kind) {
    case Broadcast::Same:   return r * cols + c;
    case Broadcast::Row:    return c;
    case Broadcast::Scalar: return 0;
  }
  return 0;
}

void checkIds(std::span<const int> ids, std::size_t rows, std::size_t limit, const char* op) {
  if (ids.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::to_string(ids.size()) + " ids for " +
                                              std::to_string(rows) + " rows");
  }
  for (const int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= limit) {
      throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": index " + std::to_string(id) + " out of range " +
                                                std::to_string(limit));
    }
  }
}

std::vector<std::vector<int>> bucketRows(std::span<const int> ids, std::size_t numSegments) {
  std::vector<std::vector<int>> members(numSegments);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    members[ids[r]].push_back(static_cast<int>(r));
  }
  return members;
}

Tensor presentMask(const char* op, const Tensor& values, const Tensor& target, const Tensor& mask) {
  if (!values.sameShape(target)) {
    shapeError(op, values, target);
  }
  if (!values.sameShape(mask)) {
    shapeError(op, values, mask);
  }
  return mask;
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    shapeError("matmul", A, B);
  }
  const std::size_t n = A.rows();
  const std::size_t k = A.cols();
  const std::size_t m = B.cols();
  Tensor            C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* out = C.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A(i, p);
      if (av == 0.0) {
        continue;
      }
      const double* brow = B.row(p).data();
      for (std::size_t j = 0; j < m; ++j) {
        out[j] += av * brow[j];
      }
    }
  }
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->record(std::move(C), {a, b}, [ia, ib, n, k, m](Tape& t, int self) {
    const Tensor& G = t.gradOf(self);
    if (t.needsGrad(ia)) {
      const Tensor& Bv = t.valueOf(ib);
      Tensor&       dA = t.gradBuffer(ia);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double        acc  = 0.0;
          const double* grow = G.row(i).data();
          const double* brow = Bv.row(p).data();
          for (std::size_t j = 0; j < m; ++j) {
            acc += grow[j] * brow[j];
          }
          dA(i, p) += acc;
        }
      }
    }
    if (t.needsGrad(ib)) {
      const Tensor& Av = t.valueOf(ia);
      Tensor&       dB = t.gradBuffer(ib);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av(i, p);
          if (av == 0.0) {
            continue;
          }
          double* drow = dB.row(p).data();
          for (std::size_t j = 0; j < m; ++j) {
            drow[j] += av * grow[j];
          }
        }
      }
    }
  });
}

namespace {

Var addOrSub(Var a, Var b, double sign, const char* op) {
  const Tensor&   A    = a.value();
  const Tensor&   B    = b.value();
  const Broadcast kind = broadcastKind(op, A, B);
  Tensor          out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) {
      out(r, c) = A(r, c) + sign * B[bIndex(kind, r, c, A.cols())];
    }
  }
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, kind, sign](Tape& t, int self) {
    const Tensor& G = t.gradOf(self);
    if (t.needsGrad(ia)) {
      t.gradBuffer(ia).addInPlace(G);
    }
    if (t.needsGrad(ib)) {
      Tensor& dB = t.gradBuffer(ib);
      for (std::size_t r = 0; r < G.rows(); ++r) {
        for (std::size_t c = 0; c < G.cols(); ++c) {
          dB[bIndex(kind, r, c, G.cols())] += sign * G(r, c);
        }
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return addOrSub(a, b, 1.0, "add");
}

Var sub(Var a, Var b) {
  if (!a.value().sameShape(b.value())) {
    shapeError("sub", a.value(), b.value());
  }
  return addOrSub(a, b, -1.0, "sub");
}

Var mul(Var a, Var b) {
  const Tensor&   A    = a.value();
  const Tensor&   B    = b.value();
  const Broadcast kind = broadcastKind("mul", A, B);
  Tensor          out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) {
      out(r, c) = A(r, c) * B[bIndex(kind, r, c, A.cols())];
    }
  }
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, kind](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    const Tensor& Av = t.valueOf(ia);
    const Tensor& Bv = t.valueOf(ib);
    if (t.needsGrad(ia)) {
      Tensor& dA = t.gradBuffer(ia);
      for (std::size_t r = 0; r < G.rows(); ++r) {
        for (std::size_t c = 0; c < G.cols(); ++c) {
          dA(r, c) += G(r, c) * Bv[bIndex(kind, r, c, G.cols())];
        }
      }
    }
    if (t.needsGrad(ib)) {
      Tensor& dB = t.gradBuffer(ib);
      for (std::size_t r = 0; r < G.rows(); ++r) {
        for (std::size_t c = 0; c < G.cols(); ++c) {
          dB[bIndex(kind, r, c, G.cols())] += G(r, c) * Av(r, c);
        }
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    v *= factor;
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, factor](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dA[i] += factor * G[i];
    }
  });
}

Var scaleRows(Var a, std::span<const double> factors) {
  const Tensor& X = a.value();
  if (factors.size() != X.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "scaleRows: " + std::to_string(factors.size()) + " factors for " +
                                              X.shapeString());
  }
  Tensor out = X;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (double& v : out.row(r)) {
      v *= factors[r];
    }
  }
  const int           ia = a.id();
  std::vector<double> f(factors.begin(), factors.end());
  return a.tape()->record(std::move(out), {a}, [ia, f = std::move(f)](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dA(r, c) += f[r] * G(r, c);
      }
    }
  });
}

Var addScalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    v += offset;
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) { t.gradBuffer(ia).addInPlace(t.gradOf(self)); });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "concat of zero tensors");
  }
  if (axis != 0 && axis != 1) {
    throw Error(ErrorCode::ShapeMismatch, "concat axis must be 0 or 1");
  }
  const Tensor&            first = parts.front().value();
  std::size_t              rows  = 0;
  std::size_t              cols  = 0;
  std::vector<std::size_t> offsets;
  for (const Var& part : parts) {
    const Tensor& v = part.value();
    if (axis == 0) {
      if (v.cols() != first.cols()) {
        shapeError("concat(axis=0)", first, v);
      }
      offsets.push_back(rows);
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows()) {
        shapeError("concat(axis=1)", first, v);
      }
      offsets.push_back(cols);
      cols += v.cols();
      rows = v.rows();
    }
  }
  Tensor out(rows, cols);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 0) {
          out(offsets[p] + r, c) = v(r, c);
        } else {
          out(r, offsets[p] + c) = v(r, c);
        }
      }
    }
  }
  std::vector<int> ids;
  for (const Var& part : parts) {
    ids.push_back(part.id());
  }
  return parts.front().tape()->record(std::move(out), parts, [ids, offsets, axis](Tape& t, int self) {
    const Tensor& G = t.gradOf(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!t.needsGrad(ids[p])) {
        continue;
      }
      Tensor& d = t.gradBuffer(ids[p]);
      for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t c = 0; c < d.cols(); ++c) {
          d(r, c) += axis == 0 ? G(offsets[p] + r, c) : G(r, offsets[p] + c);
        }
      }
    }
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    v = v > 0.0 ? v : 0.0;
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    const Tensor& X  = t.valueOf(ia);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      if (X[i] > 0.0) {
        dA[i] += G[i];
      }
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    const Tensor& Y  = t.valueOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dA[i] += G[i] * Y[i] * (1.0 - Y[i]);
    }
  });
}

Var dropout(Var a, double rate) {
  Tape& tape = *a.tape();
  if (!tape.training() || rate <= 0.0) {
    return a;
  }
  if (rate >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must be < 1");
  }
  const std::uint64_t key   = mix64(tape.seed() ^ mix64(tape.nextOpInstance() ^ mix64(tape.step() + 0x51ED27ULL)));
  const double        keep  = 1.0 - rate;
  Tensor              mask  = a.value();
  Tensor              out   = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = toUnit(mix64(key + i)) < keep ? 1.0 / keep : 0.0;
    out[i] *= mask[i];
  }
  const int ia = a.id();
  return tape.record(std::move(out), {a}, [ia, mask = std::move(mask)](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dA[i] += G[i] * mask[i];
    }
  });
}

namespace {

//! Normalizes groups of entries (rows when byRow, else columns) to zero mean / unit variance.
Var normalizeGroups(Var a, double eps, bool byRow, Tensor* meanOut, Tensor* varOut) {
  const Tensor&     X      = a.value();
  const std::size_t groups = byRow ? X.rows() : X.cols();
  const std::size_t len    = byRow ? X.cols() : X.rows();
  if (len == 0) {
    throw Error(ErrorCode::ShapeMismatch, "normalization over an empty axis");
  }
  auto at = [&](std::size_t g, std::size_t k) { return byRow ? g * X.cols() + k : k * X.cols() + g; };
  Tensor out(X.rows(), X.cols());
  Tensor invStd(1, groups);
  Tensor means(1, groups);
  Tensor vars(1, groups);
  for (std::size_t g = 0; g < groups; ++g) {
    double mean = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      mean += X[at(g, k)];
    }
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double d = X[at(g, k)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(len);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < len; ++k) {
      out[at(g, k)] = (X[at(g, k)] - mean) * inv;
    }
    invStd[g] = inv;
    means[g]  = mean;
    vars[g]   = var;
  }
  if (meanOut != nullptr) {
    *meanOut = means;
  }
  if (varOut != nullptr) {
    *varOut = vars;
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, invStd, byRow, groups, len](Tape& t, int self) {
    const Tensor& G    = t.gradOf(self);
    const Tensor& Xhat = t.valueOf(self);
    Tensor&       dA   = t.gradBuffer(ia);
    const std::size_t cols = G.cols();
    auto at = [&](std::size_t g, std::size_t k) { return byRow ? g * cols + k : k * cols + g; };
    for (std::size_t g = 0; g < groups; ++g) {
      double meanG  = 0.0;
      double meanGX = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        meanG += G[at(g, k)];
        meanGX += G[at(g, k)] * Xhat[at(g, k)];
      }
      meanG /= static_cast<double>(len);
      meanGX /= static_cast<double>(len);
      for (std::size_t k = 0; k < len; ++k) {
        dA[at(g, k)] += invStd[g] * (G[at(g, k)] - meanG - Xhat[at(g, k)] * meanGX);
      }
    }
  });
}

}  // namespace

Var layerNorm(Var a, double eps) {
  return normalizeGroups(a, eps, true, nullptr, nullptr);
}

Var batchNorm(Var a, double eps, Tensor* batchMean, Tensor* batchVar) {
  return normalizeGroups(a, eps, false, batchMean, batchVar);
}

Var normalizeColumns(Var a, const Tensor& mean, const Tensor& var, double eps) {
  const Tensor& X = a.value();
  if (mean.rows() != 1 || mean.cols() != X.cols() || !mean.sameShape(var)) {
    shapeError("normalizeColumns", X, mean);
  }
  Tensor out(X.rows(), X.cols());
  Tensor invStd(1, X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    invStd[c] = 1.0 / std::sqrt(var[c] + eps);
  }
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      out(r, c) = (X(r, c) - mean[c]) * invStd[c];
    }
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, invStd](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dA(r, c) += G(r, c) * invStd[c];
      }
    }
  });
}

Var segmentSum(Var values, std::span<const int> ids, std::size_t numSegments) {
  const Tensor& X = values.value();
  checkIds(ids, X.rows(), numSegments, "segmentSum");
  const auto          members = bucketRows(ids, numSegments);
  Tensor              out(numSegments, X.cols());
  std::vector<double> buffer;
  for (std::size_t s = 0; s < numSegments; ++s) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      buffer.clear();
      for (const int r : members[s]) {
        buffer.push_back(X(r, c));
      }
      out(s, c) = orderedSum(buffer);
    }
  }
  const int        ia = values.id();
  std::vector<int> idCopy(ids.begin(), ids.end());
  return values.tape()->record(std::move(out), {values}, [ia, idCopy = std::move(idCopy)](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t r = 0; r < idCopy.size(); ++r) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dA(r, c) += G(idCopy[r], c);
      }
    }
  });
}

Var segmentMean(Var values, std::span<const int> ids, std::size_t numSegments) {
  checkIds(ids, values.rows(), numSegments, "segmentMean");
  std::vector<double> counts(numSegments, 0.0);
  for (const int id : ids) {
    counts[id] += 1.0;
  }
  Var    sums = segmentSum(values, ids, numSegments);
  Tensor inv(numSegments, values.cols());
  for (std::size_t s = 0; s < numSegments; ++s) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      inv(s, c) = counts[s] > 0.0 ? 1.0 / counts[s] : 0.0;
    }
  }
  Tensor out = sums.value();
  for (std::size_t s = 0; s < numSegments; ++s) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(s, c) = counts[s] > 0.0 ? out(s, c) / counts[s] : 0.0;
    }
  }
  const int is = sums.id();
  return values.tape()->record(std::move(out), {sums}, [is, inv](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dS = t.gradBuffer(is);
    for (std::size_t i = 0; i < G.size(); ++i) {
      dS[i] += G[i] * inv[i];
    }
  });
}

Var segmentMax(Var values, std::span<const int> ids, std::size_t numSegments) {
  const Tensor& X = values.value();
  checkIds(ids, X.rows(), numSegments, "segmentMax");
  Tensor           out(numSegments, X.cols());
  std::vector<int> argmax(numSegments * X.cols(), -1);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const std::size_t s = static_cast<std::size_t>(ids[r]);
    for (std::size_t c = 0; c < X.cols(); ++c) {
      int& best = argmax[s * X.cols() + c];
      if (best < 0 || X(r, c) > out(s, c)) {
        best      = static_cast<int>(r);
        out(s, c) = X(r, c);
      }
    }
  }
  const int ia = values.id();
  return values.tape()->record(std::move(out), {values}, [ia, argmax = std::move(argmax)](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t s = 0; s < G.rows(); ++s) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        const int r = argmax[s * G.cols() + c];
        if (r >= 0) {
          dA(r, c) += G(s, c);
        }
      }
    }
  });
}

Var gather(Var values, std::span<const int> indices) {
  const Tensor& X = values.value();
  for (const int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= X.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "gather: index " + std::to_string(i) + " out of range for " +
                                                X.shapeString());
    }
  }
  Tensor out(indices.size(), X.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    std::copy(X.row(indices[k]).begin(), X.row(indices[k]).end(), out.row(k).begin());
  }
  const int        ia = values.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return values.tape()->record(std::move(out), {values}, [ia, idx = std::move(idx)](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dA(idx[k], c) += G(k, c);
      }
    }
  });
}

Var sumAll(Var a) {
  std::vector<double> buffer(a.value().values().begin(), a.value().values().end());
  const int           ia = a.id();
  return a.tape()->record(Tensor::scalar(orderedSum(buffer)), {a}, [ia](Tape& t, int self) {
    const double g  = t.gradOf(self)[0];
    Tensor&      dA = t.gradBuffer(ia);
    for (double& v : dA.values()) {
      v += g;
    }
  });
}

Var meanAll(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0.0) {
    throw Error(ErrorCode::ShapeMismatch, "mean of empty tensor");
  }
  return scale(sumAll(a), 1.0 / n);
}

Var sumAxis(Var a, int axis) {
  const Tensor& X = a.value();
  if (axis == 0) {
    std::vector<int> ids(X.rows(), 0);
    return segmentSum(a, ids, 1);
  }
  Tensor              out(X.rows(), 1);
  std::vector<double> buffer;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    buffer.assign(X.row(r).begin(), X.row(r).end());
    out(r, 0) = orderedSum(buffer);
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t r = 0; r < dA.rows(); ++r) {
      for (std::size_t c = 0; c < dA.cols(); ++c) {
        dA(r, c) += G(r, 0);
      }
    }
  });
}

Var meanAxis(Var a, int axis) {
  const std::size_t n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) {
    throw Error(ErrorCode::ShapeMismatch, "mean over an empty axis");
  }
  return scale(sumAxis(a, axis), 1.0 / static_cast<double>(n));
}

Var maxAxis(Var a, int axis) {
  const Tensor& X = a.value();
  if (axis == 0) {
    std::vector<int> ids(X.rows(), 0);
    return segmentMax(a, ids, 1);
  }
  Tensor           out(X.rows(), 1);
  std::vector<int> argmax(X.rows(), 0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      if (c == 0 || X(r, c) > out(r, 0)) {
        out(r, 0) = X(r, c);
        argmax[r] = static_cast<int>(c);
      }
    }
  }
  const int ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, argmax](Tape& t, int self) {
    const Tensor& G  = t.gradOf(self);
    Tensor&       dA = t.gradBuffer(ia);
    for (std::size_t r = 0; r < dA.rows(); ++r) {
      dA(r, argmax[r]) += G(r, 0);
    }
  });
}

Var maskedMae(Var pred, const Tensor& target, const Tensor& mask) {
  const Tensor& P = pred.value();
  presentMask("maskedMae", P, target, mask);
  std::vector<double> terms;
  Tensor              dLocal(P.rows(), P.cols());
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (mask[i] == 0.0) {
      continue;
    }
    const double d = P[i] - target[i];
    terms.push_back(std::abs(d));
    dLocal[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  const double count = static_cast<double>(terms.size());
  const double loss  = count > 0.0 ? orderedSum(terms) / count : 0.0;
  if (count > 0.0) {
    for (double& v : dLocal.values()) {
      v /= count;
    }
  }
  const int ip = pred.id();
  return pred.tape()->record(Tensor::scalar(loss), {pred}, [ip, dLocal = std::move(dLocal)](Tape& t, int self) {
    const double g  = t.gradOf(self)[0];
    Tensor&      dP = t.gradBuffer(ip);
    for (std::size_t i = 0; i < dP.size(); ++i) {
      dP[i] += g * dLocal[i];
    }
  });
}

Var maskedBce(Var logits, const Tensor& target, const Tensor& mask) {
  const Tensor& Z = logits.value();
  presentMask("maskedBce", Z, target, mask);
  std::vector<double> terms;
  Tensor              dLocal(Z.rows(), Z.cols());
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (mask[i] == 0.0) {
      continue;
    }
    const double z = Z[i];
    const double y = target[i];
    terms.push_back(std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    dLocal[i]        = sig - y;
  }
  const double count = static_cast<double>(terms.size());
  const double loss  = count > 0.0 ? orderedSum(terms) / count : 0.0;
  if (count > 0.0) {
    for (double& v : dLocal.values()) {
      v /= count;
    }
  }
  const int iz = logits.id();
  return logits.tape()->record(Tensor::scalar(loss), {logits}, [iz, dLocal = std::move(dLocal)](Tape& t, int self) {
    const double g  = t.gradOf(self)[0];
    Tensor&      dZ = t.gradBuffer(iz);
    for (std::size_t i = 0; i < dZ.size(); ++i) {
      dZ[i] += g * dLocal[i];
    }
  });
}

Var maskedCrossEntropy(Var logits, const Tensor& classes, const Tensor& mask, std::size_t numClasses) {
  const Tensor& Z = logits.value();
  if (numClasses < 2 || !classes.sameShape(mask) || classes.rows() != Z.rows() ||
      classes.cols() * numClasses != Z.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "maskedCrossEntropy: logits " + Z.shapeString() + ", classes " +
                                              classes.shapeString() + ", C=" + std::to_string(numClasses));
  }
  std::vector<double> terms;
  Tensor              dLocal(Z.rows(), Z.cols());
  std::vector<double> prob(numClasses);
  for (std::size_t r = 0; r < classes.rows(); ++r) {
    for (std::size_t l = 0; l < classes.cols(); ++l) {
      if (mask(r, l) == 0.0) {
        continue;
      }
      const double label = classes(r, l);
      const auto   k     = static_cast<long long>(label);
      if (label != static_cast<double>(k) || k < 0 || k >= static_cast<long long>(numClasses)) {
        throw Error(ErrorCode::ClassOutOfRange, "class " + std::to_string(label) + " not in [0, " +
                                                    std::to_string(numClasses) + ")");
      }
      const double* z    = Z.row(r).data() + l * numClasses;
      const double  zmax = *std::max_element(z, z + numClasses);
      double        sum  = 0.0;
      for (std::size_t c = 0; c < numClasses; ++c) {
        prob[c] = std::exp(z[c] - zmax);
        sum += prob[c];
      }
      terms.push_back(zmax + std::log(sum) - z[k]);
      for (std::size_t c = 0; c < numClasses; ++c) {
        dLocal(r, l * numClasses + c) = prob[c] / sum - (static_cast<long long>(c) == k ? 1.0 : 0.0);
      }
    }
  }
  const double count = static_cast<double>(terms.size());
  const double loss  = count > 0.0 ? orderedSum(terms) / count : 0.0;
  if (count > 0.0) {
    for (double& v : dLocal.values()) {
      v /= count;
    }
  }
  const int iz = logits.id();
  return logits.tape()->record(Tensor::scalar(loss), {logits}, [iz, dLocal = std::move(dLocal)](Tape& t, int self) {
    const double g  = t.gradOf(self)[0];
    Tensor&      dZ = t.gradBuffer(iz);
    for (std::size_t i = 0; i < dZ.size(); ++i) {
      dZ[i] += g * dLocal[i];
    }
  });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

GradCheckResult finiteDifferenceCheck(const std::function<Var(Tape&)>& lossFn,
                                      std::span<Parameter* const>      params,
                                      double                           h) {
  for (Parameter* p : params) {
    p->grad = Tensor(p->value.rows(), p->value.cols());
  }
  {
    Tape tape;
    tape.backward(lossFn(tape));
  }
  auto evaluate = [&]() {
    Tape tape;
    return lossFn(tape).value().item();
  };
  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i]        = saved + h;
      const double up    = evaluate();
      p->value[i]        = saved - h;
      const double down  = evaluate();
      p->value[i]        = saved;
      const double numeric  = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom    = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel      = std::abs(analytic - numeric) / denom;
      if (rel > result.maxRelativeError) {
        result.maxRelativeError = rel;
        result.worstParameter   = p->name;
        result.worstIndex       = i;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char          kCheckpointMagic[4] = {'M', 'F', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion  = 1;

void putU32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t getU32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw Error(ErrorCode::CorruptHeader, "truncated checkpoint " + path);
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void saveCheckpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path);
  }
  out.write(kCheckpointMagic, 4);
  putU32(out, kCheckpointVersion);
  putU32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params.all()) {
    putU32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    putU32(out, 2);
    putU32(out, static_cast<std::uint32_t>(p.value.rows()));
    putU32(out, static_cast<std::uint32_t>(p.value.cols()));
    for (const double v : p.value.values()) {
      putU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!out) {
    throw Error(ErrorCode::Io, "write failed for " + path);
  }
}

std::vector<NamedTensor> readCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error(ErrorCode::CorruptHeader, "bad checkpoint magic in " + path);
  }
  if (getU32(in, path) != kCheckpointVersion) {
    throw Error(ErrorCode::CorruptHeader, "unsupported checkpoint version in " + path);
  }
  const std::uint32_t      count = getU32(in, path);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t nameLen = getU32(in, path);
    std::string         name(nameLen, '\0');
    if (!in.read(name.data(), nameLen)) {
      throw Error(ErrorCode::CorruptHeader, "truncated checkpoint " + path);
    }
    const std::uint32_t rank = getU32(in, path);
    if (rank != 2) {
      throw Error(ErrorCode::CorruptHeader, "unsupported rank " + std::to_string(rank) + " in " + path);
    }
    const std::uint32_t rows = getU32(in, path);
    const std::uint32_t cols = getU32(in, path);
    Tensor              value(rows, cols);
    for (double& v : value.values()) {
      v = static_cast<double>(std::bit_cast<float>(getU32(in, path)));
    }
    tensors.push_back({std::move(name), std::move(value)});
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::CorruptHeader, "trailing bytes in " + path);
  }
  return tensors;
}

void loadCheckpoint(const std::string& path, ParameterSet& params, std::string_view prefix) {
  const std::vector<NamedTensor>                tensors = readCheckpoint(path);
  std::unordered_map<std::string, const Tensor*> byName;
  for (const NamedTensor& t : tensors) {
    byName.emplace(t.name, &t.value);
  }
  for (Parameter& p : params.all()) {
    if (!p.name.starts_with(prefix)) {
      continue;
    }
    const auto found = byName.find(p.name);
    if (found == byName.end()) {
      throw Error(ErrorCode::DimensionMismatch, "checkpoint " + path + " lacks parameter '" + p.name + "'");
    }
    if (!found->second->sameShape(p.value)) {
      throw Error(ErrorCode::DimensionMismatch, "parameter '" + p.name + "' has shape " +
                                                    found->second->shapeString() + " in checkpoint, expected " +
                                                    p.value.shapeString());
    }
    p.value = *found->second;
  }
}

}  // namespace minifp
