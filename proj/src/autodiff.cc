// src/autodiff.cc

// Copyright 2026  ssk authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "ssk/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "ssk/error.h"

namespace ssk {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// Rows and columns of a tensor viewed as a matrix.
template <class T>
std::pair<int, int> as_rows_cols(const Tensor<T>& t) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 1) return {1, t.dim(0)};
  throw ShapeError("expected a rank-1 or rank-2 tensor, got " + t.shape_string());
}

template <class T>
Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> row_vector(const Tensor<T>& t) {
  return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(t.data.data(),
                                                               static_cast<Eigen::Index>(t.size()));
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

}  // namespace

// ---------------------------------------------------------------- Tensor

template <class T>
Tensor<T>::Tensor(std::vector<int> shape_in)
    : shape(std::move(shape_in)), data(shape_product(shape), T(0)) {}

template <class T>
Tensor<T>::Tensor(std::vector<int> shape_in, Buffer<T> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_product(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_string());
}

template <class T>
Tensor<T> Tensor<T>::from_matrix(const RowMatrix<T>& m) {
  Tensor<T> t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  std::copy(m.data(), m.data() + m.size(), t.data.begin());
  return t;
}

template <class T>
Eigen::Map<RowMatrix<T>> Tensor<T>::matrix() {
  auto [r, c] = as_rows_cols(*this);
  return Eigen::Map<RowMatrix<T>>(data.data(), r, c);
}

template <class T>
Eigen::Map<const RowMatrix<T>> Tensor<T>::matrix() const {
  auto [r, c] = as_rows_cols(*this);
  return Eigen::Map<const RowMatrix<T>>(data.data(), r, c);
}

template <class T>
std::string Tensor<T>::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------- Tape

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape->node(id).value;
}

template <class T>
const Tensor<T>& Var<T>::grad() const {
  return tape->node(id).grad;
}

template <class T>
Var<T> Tape<T>::make_leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  return make_leaf(std::move(value), true);
}

template <class T>
Var<T> Tape<T>::parameter(Tensor<T> value) {
  Var<T> v = make_leaf(std::move(value), true);
  parameters_.push_back(v);
  return v;
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return make_leaf(std::move(value), false);
}

template <class T>
void Tape<T>::set_value(Var<T> leaf, Tensor<T> value) {
  Node& n = node(leaf.id);
  if (!n.leaf) throw ContractError("set_value on a non-leaf node");
  require_same_shape(n.value, value, "set_value");
  n.value = std::move(value);
}

template <class T>
Var<T> Tape<T>::record(std::vector<int> inputs, std::function<void(Tape&, Node&)> forward,
                       std::function<void(Tape&, Node&)> backward) {
  Node n;
  n.inputs = std::move(inputs);
  for (int in : n.inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  Node& self = nodes_.back();
  self.forward(*this, self);
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
void Tape<T>::forward() {
  for (Node& n : nodes_)
    if (!n.leaf) n.forward(*this, n);
}

template <class T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& n = node(id);
  if (n.grad.shape != n.value.shape || n.grad.data.size() != n.value.data.size())
    n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> output) {
  if (output.tape != this) throw ContractError("backward: variable from another tape");
  Node& out = node(output.id);
  if (out.value.size() != 1)
    throw ContractError("backward: output must be scalar, got shape " +
                        out.value.shape_string());
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor<T>(n.value.shape);
    } else {
      n.grad = Tensor<T>();
    }
  }
  if (!out.requires_grad) return;
  out.grad.data[0] = T(1);
  for (int id = output.id; id >= 0; --id) {
    Node& n = node(id);
    if (n.leaf || !n.requires_grad || !n.backward) continue;
    n.backward(*this, n);
  }
}

template <class T>
std::vector<Tensor<T>> Tape<T>::gradient(Var<T> output, std::span<const Var<T>> wrt) {
  backward(output);
  std::vector<Tensor<T>> out;
  out.reserve(wrt.size());
  for (const Var<T>& v : wrt) {
    const Node& n = node(v.id);
    out.push_back(n.requires_grad ? n.grad : Tensor<T>(n.value.shape));
  }
  return out;
}

// ---------------------------------------------------------------- ops

namespace ad {

namespace {

template <class T>
bool wants_grad(Tape<T>& tape, int id) {
  return tape.node(id).requires_grad;
}

template <class T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("variables on different tapes");
  return *a.tape;
}

}  // namespace

template <class T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = tape_of(x, weight);
  tape_of(x, bias);
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const auto& bs = bias.shape();
  if (xs.size() != 2 || ws.size() != 2 || bs.size() != 1 || xs[1] != ws[1] || bs[0] != ws[0])
    throw ShapeError("affine: incompatible shapes x" + x.value().shape_string() + " W" +
                     weight.value().shape_string() + " b" + bias.value().shape_string());
  const int rows = xs[0], out_dim = ws[0];
  return tape.record(
      {x.id, weight.id, bias.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = Tensor<T>({rows, out_dim});
        auto y = self.value.matrix();
        y.noalias() = t.node(x.id).value.matrix() * t.node(weight.id).value.matrix().transpose();
        y.rowwise() += row_vector(t.node(bias.id).value);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        auto dy = self.grad.matrix();
        if (wants_grad(t, x.id))
          t.grad_buffer(x.id).matrix().noalias() += dy * t.node(weight.id).value.matrix();
        if (wants_grad(t, weight.id))
          t.grad_buffer(weight.id).matrix().noalias() +=
              dy.transpose() * t.node(x.id).value.matrix();
        if (wants_grad(t, bias.id)) t.grad_buffer(bias.id).matrix() += dy.colwise().sum();
      });
}

template <class T>
Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, int dilation) {
  Tape<T>& tape = tape_of(x, weight);
  tape_of(x, bias);
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const auto& bs = bias.shape();
  if (xs.size() != 3 || ws.size() != 3 || bs.size() != 1 || ws[2] != xs[2] || bs[0] != ws[0])
    throw ShapeError("conv1d: incompatible shapes x" + x.value().shape_string() + " W" +
                     weight.value().shape_string() + " b" + bias.value().shape_string());
  if (dilation < 1) throw ShapeError("conv1d: dilation must be >= 1");
  const int batch = xs[0], frames = xs[1], cin = xs[2];
  const int cout = ws[0], kernel = ws[1];
  const int out_frames = frames - dilation * (kernel - 1);
  if (out_frames < 1)
    throw ShapeError("conv1d: " + std::to_string(frames) + " frames is shorter than the kernel span");
  const int patch = kernel * cin;
  // im2col buffer, (B * out_frames, K * Cin); kept for the backward pass.
  auto cols = std::make_shared<RowMatrix<T>>();

  return tape.record(
      {x.id, weight.id, bias.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const T* in = t.node(x.id).value.data.data();
        cols->resize(static_cast<Eigen::Index>(batch) * out_frames, patch);
        for (int b = 0; b < batch; ++b)
          for (int f = 0; f < out_frames; ++f) {
            T* row = cols->data() + (static_cast<std::size_t>(b) * out_frames + f) * patch;
            for (int k = 0; k < kernel; ++k) {
              const T* src = in + (static_cast<std::size_t>(b) * frames + f + k * dilation) * cin;
              std::copy(src, src + cin, row + static_cast<std::size_t>(k) * cin);
            }
          }
        self.value = Tensor<T>({batch, out_frames, cout});
        Eigen::Map<RowMatrix<T>> y(self.value.data.data(),
                                   static_cast<Eigen::Index>(batch) * out_frames, cout);
        Eigen::Map<const RowMatrix<T>> w(t.node(weight.id).value.data.data(), cout, patch);
        y.noalias() = (*cols) * w.transpose();
        y.rowwise() += row_vector(t.node(bias.id).value);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        Eigen::Map<const RowMatrix<T>> dy(self.grad.data.data(),
                                          static_cast<Eigen::Index>(batch) * out_frames, cout);
        if (wants_grad(t, weight.id)) {
          Eigen::Map<RowMatrix<T>> dw(t.grad_buffer(weight.id).data.data(), cout, patch);
          dw.noalias() += dy.transpose() * (*cols);
        }
        if (wants_grad(t, bias.id)) t.grad_buffer(bias.id).matrix() += dy.colwise().sum();
        if (wants_grad(t, x.id)) {
          Eigen::Map<const RowMatrix<T>> w(t.node(weight.id).value.data.data(), cout, patch);
          RowMatrix<T> dcols = dy * w;
          T* dx = t.grad_buffer(x.id).data.data();
          for (int b = 0; b < batch; ++b)
            for (int f = 0; f < out_frames; ++f) {
              const T* row = dcols.data() + (static_cast<std::size_t>(b) * out_frames + f) * patch;
              for (int k = 0; k < kernel; ++k) {
                T* dst = dx + (static_cast<std::size_t>(b) * frames + f + k * dilation) * cin;
                const T* src = row + static_cast<std::size_t>(k) * cin;
                for (int c = 0; c < cin; ++c) dst[c] += src[c];
              }
            }
        }
      });
}

template <class T>
Var<T> relu(Var<T> x) {
  Tape<T>& tape = *x.tape;
  return tape.record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        self.value = Tensor<T>(in.shape);
        for (std::size_t i = 0; i < in.size(); ++i) self.value[i] = in[i] > T(0) ? in[i] : T(0);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        Tensor<T>& dx = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < in.size(); ++i)
          if (in[i] > T(0)) dx[i] += self.grad[i];
      });
}

template <class T>
Var<T> stats_pool(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const auto& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("stats_pool: expected (B, T, C), got " + x.value().shape_string());
  const int batch = xs[0], frames = xs[1], channels = xs[2];
  if (frames < 1) throw ShapeError("stats_pool: no frames");
  const T eps = static_cast<T>(kStatsPoolEpsilon);
  return tape.record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        self.value = Tensor<T>({batch, 2 * channels});
        for (int b = 0; b < batch; ++b) {
          Eigen::Map<const RowMatrix<T>> seq(in.data.data() + static_cast<std::size_t>(b) * frames * channels,
                                             frames, channels);
          T* out = self.value.data.data() + static_cast<std::size_t>(b) * 2 * channels;
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> mu(out, channels);
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> sd(out + channels, channels);
          mu = seq.colwise().mean();
          sd = ((seq.rowwise() - mu).array().square().colwise().sum() / T(frames) + eps).sqrt();
        }
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        Tensor<T>& dx = t.grad_buffer(x.id);
        for (int b = 0; b < batch; ++b) {
          const std::size_t off = static_cast<std::size_t>(b) * frames * channels;
          Eigen::Map<const RowMatrix<T>> seq(in.data.data() + off, frames, channels);
          Eigen::Map<RowMatrix<T>> dseq(dx.data.data() + off, frames, channels);
          const T* stats = self.value.data.data() + static_cast<std::size_t>(b) * 2 * channels;
          const T* g = self.grad.data.data() + static_cast<std::size_t>(b) * 2 * channels;
          Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> mu(stats, channels);
          Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> sd(stats + channels, channels);
          Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> gmu(g, channels);
          Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> gsd(g + channels, channels);
          // d sd / d x_t = (x_t - mu) / (T sd); the mean term sums to zero.
          const Eigen::Matrix<T, 1, Eigen::Dynamic> coef = gsd.array() / (sd.array() * T(frames));
          dseq.rowwise() += gmu / T(frames);
          dseq += ((seq.rowwise() - mu).array().rowwise() * coef.array()).matrix();
        }
      });
}

template <class T>
Var<T> l2_normalize(Var<T> x) {
  Tape<T>& tape = *x.tape;
  as_rows_cols(x.value());
  auto norms = std::make_shared<std::vector<T>>();
  return tape.record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        self.value = in;
        auto y = self.value.matrix();
        norms->resize(static_cast<std::size_t>(y.rows()));
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          const T n = y.row(r).norm();
          if (!(n > T(0))) throw DegenerateInputError("l2_normalize: zero-norm row");
          (*norms)[static_cast<std::size_t>(r)] = n;
          y.row(r) /= n;
        }
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        auto y = self.value.matrix();
        auto dy = self.grad.matrix();
        auto dx = t.grad_buffer(x.id).matrix();
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          const T proj = y.row(r).dot(dy.row(r));
          dx.row(r) += (dy.row(r) - proj * y.row(r)) / (*norms)[static_cast<std::size_t>(r)];
        }
      });
}

template <class T>
Var<T> dot(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, b);
  if (a.value().rank() != 1) throw ShapeError("dot: expected rank-1 operands");
  require_same_shape(a.value(), b.value(), "dot");
  return tape.record(
      {a.id, b.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& av = t.node(a.id).value.data;
        const auto& bv = t.node(b.id).value.data;
        T s = 0;
        for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
        self.value = Tensor<T>::scalar(s);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const T g = self.grad[0];
        // Copies guard the a == b case, where both buffers alias.
        const Buffer<T> av = t.node(a.id).value.data;
        const Buffer<T> bv = t.node(b.id).value.data;
        if (wants_grad(t, a.id)) {
          Tensor<T>& da = t.grad_buffer(a.id);
          for (std::size_t i = 0; i < av.size(); ++i) da[i] += g * bv[i];
        }
        if (wants_grad(t, b.id)) {
          Tensor<T>& db = t.grad_buffer(b.id);
          for (std::size_t i = 0; i < bv.size(); ++i) db[i] += g * av[i];
        }
      });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, b);
  auto [m, d1] = as_rows_cols(a.value());
  auto [p, d2] = as_rows_cols(b.value());
  if (d1 != d2) throw ShapeError("matmul_nt: inner dimensions differ");
  return tape.record(
      {a.id, b.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = Tensor<T>({m, p});
        self.value.matrix().noalias() =
            t.node(a.id).value.matrix() * t.node(b.id).value.matrix().transpose();
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        auto dc = self.grad.matrix();
        if (wants_grad(t, a.id))
          t.grad_buffer(a.id).matrix().noalias() += dc * t.node(b.id).value.matrix();
        if (wants_grad(t, b.id))
          t.grad_buffer(b.id).matrix().noalias() += dc.transpose() * t.node(a.id).value.matrix();
      });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return tape.record(
      {a.id, b.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& av = t.node(a.id).value;
        const Tensor<T>& bv = t.node(b.id).value;
        self.value = Tensor<T>(av.shape);
        for (std::size_t i = 0; i < av.size(); ++i) self.value[i] = av[i] + bv[i];
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        for (int id : {a.id, b.id}) {
          if (!wants_grad(t, id)) continue;
          Tensor<T>& d = t.grad_buffer(id);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
        }
      });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return tape.record(
      {a.id, b.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& av = t.node(a.id).value;
        const Tensor<T>& bv = t.node(b.id).value;
        self.value = Tensor<T>(av.shape);
        for (std::size_t i = 0; i < av.size(); ++i) self.value[i] = av[i] * bv[i];
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Buffer<T> av = t.node(a.id).value.data;
        const Buffer<T> bv = t.node(b.id).value.data;
        if (wants_grad(t, a.id)) {
          Tensor<T>& d = t.grad_buffer(a.id);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * bv[i];
        }
        if (wants_grad(t, b.id)) {
          Tensor<T>& d = t.grad_buffer(b.id);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * av[i];
        }
      });
}

template <class T>
Var<T> scale(Var<T> x, double factor) {
  const T f = static_cast<T>(factor);
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = t.node(x.id).value;
        for (T& v : self.value.data) v *= f;
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        Tensor<T>& d = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += f * self.grad[i];
      });
}

template <class T>
Var<T> exp(Var<T> x) {
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = t.node(x.id).value;
        for (T& v : self.value.data) v = std::exp(v);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        Tensor<T>& d = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.value[i] * self.grad[i];
      });
}

template <class T>
Var<T> log(Var<T> x) {
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = t.node(x.id).value;
        for (T& v : self.value.data) {
          if (!(v > T(0))) throw DegenerateInputError("log of a nonpositive value");
          v = std::log(v);
        }
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        Tensor<T>& d = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] / in[i];
      });
}

template <class T>
Var<T> clamp(Var<T> x, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be below hi");
  const T l = static_cast<T>(lo), h = static_cast<T>(hi);
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        self.value = t.node(x.id).value;
        for (T& v : self.value.data) v = std::clamp(v, l, h);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const Tensor<T>& in = t.node(x.id).value;
        Tensor<T>& d = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < d.size(); ++i)
          if (in[i] > l && in[i] < h) d[i] += self.grad[i];
      });
}

template <class T>
Var<T> logsumexp(Var<T> x) {
  if (x.value().size() == 0) throw ContractError("logsumexp of an empty tensor");
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        const T m = *std::max_element(v.begin(), v.end());
        T s = 0;
        for (T e : v) s += std::exp(e - m);
        self.value = Tensor<T>::scalar(m + std::log(s));
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        const T lse = self.value[0], g = self.grad[0];
        Tensor<T>& d = t.grad_buffer(x.id);
        for (std::size_t i = 0; i < v.size(); ++i) d[i] += g * std::exp(v[i] - lse);
      });
}

template <class T>
Var<T> masked_row_logsumexp(Var<T> x, std::vector<std::uint8_t> mask) {
  auto [rows, cols] = as_rows_cols(x.value());
  if (mask.size() != x.value().size()) throw ShapeError("masked_row_logsumexp: mask size mismatch");
  for (int r = 0; r < rows; ++r) {
    bool any = false;
    for (int c = 0; c < cols; ++c) any = any || mask[static_cast<std::size_t>(r) * cols + c];
    if (!any) throw ContractError("masked_row_logsumexp: row " + std::to_string(r) + " selects nothing");
  }
  auto sel = std::make_shared<std::vector<std::uint8_t>>(std::move(mask));
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        self.value = Tensor<T>({rows});
        for (int r = 0; r < rows; ++r) {
          const std::size_t off = static_cast<std::size_t>(r) * cols;
          T m = -std::numeric_limits<T>::infinity();
          for (int c = 0; c < cols; ++c)
            if ((*sel)[off + c]) m = std::max(m, v[off + c]);
          T s = 0;
          for (int c = 0; c < cols; ++c)
            if ((*sel)[off + c]) s += std::exp(v[off + c] - m);
          self.value[static_cast<std::size_t>(r)] = m + std::log(s);
        }
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        Tensor<T>& d = t.grad_buffer(x.id);
        for (int r = 0; r < rows; ++r) {
          const std::size_t off = static_cast<std::size_t>(r) * cols;
          const T lse = self.value[static_cast<std::size_t>(r)];
          const T g = self.grad[static_cast<std::size_t>(r)];
          for (int c = 0; c < cols; ++c)
            if ((*sel)[off + c]) d[off + c] += g * std::exp(v[off + c] - lse);
        }
      });
}

template <class T>
Var<T> gather_rows(Var<T> x, std::vector<int> rows) {
  auto [r_in, cols] = as_rows_cols(x.value());
  for (int r : rows)
    if (r < 0 || r >= r_in) throw ShapeError("gather_rows: row index out of range");
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  const int n = static_cast<int>(idx->size());
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        self.value = Tensor<T>({n, cols});
        for (int i = 0; i < n; ++i)
          std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((*idx)[i]) * cols, cols,
                      self.value.data.begin() + static_cast<std::ptrdiff_t>(i) * cols);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        Tensor<T>& d = t.grad_buffer(x.id);
        for (int i = 0; i < n; ++i)
          for (int c = 0; c < cols; ++c)
            d[static_cast<std::size_t>((*idx)[i]) * cols + c] +=
                self.grad[static_cast<std::size_t>(i) * cols + c];
      });
}

template <class T>
Var<T> gather(Var<T> x, std::vector<int> flat_index) {
  const int size = static_cast<int>(x.value().size());
  for (int i : flat_index)
    if (i < 0 || i >= size) throw ShapeError("gather: index out of range");
  auto idx = std::make_shared<std::vector<int>>(std::move(flat_index));
  const int n = static_cast<int>(idx->size());
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        const auto& v = t.node(x.id).value.data;
        self.value = Tensor<T>({n});
        for (int i = 0; i < n; ++i) self.value[static_cast<std::size_t>(i)] = v[(*idx)[i]];
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        Tensor<T>& d = t.grad_buffer(x.id);
        for (int i = 0; i < n; ++i) d[(*idx)[i]] += self.grad[static_cast<std::size_t>(i)];
      });
}

template <class T>
Var<T> sum(Var<T> x) {
  return x.tape->record(
      {x.id},
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        T s = 0;
        for (T v : t.node(x.id).value.data) s += v;
        self.value = Tensor<T>::scalar(s);
      },
      [=](Tape<T>& t, typename Tape<T>::Node& self) {
        for (T& d : t.grad_buffer(x.id).data) d += self.grad[0];
      });
}

template <class T>
Var<T> mean(Var<T> x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

template <class T>
Var<T> detach(Var<T> x) {
  return x.tape->constant(x.value());
}

#define SSK_INSTANTIATE_OPS(T)                                                    \
  template Var<T> affine(Var<T>, Var<T>, Var<T>);                                 \
  template Var<T> conv1d(Var<T>, Var<T>, Var<T>, int);                            \
  template Var<T> relu(Var<T>);                                                   \
  template Var<T> stats_pool(Var<T>);                                             \
  template Var<T> l2_normalize(Var<T>);                                           \
  template Var<T> dot(Var<T>, Var<T>);                                            \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                      \
  template Var<T> add(Var<T>, Var<T>);                                            \
  template Var<T> mul(Var<T>, Var<T>);                                            \
  template Var<T> scale(Var<T>, double);                                          \
  template Var<T> exp(Var<T>);                                                    \
  template Var<T> log(Var<T>);                                                    \
  template Var<T> clamp(Var<T>, double, double);                                  \
  template Var<T> logsumexp(Var<T>);                                              \
  template Var<T> masked_row_logsumexp(Var<T>, std::vector<std::uint8_t>);        \
  template Var<T> gather_rows(Var<T>, std::vector<int>);                          \
  template Var<T> gather(Var<T>, std::vector<int>);                               \
  template Var<T> sum(Var<T>);                                                    \
  template Var<T> mean(Var<T>);                                                   \
  template Var<T> detach(Var<T>);

SSK_INSTANTIATE_OPS(float)
SSK_INSTANTIATE_OPS(double)
SSK_INSTANTIATE_OPS(long double)

#undef SSK_INSTANTIATE_OPS

}  // namespace ad

// ---------------------------------------------------------------- checks

template <class T>
std::vector<Tensor<T>> numeric_gradient(Tape<T>& tape, Var<T> output, std::span<const Var<T>> leaves,
                                        double eps) {
  std::vector<Tensor<T>> out;
  const T h = static_cast<T>(eps);
  for (const Var<T>& leaf : leaves) {
    const Tensor<T> base = leaf.value();
    Tensor<T> probe = base;
    Tensor<T> g(base.shape);
    for (std::size_t i = 0; i < base.size(); ++i) {
      probe[i] = base[i] + h;
      tape.set_value(leaf, probe);
      tape.forward();
      const T plus = output.value()[0];
      probe[i] = base[i] - h;
      tape.set_value(leaf, probe);
      tape.forward();
      const T minus = output.value()[0];
      probe[i] = base[i];
      // Divide by the step actually taken, which differs from 2h after rounding.
      g[i] = (plus - minus) / ((base[i] + h) - (base[i] - h));
    }
    tape.set_value(leaf, base);
    out.push_back(std::move(g));
  }
  tape.forward();
  return out;
}

template <class T>
FiniteDiffReport compare_gradients(const std::vector<Tensor<double>>& analytic,
                                   const std::vector<Tensor<T>>& numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("compare_gradients: tensor count mismatch");
  FiniteDiffReport report;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    if (analytic[p].shape != numeric[p].shape) throw ShapeError("compare_gradients: shape mismatch");
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = analytic[p][i];
      const double n = static_cast<double>(numeric[p][i]);
      const double denom = std::max({std::abs(a), std::abs(n), 1e-12});
      const double rel = std::abs(a - n) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || report.worst_var < 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_var = static_cast<int>(p);
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = n;
      }
    }
  }
  return report;
}

FiniteDiffReport finite_diff_check(Tape<double>& tape, Var<double> output,
                                   std::span<const Var<double>> params, double eps) {
  const std::vector<Tensor<double>> analytic = tape.gradient(output, params);
  return compare_gradients(analytic, numeric_gradient<double>(tape, output, params, eps));
}

template std::vector<Tensor<double>> numeric_gradient(Tape<double>&, Var<double>, std::span<const Var<double>>,
                                                      double);
template std::vector<Tensor<long double>> numeric_gradient(Tape<long double>&, Var<long double>,
                                                           std::span<const Var<long double>>, double);
template FiniteDiffReport compare_gradients(const std::vector<Tensor<double>>&,
                                            const std::vector<Tensor<double>>&);
template FiniteDiffReport compare_gradients(const std::vector<Tensor<double>>&,
                                            const std::vector<Tensor<long double>>&);

template struct Tensor<float>;
template struct Tensor<double>;
template struct Tensor<long double>;
template struct Var<float>;
template struct Var<double>;
template struct Var<long double>;
template class Tape<float>;
template class Tape<double>;
template class Tape<long double>;

}  // namespace ssk
