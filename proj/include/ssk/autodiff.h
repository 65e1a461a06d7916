// ssk/autodiff.h

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

#ifndef SSK_AUTODIFF_H_
#define SSK_AUTODIFF_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ssk {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tensor storage. Eigen peels unaligned leading elements off vectorized
/// reductions based on the runtime address, so an allocator with a fixed
/// alignment is what keeps sums bit-reproducible from run to run.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense row-major tensor of rank 0 to 3. Rank 0 is a scalar with one value.
template <class T>
struct Tensor {
  std::vector<int> shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_in);
  Tensor(std::vector<int> shape_in, Buffer<T> data_in);

  static Tensor scalar(T v) { return Tensor({}, {v}); }
  static Tensor from_matrix(const RowMatrix<T>& m);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data.size(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  /// Views a rank-2 tensor (or a rank-1 tensor as a single row) as a matrix.
  Eigen::Map<RowMatrix<T>> matrix();
  Eigen::Map<const RowMatrix<T>> matrix() const;

  std::string shape_string() const;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

template <class T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const;
  const Tensor<T>& grad() const;
  const std::vector<int>& shape() const { return value().shape; }
};

/// Reverse-mode tape. Operations evaluate eagerly as they are recorded;
/// forward() replays the recorded graph after leaf values change. Nodes are
/// appended in evaluation order, so the record is topologically sorted.
template <class T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    bool leaf = false;
    bool requires_grad = false;
    std::function<void(Tape&, Node&)> forward;
    std::function<void(Tape&, Node&)> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var<T> variable(Tensor<T> value);
  /// Differentiable leaf that is also listed in parameters().
  Var<T> parameter(Tensor<T> value);
  /// Leaf excluded from differentiation.
  Var<T> constant(Tensor<T> value);

  /// Overwrites a leaf value (shape must match). Call forward() afterwards.
  void set_value(Var<T> leaf, Tensor<T> value);

  /// Re-evaluates every non-leaf node from the current leaf values.
  void forward();

  /// Reverse accumulation from a scalar node. Throws ContractError otherwise.
  void backward(Var<T> output);

  /// backward() and then copies of the requested gradients.
  std::vector<Tensor<T>> gradient(Var<T> output, std::span<const Var<T>> wrt);

  const std::vector<Var<T>>& parameters() const { return parameters_; }
  std::size_t size() const { return nodes_.size(); }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// Appends an operation node and evaluates it. Used by the op functions.
  Var<T> record(std::vector<int> inputs, std::function<void(Tape&, Node&)> forward,
                std::function<void(Tape&, Node&)> backward);

  /// Gradient buffer of a node, zero-filled on first use in a backward pass.
  Tensor<T>& grad_buffer(int id);

 private:
  Var<T> make_leaf(Tensor<T> value, bool requires_grad);

  std::vector<Node> nodes_;
  std::vector<Var<T>> parameters_;
};

namespace ad {

// The primitive set. Sequences are stored time-major, (B, T, C), so that a
// frame's channels are contiguous; matrix ops take (R, C) and treat rank-1
// inputs as one row.

/// y = x W^T + b with x (B, Din), W (Dout, Din), b (Dout).
template <class T>
Var<T> affine(Var<T> x, Var<T> weight, Var<T> bias);

/// 1-D convolution over time without padding. x (B, T, Cin), weight
/// (Cout, K, Cin), bias (Cout) -> (B, T - dilation * (K - 1), Cout).
template <class T>
Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, int dilation);

template <class T>
Var<T> relu(Var<T> x);

/// Per-channel mean and standard deviation over time: (B, T, C) -> (B, 2C),
/// means first. The deviation is sqrt(var + 1e-8).
template <class T>
Var<T> stats_pool(Var<T> x);

inline constexpr double kStatsPoolEpsilon = 1e-8;

/// Scales each row to unit L2 norm. Zero rows raise DegenerateInputError.
template <class T>
Var<T> l2_normalize(Var<T> x);

/// Scalar dot product of two rank-1 tensors.
template <class T>
Var<T> dot(Var<T> a, Var<T> b);

/// All pairwise row dot products: a (M, D), b (P, D) -> (M, P).
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

template <class T>
Var<T> add(Var<T> a, Var<T> b);
template <class T>
Var<T> mul(Var<T> a, Var<T> b);
template <class T>
Var<T> scale(Var<T> x, double factor);
template <class T>
Var<T> exp(Var<T> x);
/// Natural log; nonpositive inputs raise DegenerateInputError.
template <class T>
Var<T> log(Var<T> x);
/// Elementwise clamp; gradient passes only strictly inside (lo, hi).
template <class T>
Var<T> clamp(Var<T> x, double lo, double hi);

/// Log-sum-exp of all entries, max-subtracted.
template <class T>
Var<T> logsumexp(Var<T> x);

/// Row-wise log-sum-exp over entries with mask != 0: x (R, C) -> (R).
/// A row with no selected entry raises ContractError.
template <class T>
Var<T> masked_row_logsumexp(Var<T> x, std::vector<std::uint8_t> mask);

/// Rows of x (R, C) in the given order -> (len(rows), C).
template <class T>
Var<T> gather_rows(Var<T> x, std::vector<int> rows);

/// Flat-indexed entries of x -> rank-1 tensor.
template <class T>
Var<T> gather(Var<T> x, std::vector<int> flat_index);

template <class T>
Var<T> sum(Var<T> x);
template <class T>
Var<T> mean(Var<T> x);

/// Snapshot of x recorded as a constant. The value is frozen at recording
/// time: replays keep it, and no gradient flows through it.
template <class T>
Var<T> detach(Var<T> x);

}  // namespace ad

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  int worst_var = -1;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences of a scalar output with respect to each leaf, one
/// coordinate at a time, by perturbing leaf values and replaying the tape.
/// Leaf values are restored on return.
template <class T>
std::vector<Tensor<T>> numeric_gradient(Tape<T>& tape, Var<T> output, std::span<const Var<T>> leaves,
                                        double eps = 1e-5);

/// Coordinate-wise relative error, max(|a|, |n|, 1e-12) as denominator.
template <class T>
FiniteDiffReport compare_gradients(const std::vector<Tensor<double>>& analytic,
                                   const std::vector<Tensor<T>>& numeric);

/// Compares reverse-mode gradients of a scalar output against central
/// differences, one coordinate at a time, by perturbing leaf values and
/// replaying the tape. Relative error uses max(|analytic|, |numeric|, 1e-12)
/// as denominator. Leaf values are restored on return.
FiniteDiffReport finite_diff_check(Tape<double>& tape, Var<double> output,
                                   std::span<const Var<double>> params, double eps = 1e-5);

}  // namespace ssk

#endif  // SSK_AUTODIFF_H_
