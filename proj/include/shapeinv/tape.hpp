#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

/// x > 0 ? x : slope * x, elementwise.
Mat leaky_relu_of(const Mat& x, double slope);
/// g * (x > 0 ? 1 : slope), elementwise.
Mat leaky_relu_grad(const Mat& g, const Mat& x, double slope);

/// Recorded computation over dense row-major matrices with a single reverse
/// sweep. Nodes are appended in evaluation order, so reverse index order is a
/// valid topological order for backpropagation.
///
/// Piecewise primitives (leaky ReLU, max-pool, L1) record their discrete choices;
/// `signature()` hashes them so finite-difference checks can tell when a
/// perturbation crossed a kink.
class Tape {
 public:
  using Id = std::size_t;

  Id leaf(Mat value, bool requires_grad);

  /// x (n x in) * w (in x out) + b (1 x out), bias broadcast over rows.
  Id affine(Id x, Id w, Id b);
  Id leaky_relu(Id x, double slope);
  Id tanh(Id x);
  /// Row-major reinterpretation; rows * cols must match.
  Id reshape(Id x, Eigen::Index rows, Eigen::Index cols);
  /// Column-wise max over consecutive blocks of `segment` rows; one output
  /// row per block. Ties pick the lowest row.
  Id max_pool(Id x, Eigen::Index segment);
  Id sub(Id a, Id b);
  /// Scalar (1 x 1) reductions over all entries.
  Id sum(Id x);
  Id mean(Id x);
  Id variance(Id x);  // population variance
  Id l1(Id x);
  Id sq_norm(Id x);

  const Mat& value(Id id) const { return nodes_[id].value; }
  double scalar(Id id) const { return nodes_[id].value(0, 0); }

  /// Reverse sweep from `root` seeded with d(out)/d(root). Gradients
  /// accumulate into every node that requires them.
  void backward(Id root, const Mat& seed);
  void backward(Id root) { backward(root, Mat::Ones(1, 1)); }

  /// Gradient of the last backward w.r.t. `id`; zeros if none reached it.
  Mat grad(Id id) const;

  std::uint64_t signature() const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Op { Leaf, Affine, LeakyRelu, Tanh, Reshape, MaxPool, Sub, Sum, Mean, Variance, L1, SqNorm };

  struct Node {
    Op op = Op::Leaf;
    Id a = 0, b = 0, c = 0;
    double param = 0.0;
    bool requires_grad = false;
    Mat value;
    Mat grad;  // empty until reached by backward
    std::vector<Eigen::Index> choice;  // max-pool winners
  };

  Id push(Node n);
  void accumulate(Id id, const Mat& g);

  std::vector<Node> nodes_;
};

}  // namespace shapeinv
