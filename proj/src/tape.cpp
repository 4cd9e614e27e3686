#include "shapeinv/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shapeinv/hash.hpp"

namespace shapeinv {

namespace {

void check_shape(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace

// Written as a multiply by a selected constant so the compiler emits a
// branch-free blend; x * 1.0 and x * slope round exactly like the branches.
Mat leaky_relu_of(const Mat& x, double slope) {
  Mat out(x.rows(), x.cols());
  const double* in = x.data();
  double* o = out.data();
  for (Eigen::Index k = 0; k < x.size(); ++k) o[k] = in[k] * (in[k] > 0.0 ? 1.0 : slope);
  return out;
}

Mat leaky_relu_grad(const Mat& g, const Mat& x, double slope) {
  Mat out(x.rows(), x.cols());
  const double* in = x.data();
  const double* gv = g.data();
  double* o = out.data();
  for (Eigen::Index k = 0; k < x.size(); ++k) o[k] = gv[k] * (in[k] > 0.0 ? 1.0 : slope);
  return out;
}

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tape::Id Tape::leaf(Mat value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::affine(Id x, Id w, Id b) {
  const Mat& xv = nodes_[x].value;
  const Mat& wv = nodes_[w].value;
  const Mat& bv = nodes_[b].value;
  check_shape(xv.cols() == wv.rows(), "affine: input width does not match weight rows");
  check_shape(bv.rows() == 1 && bv.cols() == wv.cols(), "affine: bias must be 1 x out");
  Node n;
  n.op = Op::Affine;
  n.a = x;
  n.b = w;
  n.c = b;
  n.requires_grad = nodes_[x].requires_grad || nodes_[w].requires_grad || nodes_[b].requires_grad;
  n.value.noalias() = xv * wv;
  n.value.rowwise() += bv.row(0);
  return push(std::move(n));
}

Tape::Id Tape::leaky_relu(Id x, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = x;
  n.param = slope;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = leaky_relu_of(nodes_[x].value, slope);
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id x) {
  Node n;
  n.op = Op::Tanh;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = nodes_[x].value.array().tanh().matrix();
  return push(std::move(n));
}

Tape::Id Tape::reshape(Id x, Eigen::Index rows, Eigen::Index cols) {
  const Mat& xv = nodes_[x].value;
  check_shape(rows * cols == xv.size(), "reshape: element count mismatch");
  Node n;
  n.op = Op::Reshape;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Eigen::Map<const Mat>(xv.data(), rows, cols);
  return push(std::move(n));
}

Tape::Id Tape::max_pool(Id x, Eigen::Index segment) {
  const Mat& xv = nodes_[x].value;
  check_shape(segment > 0 && xv.rows() % segment == 0, "max_pool: rows not divisible by segment");
  const Eigen::Index groups = xv.rows() / segment;
  Node n;
  n.op = Op::MaxPool;
  n.a = x;
  n.param = static_cast<double>(segment);
  n.requires_grad = nodes_[x].requires_grad;
  n.value.resize(groups, xv.cols());
  n.choice.resize(static_cast<std::size_t>(groups * xv.cols()));
  for (Eigen::Index s = 0; s < groups; ++s) {
    // Row-wise sweep keeps memory access sequential; strict > keeps the
    // first (lowest) row on ties.
    auto best = n.value.row(s);
    best = xv.row(s * segment);
    Eigen::Index* arg = n.choice.data() + s * xv.cols();
    std::fill(arg, arg + xv.cols(), s * segment);
    for (Eigen::Index r = s * segment + 1; r < (s + 1) * segment; ++r) {
      const double* row = xv.row(r).data();
      for (Eigen::Index c = 0; c < xv.cols(); ++c) {
        if (row[c] > best[c]) {
          best[c] = row[c];
          arg[c] = r;
        }
      }
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  check_shape(nodes_[a].value.rows() == nodes_[b].value.rows() &&
                  nodes_[a].value.cols() == nodes_[b].value.cols(),
              "sub: operand shapes differ");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.value = nodes_[a].value - nodes_[b].value;
  return push(std::move(n));
}

Tape::Id Tape::sum(Id x) {
  Node n;
  n.op = Op::Sum;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Mat::Constant(1, 1, nodes_[x].value.sum());
  return push(std::move(n));
}

Tape::Id Tape::mean(Id x) {
  Node n;
  n.op = Op::Mean;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Mat::Constant(1, 1, nodes_[x].value.mean());
  return push(std::move(n));
}

Tape::Id Tape::variance(Id x) {
  const Mat& xv = nodes_[x].value;
  const double mu = xv.mean();
  Node n;
  n.op = Op::Variance;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Mat::Constant(1, 1, (xv.array() - mu).square().mean());
  return push(std::move(n));
}

Tape::Id Tape::l1(Id x) {
  Node n;
  n.op = Op::L1;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Mat::Constant(1, 1, nodes_[x].value.cwiseAbs().sum());
  return push(std::move(n));
}

Tape::Id Tape::sq_norm(Id x) {
  Node n;
  n.op = Op::SqNorm;
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  n.value = Mat::Constant(1, 1, nodes_[x].value.squaredNorm());
  return push(std::move(n));
}

void Tape::accumulate(Id id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Id root, const Mat& seed) {
  check_shape(seed.rows() == nodes_[root].value.rows() && seed.cols() == nodes_[root].value.cols(),
              "backward: seed shape differs from root value");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  accumulate(root, seed);

  for (Id id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 || n.op == Op::Leaf) continue;
    const Mat& g = n.grad;  // inputs have lower ids, so this stays put
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Affine: {
        if (nodes_[n.a].requires_grad) accumulate(n.a, g * nodes_[n.b].value.transpose());
        if (nodes_[n.b].requires_grad) accumulate(n.b, nodes_[n.a].value.transpose() * g);
        if (nodes_[n.c].requires_grad) accumulate(n.c, g.colwise().sum());
        break;
      }
      case Op::LeakyRelu: {
        const double slope = n.param;
        const Mat& x = nodes_[n.a].value;
        accumulate(n.a, leaky_relu_grad(g, x, slope));
        break;
      }
      case Op::Tanh:
        accumulate(n.a, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Reshape: {
        const Mat& x = nodes_[n.a].value;
        accumulate(n.a, Eigen::Map<const Mat>(g.data(), x.rows(), x.cols()));
        break;
      }
      case Op::MaxPool: {
        const Mat& x = nodes_[n.a].value;
        Mat dx = Mat::Zero(x.rows(), x.cols());
        for (Eigen::Index s = 0; s < g.rows(); ++s) {
          for (Eigen::Index c = 0; c < g.cols(); ++c) {
            dx(n.choice[static_cast<std::size_t>(s * g.cols() + c)], c) += g(s, c);
          }
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::Sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::Sum: {
        const Mat& x = nodes_[n.a].value;
        accumulate(n.a, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::Mean: {
        const Mat& x = nodes_[n.a].value;
        accumulate(n.a, Mat::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::Variance: {
        const Mat& x = nodes_[n.a].value;
        const double mu = x.mean();
        const double scale = 2.0 * g(0, 0) / static_cast<double>(x.size());
        accumulate(n.a, ((x.array() - mu) * scale).matrix());
        break;
      }
      case Op::L1: {
        const Mat& x = nodes_[n.a].value;
        const double gv = g(0, 0);
        accumulate(n.a, x.unaryExpr([gv](double v) {
          return v > 0.0 ? gv : (v < 0.0 ? -gv : 0.0);
        }));
        break;
      }
      case Op::SqNorm:
        accumulate(n.a, 2.0 * g(0, 0) * nodes_[n.a].value);
        break;
    }
  }
}

Mat Tape::grad(Id id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

std::uint64_t Tape::signature() const {
  Fnv1a f;
  for (const Node& n : nodes_) {
    if (n.op == Op::LeakyRelu || n.op == Op::L1) {
      const Mat& x = nodes_[n.a].value;
      std::uint64_t word = 0;
      int bits = 0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        word = (word << 1) | (x.data()[i] > 0.0 ? 1u : 0u);
        if (++bits == 64) {
          f.u64(word);
          word = 0;
          bits = 0;
        }
      }
      f.u64(word);
    } else if (n.op == Op::MaxPool) {
      for (Eigen::Index c : n.choice) f.u64(static_cast<std::uint64_t>(c));
    }
  }
  return f.value();
}

}  // namespace shapeinv
