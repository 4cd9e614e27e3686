#include "shapeinv/nets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace shapeinv {

// ---------------------------------------------------------------------------
// NetParams

std::size_t NetParams::flat_size() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

const Tensor* NetParams::find(const std::string& name) const {
  for (const Tensor& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Vec NetParams::flatten() const {
  Vec flat(static_cast<Eigen::Index>(flat_size()));
  Eigen::Index off = 0;
  for (const Tensor& t : tensors_) {
    flat.segment(off, t.value.size()) = Eigen::Map<const Vec>(t.value.data(), t.value.size());
    off += t.value.size();
  }
  return flat;
}

void NetParams::unflatten(const Vec& flat) {
  if (static_cast<std::size_t>(flat.size()) != flat_size()) {
    throw Error(ErrorCode::ShapeMismatch, "flat parameter vector has " +
                                              std::to_string(flat.size()) + " entries, expected " +
                                              std::to_string(flat_size()));
  }
  Eigen::Index off = 0;
  for (Tensor& t : tensors_) {
    Eigen::Map<Vec>(t.value.data(), t.value.size()) = flat.segment(off, t.value.size());
    off += t.value.size();
  }
}

NetParams NetParams::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const Tensor& t : tensors_) out.push_back({t.name, Mat::Zero(t.value.rows(), t.value.cols())});
  return NetParams(std::move(out));
}

bool NetParams::same_layout(const NetParams& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const Tensor& a = tensors_[i];
    const Tensor& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

bool NetParams::all_finite() const {
  for (const Tensor& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

bool operator==(const NetParams& a, const NetParams& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.count(); ++i) {
    if (a[i].value != b[i].value) return false;
  }
  return true;
}

NetParams lerp(const NetParams& a, const NetParams& b, double t) {
  if (!a.same_layout(b)) throw Error(ErrorCode::ArchMismatch, "parameter layouts differ");
  NetParams out = a;
  for (std::size_t i = 0; i < a.count(); ++i) {
    out[i].value = (1.0 - t) * a[i].value + t * b[i].value;
  }
  return out;
}

Vec sample_latent(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return z;
}

namespace {

Tensor uniform_tensor(const std::string& name, std::size_t rows, std::size_t cols,
                      double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return {name, m};
}

// Fan-in scaled uniform initialisation for one affine layer.
void push_layer(std::vector<Tensor>& out, const std::string& name, std::size_t in,
                std::size_t width, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  out.push_back(uniform_tensor(name + ".weight", in, width, bound, rng));
  out.push_back(uniform_tensor(name + ".bias", 1, width, bound, rng));
}

void expect_layer(const NetParams& p, std::size_t i, std::size_t in, std::size_t out) {
  if (i + 1 >= p.count()) {
    throw Error(ErrorCode::ShapeMismatch, "too few parameter tensors");
  }
  const Mat& w = p[i].value;
  const Mat& b = p[i + 1].value;
  if (static_cast<std::size_t>(w.rows()) != in || static_cast<std::size_t>(w.cols()) != out ||
      b.rows() != 1 || static_cast<std::size_t>(b.cols()) != out) {
    throw Error(ErrorCode::ShapeMismatch, "tensor " + p[i].name + " has shape " +
                                              std::to_string(w.rows()) + "x" +
                                              std::to_string(w.cols()) + ", expected " +
                                              std::to_string(in) + "x" + std::to_string(out));
  }
}

NetParams collect_grads(const Tape& tape, const std::vector<Tape::Id>& ids, const NetParams& like) {
  NetParams out = like.zeros_like();
  for (std::size_t i = 0; i < ids.size(); ++i) out[i].value = tape.grad(ids[i]);
  return out;
}

Mat leaky_slope(const Mat& pre, double slope) {
  return leaky_relu_grad(Mat::Ones(pre.rows(), pre.cols()), pre, slope);
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(GeneratorArch arch, NetParams params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  std::size_t in = arch_.latent_dim;
  const std::size_t layers = arch_.hidden.size() + 1;
  if (params_.count() != 2 * layers) {
    throw Error(ErrorCode::ShapeMismatch, "generator expects " + std::to_string(2 * layers) +
                                              " tensors, got " + std::to_string(params_.count()));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = l < arch_.hidden.size() ? arch_.hidden[l] : 3 * arch_.points;
    expect_layer(params_, 2 * l, in, out);
    in = out;
  }
}

NetParams Generator::init_params(const GeneratorArch& arch, Rng& rng) {
  std::vector<Tensor> t;
  std::size_t in = arch.latent_dim;
  for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
    const std::size_t out = l < arch.hidden.size() ? arch.hidden[l] : 3 * arch.points;
    push_layer(t, "g.fc" + std::to_string(l), in, out, rng);
    in = out;
  }
  return NetParams(std::move(t));
}

Generator::Pass Generator::forward(const Mat& z_batch, bool grad_z, bool grad_params) const {
  if (static_cast<std::size_t>(z_batch.cols()) != arch_.latent_dim) {
    throw Error(ErrorCode::ShapeMismatch, "latent has " + std::to_string(z_batch.cols()) +
                                              " dims, generator expects " +
                                              std::to_string(arch_.latent_dim));
  }
  Pass p;
  p.batch = static_cast<std::size_t>(z_batch.rows());
  p.z = p.tape.leaf(z_batch, grad_z);
  Tape::Id h = p.z;
  const std::size_t layers = arch_.hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tape::Id w = p.tape.leaf(params_[2 * l].value, grad_params);
    const Tape::Id b = p.tape.leaf(params_[2 * l + 1].value, grad_params);
    p.param_ids.push_back(w);
    p.param_ids.push_back(b);
    h = p.tape.affine(h, w, b);
    if (l + 1 < layers) h = p.tape.leaky_relu(h, arch_.slope);
  }
  p.out = p.tape.reshape(h, static_cast<Eigen::Index>(p.batch * arch_.points), 3);
  return p;
}

PointCloud Generator::cloud_of(const Pass& pass, std::size_t sample, std::size_t points) {
  const Mat& out = pass.tape.value(pass.out);
  return PointCloud::from_matrix(
      out.middleRows(static_cast<Eigen::Index>(sample * points), static_cast<Eigen::Index>(points)));
}

PointCloud Generator::generate(const Vec& z) const {
  const Pass p = forward(z.transpose(), false, false);
  PointCloud c = cloud_of(p, 0, arch_.points);
  require_finite(c, "generator output");
  return c;
}

Generator::Grads Generator::backward(Pass& pass, const Mat& d_out) const {
  pass.tape.backward(pass.out, d_out);
  Grads g;
  g.dz = pass.tape.grad(pass.z);
  g.dparams = collect_grads(pass.tape, pass.param_ids, params_);
  return g;
}

GeneratorOutput generator_forward(const Generator& g, const LatentCode& z) {
  GeneratorOutput out;
  out.pass = g.forward(z.values.transpose(), true, true);
  out.cloud = Generator::cloud_of(out.pass, 0, g.arch().points);
  require_finite(out.cloud, "generator output");
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(DiscriminatorArch arch, NetParams params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  if (arch_.point_widths.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "discriminator needs at least one point layer");
  }
  const std::size_t layers = arch_.point_widths.size() + arch_.head_widths.size() + 1;
  if (params_.count() != 2 * layers) {
    throw Error(ErrorCode::ShapeMismatch, "discriminator expects " + std::to_string(2 * layers) +
                                              " tensors, got " + std::to_string(params_.count()));
  }
  std::size_t in = 3;
  std::size_t i = 0;
  for (std::size_t w : arch_.point_widths) {
    expect_layer(params_, i, in, w);
    in = w;
    i += 2;
  }
  for (std::size_t w : arch_.head_widths) {
    expect_layer(params_, i, in, w);
    in = w;
    i += 2;
  }
  expect_layer(params_, i, in, 1);
}

NetParams Discriminator::init_params(const DiscriminatorArch& arch, Rng& rng) {
  std::vector<Tensor> t;
  std::size_t in = 3;
  for (std::size_t l = 0; l < arch.point_widths.size(); ++l) {
    push_layer(t, "d.point" + std::to_string(l), in, arch.point_widths[l], rng);
    in = arch.point_widths[l];
  }
  for (std::size_t l = 0; l < arch.head_widths.size(); ++l) {
    push_layer(t, "d.head" + std::to_string(l), in, arch.head_widths[l], rng);
    in = arch.head_widths[l];
  }
  push_layer(t, "d.out", in, 1, rng);
  return NetParams(std::move(t));
}

Discriminator::Pass Discriminator::forward(const Mat& points, std::size_t batch, bool grad_input,
                                           bool grad_params) const {
  if (points.cols() != 3) throw Error(ErrorCode::ShapeMismatch, "discriminator input must be n x 3");
  if (points.rows() == 0 || batch == 0) throw Error(ErrorCode::EmptyCloud, "discriminator input is empty");
  if (static_cast<std::size_t>(points.rows()) % batch != 0) {
    throw Error(ErrorCode::ShapeMismatch, "batch does not divide point rows");
  }
  Pass p;
  p.batch = batch;
  p.input = p.tape.leaf(points, grad_input);
  Tape::Id h = p.input;
  std::size_t i = 0;
  auto layer = [&](bool activate) {
    const Tape::Id w = p.tape.leaf(params_[i].value, grad_params);
    const Tape::Id b = p.tape.leaf(params_[i + 1].value, grad_params);
    p.param_ids.push_back(w);
    p.param_ids.push_back(b);
    i += 2;
    h = p.tape.affine(h, w, b);
    if (activate) h = p.tape.leaky_relu(h, arch_.slope);
  };
  for (std::size_t l = 0; l < arch_.point_widths.size(); ++l) layer(true);
  p.feature = p.tape.max_pool(h, points.rows() / static_cast<Eigen::Index>(batch));
  h = p.feature;
  for (std::size_t l = 0; l < arch_.head_widths.size(); ++l) layer(true);
  layer(false);
  p.score = h;
  return p;
}

Discriminator::Grads Discriminator::backward(Pass& pass, Tape::Id root, const Mat& seed) const {
  pass.tape.backward(root, seed);
  Grads g;
  g.dinput = pass.tape.grad(pass.input);
  g.dparams = collect_grads(pass.tape, pass.param_ids, params_);
  return g;
}

Discriminator::Penalty Discriminator::gradient_penalty(const Mat& points, std::size_t batch) const {
  const Eigen::Index B = static_cast<Eigen::Index>(batch);
  const Eigen::Index n = points.rows() / B;
  const double slope = arch_.slope;
  const std::size_t L = arch_.point_widths.size();
  const std::size_t H = arch_.head_widths.size();
  auto W = [&](std::size_t layer) -> const Mat& { return params_[2 * layer].value; };
  auto bias = [&](std::size_t layer) -> const Mat& { return params_[2 * layer + 1].value; };

  // Forward, keeping activation slopes.
  std::vector<Mat> point_slope(L);
  Mat h = points;
  for (std::size_t l = 0; l < L; ++l) {
    Mat pre = h * W(l);
    pre.rowwise() += bias(l).row(0);
    point_slope[l] = leaky_slope(pre, slope);
    h = leaky_relu_of(pre, slope);
  }
  const Eigen::Index C = h.cols();
  Mat pooled(B, C);
  std::vector<Eigen::Index> winner(static_cast<std::size_t>(B * C));
  for (Eigen::Index b = 0; b < B; ++b) {
    pooled.row(b) = h.row(b * n);
    Eigen::Index* arg = winner.data() + b * C;
    std::fill(arg, arg + C, b * n);
    for (Eigen::Index r = b * n + 1; r < (b + 1) * n; ++r) {
      for (Eigen::Index c = 0; c < C; ++c) {
        if (h(r, c) > pooled(b, c)) {
          pooled(b, c) = h(r, c);
          arg[c] = r;
        }
      }
    }
  }
  std::vector<Mat> head_slope(H);
  Mat g = pooled;
  for (std::size_t j = 0; j < H; ++j) {
    Mat pre = g * W(L + j);
    pre.rowwise() += bias(L + j).row(0);
    head_slope[j] = leaky_slope(pre, slope);
    g = leaky_relu_of(pre, slope);
  }
  const Mat& w_out = W(L + H);  // last_width x 1

  // First backward: d score / d pooled, then d score / d x.
  std::vector<Mat> head_in(H + 1);  // head_in[j]: d score / d (output of head layer j-1)
  head_in[H] = Mat::Ones(B, 1) * w_out.transpose();
  for (std::size_t j = H; j-- > 0;) {
    head_in[j] = head_in[j + 1].cwiseProduct(head_slope[j]) * W(L + j).transpose();
  }
  const Mat& u = head_in[0];  // B x C
  std::vector<Mat> point_in(L + 1);
  point_in[L] = Mat::Zero(B * n, C);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index c = 0; c < C; ++c) point_in[L](winner[static_cast<std::size_t>(b * C + c)], c) = u(b, c);
  }
  for (std::size_t l = L; l-- > 0;) {
    point_in[l] = point_in[l + 1].cwiseProduct(point_slope[l]) * W(l).transpose();
  }
  const Mat& dx = point_in[0];

  Penalty out;
  out.dparams = params_.zeros_like();
  Mat gbar(B * n, 3);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double r = dx.middleRows(b * n, n).norm();
    out.grad_norms.push_back(r);
    out.value += (r - 1.0) * (r - 1.0) / static_cast<double>(B);
    const double coef = r > 0.0 ? 2.0 * (r - 1.0) / (r * static_cast<double>(B)) : 0.0;
    gbar.middleRows(b * n, n) = coef * dx.middleRows(b * n, n);
  }

  // Second backward through the linear chain dx = ((point_in[L] o S) W^T ...).
  for (std::size_t l = 0; l < L; ++l) {
    const Mat a = point_in[l + 1].cwiseProduct(point_slope[l]);
    out.dparams[2 * l].value = gbar.transpose() * a;
    gbar = (gbar * W(l)).cwiseProduct(point_slope[l]);
  }
  Mat ubar(B, C);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index c = 0; c < C; ++c) ubar(b, c) = gbar(winner[static_cast<std::size_t>(b * C + c)], c);
  }
  for (std::size_t j = 0; j < H; ++j) {
    const Mat a = head_in[j + 1].cwiseProduct(head_slope[j]);
    out.dparams[2 * (L + j)].value = ubar.transpose() * a;
    ubar = (ubar * W(L + j)).cwiseProduct(head_slope[j]);
  }
  out.dparams[2 * (L + H)].value = ubar.colwise().sum().transpose();
  return out;
}

DiscriminatorOutput discriminator_forward(const Discriminator& d, const PointCloud& x,
                                          bool grad_input) {
  require_valid(x, "discriminator input");
  DiscriminatorOutput out;
  out.pass = d.forward(x.to_matrix(), 1, grad_input, false);
  out.score = out.pass.tape.scalar(out.pass.score);
  out.feature = out.pass.tape.value(out.pass.feature).row(0).transpose();
  return out;
}

}  // namespace shapeinv
