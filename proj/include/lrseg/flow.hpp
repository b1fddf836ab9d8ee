// Copyright 2026 The lrseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Neural spline flow over flat feature vectors. Each block applies, in order:
//   actnorm   y = x * exp(log_scale) + bias
//   mixing    y = W x,  W = P L U  (fixed permutation, unit-lower L, upper U)
//   coupling  first ceil(C/2) dims pass through and condition an MLP whose
//             output parameterizes a rational-quadratic spline per remaining dim
// The data are mapped to a standard normal prior. Gradients are hand-written
// reverse mode through every layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lrseg/error.hpp"
#include "lrseg/random.hpp"
#include "lrseg/spline.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

struct FlowConfig {
  int blocks = 3;
  int bins = 8;
  double tail_bound = 3.0;
  int hidden = 64;
  int hidden_layers = 4;
  double min_bin = 1e-3;
  double min_derivative = 1e-3;

  [[nodiscard]] SplineShape spline() const noexcept { return {bins, tail_bound, min_bin, min_derivative}; }
};

struct FlowTrainConfig {
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 256;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline constexpr double kMinMixingDiagonal = 1e-8;

struct FlowBlock {
  // actnorm
  Vector log_scale;
  Vector bias;
  // mixing; perm and sign are fixed, only the strict triangles of lower/upper are used
  std::vector<int> perm;
  Vector sign;
  Matrix lower;
  Matrix upper;
  Vector log_abs_diag;
  // conditioner: weights[l] is out x in, last entry is the output layer
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

struct FlowModel {
  int dim = 0;
  FlowConfig config;
  std::vector<FlowBlock> blocks;

  [[nodiscard]] int condition_dims() const noexcept { return (dim + 1) / 2; }
  [[nodiscard]] int transform_dims() const noexcept { return dim / 2; }
};

/// Calls f(std::span<double>) for every trainable tensor, in a fixed order.
template <class Model, class F>
void for_each_tensor(Model& m, F&& f) {
  auto span_of = [](auto& t) { return std::span(t.data(), static_cast<std::size_t>(t.size())); };
  for (auto& b : m.blocks) {
    f(span_of(b.log_scale));
    f(span_of(b.bias));
    f(span_of(b.lower));
    f(span_of(b.upper));
    f(span_of(b.log_abs_diag));
    for (auto& w : b.weights) f(span_of(w));
    for (auto& v : b.biases) f(span_of(v));
  }
}

inline std::size_t parameter_count(FlowModel& m) {
  std::size_t n = 0;
  for_each_tensor(m, [&](std::span<double> t) { n += t.size(); });
  return n;
}

/// Same layout, every trainable value zero.
inline FlowModel zeros_like(const FlowModel& m) {
  FlowModel z = m;
  for_each_tensor(z, [](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
  return z;
}

/// Identity flow: unit actnorm, P = L = U = I, identity splines.
inline FlowModel make_identity_flow(int dim, const FlowConfig& cfg = {}) {
  if (dim < 1) throw Error(Errc::DimMismatch, "flow dimensionality must be positive");
  if (cfg.blocks < 1 || cfg.hidden < 1 || cfg.hidden_layers < 1)
    throw Error(Errc::InvalidArgument, "flow needs at least one block, hidden layer and unit");
  FlowModel m{dim, cfg, {}};
  const int d_cond = m.condition_dims();
  const int d_out = m.transform_dims() * cfg.spline().param_count();
  for (int bi = 0; bi < cfg.blocks; ++bi) {
    FlowBlock b;
    b.log_scale = Vector::Zero(dim);
    b.bias = Vector::Zero(dim);
    b.perm.resize(static_cast<std::size_t>(dim));
    std::iota(b.perm.begin(), b.perm.end(), 0);
    b.sign = Vector::Ones(dim);
    b.lower = Matrix::Zero(dim, dim);
    b.upper = Matrix::Zero(dim, dim);
    b.log_abs_diag = Vector::Zero(dim);
    if (d_out > 0) {
      int in = d_cond;
      for (int l = 0; l < cfg.hidden_layers; ++l) {
        b.weights.push_back(Matrix::Zero(cfg.hidden, in));
        b.biases.push_back(Vector::Zero(cfg.hidden));
        in = cfg.hidden;
      }
      b.weights.push_back(Matrix::Zero(d_out, in));
      b.biases.push_back(Vector::Zero(d_out));
    }
    m.blocks.push_back(std::move(b));
  }
  return m;
}

/// Training initialization: random fixed permutations, Glorot-uniform hidden
/// layers, zero output layer (so every coupling starts as the identity).
inline FlowModel init_flow(int dim, const FlowConfig& cfg, std::uint64_t seed) {
  FlowModel m = make_identity_flow(dim, cfg);
  Rng rng = make_rng(seed, 0x666c6f77);
  for (auto& b : m.blocks) {
    std::shuffle(b.perm.begin(), b.perm.end(), rng);
    for (std::size_t l = 0; l + 1 < b.weights.size(); ++l) {
      auto& w = b.weights[l];
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    }
  }
  return m;
}

/// Fills every trainable tensor with random values of moderate size and
/// draws random permutations and signs. For property tests.
inline void randomize_flow(FlowModel& m, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed, 0x72616e64);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& b : m.blocks) {
    std::shuffle(b.perm.begin(), b.perm.end(), rng);
    for (Eigen::Index i = 0; i < b.sign.size(); ++i) b.sign[i] = u(rng) < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < b.log_scale.size(); ++i) b.log_scale[i] = 0.3 * scale * u(rng);
    for (Eigen::Index i = 0; i < b.bias.size(); ++i) b.bias[i] = 0.3 * scale * n01(rng);
    for (Eigen::Index i = 0; i < b.lower.size(); ++i) b.lower.data()[i] = 0.3 * scale * n01(rng);
    for (Eigen::Index i = 0; i < b.upper.size(); ++i) b.upper.data()[i] = 0.3 * scale * n01(rng);
    for (Eigen::Index i = 0; i < b.log_abs_diag.size(); ++i) b.log_abs_diag[i] = 0.2 * scale * u(rng);
    for (std::size_t l = 0; l < b.weights.size(); ++l) {
      auto& w = b.weights[l];
      const double sd = scale / std::sqrt(static_cast<double>(w.cols()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * n01(rng);
      for (Eigen::Index i = 0; i < b.biases[l].size(); ++i) b.biases[l][i] = 0.3 * scale * n01(rng);
    }
  }
}

namespace detail {

inline Matrix unit_lower(const FlowBlock& b) {
  Matrix l = b.lower.triangularView<Eigen::StrictlyLower>();
  l.diagonal().setOnes();
  return l;
}

inline Matrix upper_factor(const FlowBlock& b) {
  Matrix u = b.upper.triangularView<Eigen::StrictlyUpper>();
  u.diagonal() = (b.sign.array() * b.log_abs_diag.array().exp()).matrix();
  return u;
}

// W = P L U with (P v)[i] = v[perm[i]].
inline Matrix mixing_matrix(const FlowBlock& b, const Matrix& l, const Matrix& u) {
  const Matrix lu = l * u;
  Matrix w(lu.rows(), lu.cols());
  for (Eigen::Index i = 0; i < lu.rows(); ++i) w.row(i) = lu.row(b.perm[static_cast<std::size_t>(i)]);
  return w;
}

struct BlockTape {
  Matrix act_in;    // actnorm input
  Matrix mix_in;    // mixing input
  Matrix cpl_in;    // coupling input
  std::vector<Matrix> hidden;  // hidden[0] = conditioner input, then post-tanh activations
  Matrix spline_params;
  Matrix l, u, w;
};

// MLP on the conditioning half. Fills tape->hidden when a tape is given.
inline Matrix conditioner(const FlowBlock& b, const Matrix& cond, std::vector<Matrix>* hidden) {
  Matrix h = cond;
  if (hidden) hidden->push_back(h);
  for (std::size_t l = 0; l + 1 < b.weights.size(); ++l) {
    Matrix a = h * b.weights[l].transpose();
    a.rowwise() += b.biases[l].transpose();
    h = a.array().tanh().matrix();
    if (hidden) hidden->push_back(h);
  }
  Matrix out = h * b.weights.back().transpose();
  out.rowwise() += b.biases.back().transpose();
  return out;
}

// Forward through one block, row per sample; adds per-sample log-dets.
inline Matrix block_forward(const FlowModel& m, const FlowBlock& b, Matrix x, Vector& log_det, BlockTape* tape) {
  const Eigen::Index n = x.rows();
  if (tape) tape->act_in = x;
  x = (x.array().rowwise() * b.log_scale.array().exp().transpose()).matrix();
  x.rowwise() += b.bias.transpose();
  log_det.array() += b.log_scale.sum();

  if (tape) tape->mix_in = x;
  const Matrix l = unit_lower(b);
  const Matrix u = upper_factor(b);
  const Matrix w = mixing_matrix(b, l, u);
  x = x * w.transpose();
  log_det.array() += b.log_abs_diag.sum();
  if (tape) {
    tape->l = l;
    tape->u = u;
    tape->w = w;
    tape->cpl_in = x;
  }

  const int dc = m.condition_dims();
  const int dt = m.transform_dims();
  if (dt == 0) return x;
  const SplineShape shape = m.config.spline();
  const int np = shape.param_count();
  const Matrix params = conditioner(b, x.leftCols(dc), tape ? &tape->hidden : nullptr);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < dt; ++j) {
      const auto r = rq_spline_forward(x(i, dc + j), std::span<const double>(params.row(i).data() + j * np, static_cast<std::size_t>(np)), shape);
      x(i, dc + j) = r.value;
      log_det[i] += r.log_det;
    }
  }
  if (tape) tape->spline_params = params;
  return x;
}

// Reverse pass through one block. `g` is dLoss/d(block output), `g_log_det`
// is dLoss/d(log_det) per sample. Returns dLoss/d(block input).
inline Matrix block_backward(const FlowModel& m, const FlowBlock& b, const BlockTape& tape, Matrix g,
                             const Vector& g_log_det, FlowBlock& grad) {
  const Eigen::Index n = g.rows();
  const double g_ld_total = g_log_det.sum();
  const int dc = m.condition_dims();
  const int dt = m.transform_dims();

  // coupling
  if (dt > 0) {
    const SplineShape shape = m.config.spline();
    const int np = shape.param_count();
    Matrix g_params = Matrix::Zero(n, tape.spline_params.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < dt; ++j) {
        g(i, dc + j) = rq_spline_backward(
            tape.cpl_in(i, dc + j),
            std::span<const double>(tape.spline_params.row(i).data() + j * np, static_cast<std::size_t>(np)), shape,
            g(i, dc + j), g_log_det[i], std::span<double>(g_params.row(i).data() + j * np, static_cast<std::size_t>(np)));
      }
    }
    const std::size_t layers = b.weights.size();
    Matrix gh = g_params;
    for (std::size_t l = layers; l-- > 0;) {
      const Matrix& h_in = tape.hidden[l];
      if (l + 1 < layers) {
        // tape.hidden[l + 1] = tanh(h_in W^T + b)
        gh = (gh.array() * (1.0 - tape.hidden[l + 1].array().square())).matrix();
      }
      grad.weights[l] += gh.transpose() * h_in;
      grad.biases[l] += gh.colwise().sum().transpose();
      gh = gh * b.weights[l];
    }
    g.leftCols(dc) += gh;
  }

  // mixing: y = W x
  const Matrix g_w = g.transpose() * tape.mix_in;
  g = g * tape.w;
  Matrix g_lu(g_w.rows(), g_w.cols());
  for (Eigen::Index i = 0; i < g_w.rows(); ++i) g_lu.row(b.perm[static_cast<std::size_t>(i)]) = g_w.row(i);
  const Matrix g_l = g_lu * tape.u.transpose();
  const Matrix g_u = tape.l.transpose() * g_lu;
  grad.lower += Matrix(g_l.triangularView<Eigen::StrictlyLower>());
  grad.upper += Matrix(g_u.triangularView<Eigen::StrictlyUpper>());
  grad.log_abs_diag.array() += g_u.diagonal().array() * tape.u.diagonal().array() + g_ld_total;

  // actnorm: y = x * s + b
  const Vector s = b.log_scale.array().exp();
  grad.bias += g.colwise().sum().transpose();
  grad.log_scale.array() += (g.array() * tape.act_in.array()).colwise().sum().transpose() * s.array() + g_ld_total;
  return (g.array().rowwise() * s.array().transpose()).matrix();
}

inline Matrix block_inverse(const FlowModel& m, const FlowBlock& b, Matrix y, Vector& log_det) {
  const Eigen::Index n = y.rows();
  const int dc = m.condition_dims();
  const int dt = m.transform_dims();
  if (dt > 0) {
    const SplineShape shape = m.config.spline();
    const int np = shape.param_count();
    const Matrix params = conditioner(b, y.leftCols(dc), nullptr);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < dt; ++j) {
        const auto r = rq_spline_inverse(y(i, dc + j), std::span<const double>(params.row(i).data() + j * np, static_cast<std::size_t>(np)), shape);
        y(i, dc + j) = r.value;
        log_det[i] += r.log_det;
      }
    }
  }

  // undo the permutation, then solve L U x = v
  const Matrix l = unit_lower(b);
  const Matrix u = upper_factor(b);
  Matrix v(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.cols(); ++i) v.col(b.perm[static_cast<std::size_t>(i)]) = y.col(i);
  Matrix sol = v.transpose();
  l.triangularView<Eigen::UnitLower>().solveInPlace(sol);
  u.triangularView<Eigen::Upper>().solveInPlace(sol);
  y = sol.transpose();
  log_det.array() -= b.log_abs_diag.sum();

  y.rowwise() -= b.bias.transpose();
  y = (y.array().rowwise() * (-b.log_scale.array()).exp().transpose()).matrix();
  log_det.array() -= b.log_scale.sum();
  return y;
}

inline void check_dim(const FlowModel& m, Eigen::Index cols) {
  if (cols != m.dim)
    throw Error(Errc::DimMismatch, "input has " + std::to_string(cols) + " dims, flow has " + std::to_string(m.dim));
}

inline double standard_normal_log_density(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  return -0.5 * z.squaredNorm() - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

struct FlowBatchResult {
  Matrix z;
  Vector log_det;
};

struct FlowResult {
  Vector z;
  double log_det = 0.0;
};

/// Maps rows of x to latent space. log_det[i] = log |det dz/dx| at row i.
inline FlowBatchResult flow_forward(const FlowModel& m, const Matrix& x) {
  detail::check_dim(m, x.cols());
  FlowBatchResult r{x, Vector::Zero(x.rows())};
  for (const auto& b : m.blocks) r.z = detail::block_forward(m, b, std::move(r.z), r.log_det, nullptr);
  return r;
}

inline FlowResult flow_forward(const FlowModel& m, std::span<const double> x) {
  const Matrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  auto r = flow_forward(m, row);
  return {r.z.row(0).transpose(), r.log_det[0]};
}

/// Maps latent rows back to data space; log_det is log |det dx/dz|.
inline FlowBatchResult flow_inverse(const FlowModel& m, const Matrix& z) {
  detail::check_dim(m, z.cols());
  FlowBatchResult r{z, Vector::Zero(z.rows())};
  for (auto it = m.blocks.rbegin(); it != m.blocks.rend(); ++it)
    r.z = detail::block_inverse(m, *it, std::move(r.z), r.log_det);
  return r;
}

inline FlowResult flow_inverse(const FlowModel& m, std::span<const double> z) {
  const Matrix row = Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  auto r = flow_inverse(m, row);
  return {r.z.row(0).transpose(), r.log_det[0]};
}

inline Vector flow_log_density(const FlowModel& m, const Matrix& x) {
  const auto r = flow_forward(m, x);
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = detail::standard_normal_log_density(r.z.row(i)) + r.log_det[i];
  return out;
}

inline double flow_log_density(const FlowModel& m, std::span<const double> x) {
  const auto r = flow_forward(m, x);
  return detail::standard_normal_log_density(r.z.transpose()) + r.log_det;
}

/// Negative mean log-density of the batch and its gradient w.r.t. every
/// trainable tensor (same layout as the model).
inline std::pair<double, FlowModel> flow_loss_and_gradient(const FlowModel& m, const Matrix& batch) {
  detail::check_dim(m, batch.cols());
  const Eigen::Index n = batch.rows();
  if (n == 0) throw Error(Errc::EmptyBatch, "empty batch");
  std::vector<detail::BlockTape> tapes(m.blocks.size());
  Matrix z = batch;
  Vector log_det = Vector::Zero(n);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) z = detail::block_forward(m, m.blocks[i], std::move(z), log_det, &tapes[i]);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loss -= detail::standard_normal_log_density(z.row(i)) + log_det[i];
  loss /= static_cast<double>(n);

  FlowModel grad = zeros_like(m);
  Matrix g = z / static_cast<double>(n);
  const Vector g_log_det = Vector::Constant(n, -1.0 / static_cast<double>(n));
  for (std::size_t i = m.blocks.size(); i-- > 0;)
    g = detail::block_backward(m, m.blocks[i], tapes[i], std::move(g), g_log_det, grad.blocks[i]);
  return {loss, std::move(grad)};
}

inline double flow_loss(const FlowModel& m, const Matrix& batch) {
  return -flow_log_density(m, batch).mean();
}

/// Data-dependent actnorm initialization: the block's actnorm output on
/// `batch` gets zero mean and unit (population) standard deviation per dim.
/// Standard deviations below 1e-6 are floored.
inline void actnorm_init(FlowBlock& b, const Matrix& batch) {
  if (batch.rows() < 2) throw Error(Errc::EmptyBatch, "actnorm initialization needs at least two samples");
  if (batch.cols() != b.bias.size()) throw Error(Errc::DimMismatch, "batch dimensionality does not match layer");
  const Eigen::RowVectorXd mean = batch.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((batch.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(batch.rows())).sqrt().max(1e-6).matrix();
  b.log_scale = (-sd.array().log()).matrix().transpose();
  b.bias = (-mean.array() / sd.array()).matrix().transpose();
}

/// Initializes each block's actnorm on the batch as propagated through the
/// preceding blocks.
inline void initialize_actnorms(FlowModel& m, const Matrix& batch) {
  detail::check_dim(m, batch.cols());
  Matrix x = batch;
  Vector ld = Vector::Zero(batch.rows());
  for (auto& b : m.blocks) {
    actnorm_init(b, x);
    x = detail::block_forward(m, b, std::move(x), ld, nullptr);
  }
}

struct FlowTrainTrace {
  std::vector<double> epoch_loss;
};

namespace detail {

inline Matrix gather_rows(const Matrix& data, std::span<const Eigen::Index> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), data.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(idx[i]);
  return out;
}

}  // namespace detail

/// Maximum-likelihood training by mini-batch Adam on the exact gradient.
/// Actnorms are initialized on the first (shuffled) batch; with zero epochs
/// that initialized model is returned as is.
inline FlowModel train_flow(const Matrix& data, const FlowConfig& cfg, const FlowTrainConfig& tc,
                            FlowTrainTrace* trace = nullptr) {
  if (data.rows() < 2) throw Error(Errc::EmptyData, "flow training needs at least two samples");
  if (tc.batch_size < 2) throw Error(Errc::InvalidArgument, "batch size must be at least 2");
  if (!data.allFinite()) throw Error(Errc::NonFiniteValue, "training data contains non-finite values");
  const Eigen::Index n = data.rows();
  FlowModel m = init_flow(static_cast<int>(data.cols()), cfg, derive_seed(tc.seed, 1));
  Rng rng = make_rng(tc.seed, 2);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto batch = static_cast<std::size_t>(std::min<Eigen::Index>(tc.batch_size, n));
  initialize_actnorms(m, detail::gather_rows(data, std::span<const Eigen::Index>(order.data(), batch)));

  FlowModel m1 = zeros_like(m), m2 = zeros_like(m);
  const double min_log_diag = std::log(kMinMixingDiagonal);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      if (len < 2 && batches > 0) break;
      const Matrix xb = detail::gather_rows(data, std::span<const Eigen::Index>(order.data() + start, len));
      auto [loss, grad] = flow_loss_and_gradient(m, xb);
      if (!std::isfinite(loss)) throw Error(Errc::NumericFailure, "flow loss diverged at epoch " + std::to_string(epoch));
      epoch_loss += loss;
      ++batches;
      ++step;
      const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      std::vector<std::span<double>> p, g, s1, s2;
      for_each_tensor(m, [&](std::span<double> t) { p.push_back(t); });
      for_each_tensor(grad, [&](std::span<double> t) { g.push_back(t); });
      for_each_tensor(m1, [&](std::span<double> t) { s1.push_back(t); });
      for_each_tensor(m2, [&](std::span<double> t) { s2.push_back(t); });
      for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          const double gi = g[t][i];
          s1[t][i] = tc.beta1 * s1[t][i] + (1.0 - tc.beta1) * gi;
          s2[t][i] = tc.beta2 * s2[t][i] + (1.0 - tc.beta2) * gi * gi;
          p[t][i] -= tc.step_size * (s1[t][i] / c1) / (std::sqrt(s2[t][i] / c2) + tc.epsilon);
        }
      }
      for (auto& b : m.blocks) b.log_abs_diag = b.log_abs_diag.cwiseMax(min_log_diag);
    }
    if (trace) trace->epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
  }
  return m;
}

}  // namespace lrseg
