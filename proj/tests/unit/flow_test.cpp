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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lrseg/flow.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lrseg;
using testing_util::random_matrix;

namespace {

FlowConfig small_config(int hidden = 16) {
  FlowConfig cfg;
  cfg.hidden = hidden;
  return cfg;
}

FlowModel random_flow(int dim, std::uint64_t seed, const FlowConfig& cfg) {
  FlowModel m = make_identity_flow(dim, cfg);
  randomize_flow(m, seed);
  return m;
}

}  // namespace

TEST(Flow, IdentityMapsToItself) {
  Rng rng = make_rng(1);
  const FlowModel m = make_identity_flow(5, small_config());
  const Matrix x = random_matrix(rng, 20, 5, 2.0);
  const auto r = flow_forward(m, x);
  EXPECT_LT((r.z - x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(r.log_det.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Flow, SingleActnormScalesAndShifts) {
  FlowConfig cfg = small_config();
  cfg.blocks = 1;
  FlowModel m = make_identity_flow(1, cfg);
  m.blocks[0].log_scale[0] = std::log(2.0);
  const std::vector<double> x{3.0};
  const auto r = flow_forward(m, x);
  EXPECT_NEAR(r.z[0], 6.0, 1e-12);
  EXPECT_NEAR(r.log_det, std::numbers::ln2, 1e-12);
}

TEST(Flow, IdentityDensityIsStandardNormal) {
  const FlowModel m1 = make_identity_flow(1, small_config());
  EXPECT_NEAR(flow_log_density(m1, std::vector<double>{0.0}), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  const FlowModel m2 = make_identity_flow(2, small_config());
  EXPECT_NEAR(flow_log_density(m2, std::vector<double>{0.0, 0.0}), -std::log(2 * std::numbers::pi), 1e-12);
}

TEST(FlowProperty, InvertibleAndLogDetConsistent) {
  Rng rng = make_rng(2);
  for (int dim : {2, 4, 8}) {
    for (int trial = 0; trial < 10; ++trial) {
      const FlowModel m = random_flow(dim, derive_seed(dim, trial), small_config());
      const Matrix x = random_matrix(rng, 16, dim, 2.0);
      const auto c = testing_util::check_flow(m, x, dim <= 6);
      EXPECT_LE(c.inverse_error, 1e-5) << "dim " << dim << " trial " << trial;
      EXPECT_LE(c.round_trip_log_det, 1e-6) << "dim " << dim << " trial " << trial;
      if (dim <= 6) {
        EXPECT_LE(c.log_det_error, 1e-3) << "dim " << dim << " trial " << trial;
      }
    }
  }
}

TEST(FlowProperty, OddDimensionsWork) {
  Rng rng = make_rng(3);
  for (int dim : {1, 3, 5}) {
    const FlowModel m = random_flow(dim, 7 + dim, small_config());
    const auto c = testing_util::check_flow(m, random_matrix(rng, 8, dim), true);
    EXPECT_LE(c.inverse_error, 1e-5);
    EXPECT_LE(c.log_det_error, 1e-3);
  }
}

TEST(FlowProperty, GradientMatchesCentralDifferencesSmallWidth) {
  Rng rng = make_rng(4);
  for (int dim : {2, 3, 4}) {
    const FlowModel m = random_flow(dim, 40 + dim, small_config(6));
    const auto gc = testing_util::check_flow_gradient(m, random_matrix(rng, 8, dim, 1.5), 1e-5, 1e-6);
    EXPECT_LE(gc.max_rel_error, 1e-4) << "dim " << dim << " over " << gc.checked << " parameters";
  }
}

TEST(FlowProperty, GradientMatchesCentralDifferencesFullWidth) {
  Rng rng = make_rng(5);
  const FlowModel m = random_flow(4, 99, FlowConfig{});
  const auto gc = testing_util::check_flow_gradient(m, random_matrix(rng, 16, 4, 1.5), 1e-5, 1e-6, 7);
  EXPECT_GT(gc.checked, 5000u);
  EXPECT_LE(gc.max_rel_error, 1e-4);
}

TEST(Flow, ActnormInitStandardizes) {
  Rng rng = make_rng(6);
  FlowModel m = make_identity_flow(1, small_config());
  Matrix batch(4, 1);
  batch << 3.0, 7.0, 3.0, 7.0;  // mean 5, population sd 2
  actnorm_init(m.blocks[0], batch);
  EXPECT_NEAR(std::exp(m.blocks[0].log_scale[0]), 0.5, 1e-12);
  EXPECT_NEAR(m.blocks[0].bias[0], -2.5, 1e-12);

  FlowModel m3 = make_identity_flow(3, small_config());
  const Matrix x = (random_matrix(rng, 200, 3, 4.0).array() + 10.0).matrix();
  actnorm_init(m3.blocks[0], x);
  FlowBlock& b = m3.blocks[0];
  const Matrix y = ((x.array().rowwise() * b.log_scale.array().exp().transpose()).rowwise() + b.bias.array().transpose()).matrix();
  EXPECT_LT(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::RowVectorXd var = y.array().square().colwise().mean();
  EXPECT_LT((var.array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(Flow, ActnormInitConstantBatchIsFinite) {
  FlowModel m = make_identity_flow(2, small_config());
  const Matrix batch = Matrix::Constant(5, 2, 3.0);
  actnorm_init(m.blocks[0], batch);
  EXPECT_TRUE(m.blocks[0].log_scale.allFinite());
  EXPECT_TRUE(m.blocks[0].bias.allFinite());
}

TEST(Flow, ActnormInitNeedsTwoSamples) {
  FlowModel m = make_identity_flow(2, small_config());
  try {
    actnorm_init(m.blocks[0], Matrix::Zero(1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyBatch);
  }
}

TEST(Flow, TrainingFitsStandardNormal) {
  Rng rng = make_rng(7);
  std::normal_distribution<double> n01;
  Matrix train(2000, 2), test(1000, 2);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = n01(rng);
  for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = n01(rng);
  FlowTrainConfig tc;
  tc.seed = 3;
  tc.epochs = 30;
  const FlowModel m = train_flow(train, small_config(32), tc);
  const double per_dim = flow_log_density(m, test).mean() / 2.0;
  EXPECT_NEAR(per_dim, -0.5 * std::log(2 * std::numbers::pi * std::numbers::e), 0.2);
}

TEST(Flow, TrainedOneDimensionalDensityIntegratesToOne) {
  Rng rng = make_rng(8);
  std::normal_distribution<double> a(-2.0, 0.7), b(1.5, 1.0);
  Matrix train(1500, 1);
  for (Eigen::Index i = 0; i < train.rows(); ++i) train(i, 0) = i % 3 ? b(rng) : a(rng);
  FlowTrainConfig tc;
  tc.seed = 11;
  tc.epochs = 20;
  const FlowModel m = train_flow(train, small_config(), tc);
  const double mass = oracle::simpson(
      [&](double v) { return std::exp(flow_log_density(m, std::vector<double>{v})); }, -30.0, 30.0, 60000);
  EXPECT_NEAR(mass, 1.0, 5e-3);
}

TEST(Flow, TrainingImprovesHeldOutLikelihood) {
  Rng rng = make_rng(9);
  Matrix data(1200, 2);
  std::uniform_real_distribution<double> t(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double a = t(rng);
    data(i, 0) = std::cos(a) + noise(rng);
    data(i, 1) = std::sin(a) + noise(rng);
  }
  const Matrix train = data.topRows(800), test = data.bottomRows(400);
  FlowTrainConfig tc;
  tc.seed = 5;
  tc.epochs = 0;
  const FlowModel init = train_flow(train, small_config(32), tc);
  tc.epochs = 40;
  FlowTrainTrace trace;
  const FlowModel trained = train_flow(train, small_config(32), tc, &trace);
  EXPECT_GT(flow_log_density(trained, test).mean(), flow_log_density(init, test).mean() + 0.3);
  ASSERT_EQ(trace.epoch_loss.size(), 40u);
  EXPECT_LT(trace.epoch_loss.back(), trace.epoch_loss.front());
}

TEST(Flow, ZeroEpochsReturnsActnormInitializedModel) {
  Rng rng = make_rng(10);
  const Matrix x = (random_matrix(rng, 50, 2, 3.0).array() + 4.0).matrix();
  FlowTrainConfig tc;
  tc.epochs = 0;
  tc.batch_size = 50;
  const FlowModel m = train_flow(x, small_config(), tc);
  const auto z = flow_forward(m, x).z;
  EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Flow, TrainingIsDeterministic) {
  Rng rng = make_rng(11);
  const Matrix x = random_matrix(rng, 300, 3);
  FlowTrainConfig tc;
  tc.seed = 42;
  tc.epochs = 3;
  const FlowModel a = train_flow(x, small_config(), tc), b = train_flow(x, small_config(), tc);
  EXPECT_EQ(flow_log_density(a, x), flow_log_density(b, x));
}

TEST(Flow, Errors) {
  FlowTrainConfig tc;
  EXPECT_THROW(train_flow(Matrix::Zero(1, 2), small_config(), tc), Error);
  try {
    train_flow(Matrix::Zero(0, 2), small_config(), tc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyData);
  }
  const FlowModel m = make_identity_flow(3, small_config());
  EXPECT_THROW(flow_forward(m, Matrix::Zero(2, 4)), Error);
  EXPECT_THROW(make_identity_flow(0), Error);
}
