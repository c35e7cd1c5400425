#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace invreg;

namespace {

TestConfig quick_config() {
  TestConfig c;
  c.method = Method::cume();
  c.B = 49;
  c.seed = 42;
  return c;
}

}  // namespace

TEST(Lambda1, EdgeCases) {
  const StandardizedSample s = standardize(testing_support::linear_sample(60, 4, 0.5, 1));
  const StepProcess proc = first_moment_rank(s);
  const Measure nu = Measure::continuous_uniform();
  EXPECT_NEAR(lambda1(proc, nu, 0, 60), 60.0 * cume_matrix(s).A.trace(), 1e-12);
  EXPECT_EQ(lambda1(StepProcess::zero(Shape::vector, 4, 1), nu, 1, 60), 0.0);
  EXPECT_THROW(lambda1(proc, nu, 4, 60), DomainError);
}

TEST(Lambda2, FullSpanAndRank) {
  const StandardizedSample s = standardize(testing_support::correlated_sample(60, 4, 2));
  const StepProcess proc = first_moment_rank(s);
  const Measure nu = Measure::continuous_uniform();
  Eigen::MatrixXd full(4, 4);
  full << 1, 2, 0, 0, 0, 1, 3, 0, 0, 0, 1, 1, 1, 0, 0, 2;
  EXPECT_NEAR(lambda2(proc, nu, full, s), cvm_statistic(proc, nu, Eigen::MatrixXd::Identity(4, 4), 60), 1e-12);
  Eigen::MatrixXd deficient(4, 2);
  deficient << 1, 2, 0, 0, 1, 2, 0, 0;
  EXPECT_THROW(lambda2(proc, nu, deficient, s), RankError);
  EXPECT_GE(lambda2(proc, nu, Eigen::Vector4d(0, 0, 0, 1), s), 0.0);
}

TEST(Lambda2, ZeroExactlyWhenProjectionVanishes) {
  // Z-space process supported on e1; eta chosen so Sigma^{-1/2} eta is e2
  StandardizedSample s;
  s.root_inv_cov = Eigen::MatrixXd::Identity(3, 3);
  s.root_cov = Eigen::MatrixXd::Identity(3, 3);
  s.Z = Eigen::MatrixXd::Zero(5, 3);
  s.Y = Eigen::VectorXd::LinSpaced(5, 0, 1);
  Eigen::MatrixXd vals = Eigen::MatrixXd::Zero(3, 2);
  vals(0, 0) = 0.4;
  vals(0, 1) = -0.2;
  const StepProcess proc(Shape::vector, 3, 1, {0.5, 1.0}, vals);
  EXPECT_EQ(lambda2(proc, Measure::continuous_uniform(), Eigen::Vector3d(0, 1, 0), s), 0.0);
  EXPECT_GT(lambda2(proc, Measure::continuous_uniform(), Eigen::Vector3d(1, 1, 0), s), 0.0);
}

TEST(Lambda3, CompleteBasisAndOrthonormality) {
  const StandardizedSample s = standardize(testing_support::linear_sample(60, 3, 0.5, 3));
  const StepProcess proc = first_moment_rank(s);
  const Measure nu = Measure::continuous_uniform();
  EXPECT_NEAR(lambda3(proc, nu, Eigen::MatrixXd::Identity(3, 3), 60), 0.0, 1e-15);
  Eigen::MatrixXd skew(3, 1);
  skew << 1, 1, 0;
  EXPECT_THROW(lambda3(proc, nu, skew, 60), OrthoError);
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(3, 1);
  e1(0, 0) = 1.0;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(3, 3);
  Q(0, 0) = 0.0;
  EXPECT_NEAR(lambda3(proc, nu, e1, 60), cvm_statistic(proc, nu, Q, 60), 1e-12);
}

TEST(OrthonormalHelpers, ComplementAndProjector) {
  Eigen::MatrixXd M(4, 2);
  M << 1, 0, 2, 1, 0, 3, 1, 1;
  const Eigen::MatrixXd U = orthonormal_basis(M);
  EXPECT_LT((U.transpose() * U - Eigen::Matrix2d::Identity()).norm(), 1e-12);
  const Eigen::MatrixXd C = orthonormal_complement(U);
  EXPECT_EQ(C.cols(), 2);
  EXPECT_LT((C.transpose() * U).norm(), 1e-12);
  const Eigen::MatrixXd P = projector_onto(M);
  EXPECT_LT((P * P - P).norm(), 1e-12);
  EXPECT_LT((P * M - M).norm(), 1e-12);
}

TEST(ConstrainedBoot, AlgebraicIdentities) {
  const RawSample raw = testing_support::linear_sample(50, 4, 0.5, 4);
  const StandardizedSample s = standardize(raw);
  RngStream rng(5, 0);
  auto [w, s_star] = draw_weighted_sample(raw, WeightScheme::multinomial, rng);
  for (BootVariant v : {BootVariant::b1, BootVariant::b2}) {
    const StepProcess mu = first_moment_rank(s);
    const StepProcess mu_star = bootstrap_first_moment(s_star, w, v);
    const Eigen::MatrixXd Q = eigen_basis(cume_matrix(s), 1).projector.Q;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
    const StepProcess zeroQ = constrained_boot_process(mu, mu_star, Eigen::MatrixXd::Zero(4, 4));
    const StepProcess fullQ = constrained_boot_process(mu, mu_star, I);
    const StepProcess same = constrained_boot_process(mu, mu, Q);
    const StepProcess k = constrained_boot_process(mu, mu_star, Q);
    for (int j = 0; j <= 500; ++j) {
      const double u = j / 500.0;
      EXPECT_LT((zeroQ.evaluate(u) - mu_star.evaluate(u)).norm(), 1e-12);
      EXPECT_LT((fullQ.evaluate(u) - (mu_star.evaluate(u) - mu.evaluate(u))).norm(), 1e-12);
      EXPECT_LT((same.evaluate(u) - (I - Q) * mu.evaluate(u)).norm(), 1e-12);
      EXPECT_LT((Q * k.evaluate(u) - Q * (mu_star.evaluate(u) - mu.evaluate(u))).norm(), 1e-12);
    }
  }
  EXPECT_THROW(constrained_boot_process(first_moment_rank(s), second_moment_rank(s), Eigen::MatrixXd::Identity(4, 4)),
               ShapeError);
}

TEST(PValue, Formula) {
  EXPECT_DOUBLE_EQ(bootstrap_p_value(1.0, {0.5}), 0.5);
  EXPECT_DOUBLE_EQ(bootstrap_p_value(1.0, {1.0}), 1.0);
  EXPECT_DOUBLE_EQ(bootstrap_p_value(1.0, {2.0, 0.0, 1.0, 0.3}), 3.0 / 5.0);
}

TEST(RunTest, ReportInvariantsAllKinds) {
  const RawSample raw = testing_support::correlated_sample(80, 4, 6);
  TestConfig c = quick_config();
  c.d = 1;
  c.eta = Eigen::Vector4d(0, 0, 0, 1);
  c.basis_method = Method::cume();
  for (TestKind k : {TestKind::dimension, TestKind::predictor, TestKind::method}) {
    for (BootVariant v : {BootVariant::b1, BootVariant::b2}) {
      c.variant = v;
      const TestReport r = run_test(k, raw, c);
      ASSERT_EQ(r.boot_stats.size(), 49u);
      EXPECT_DOUBLE_EQ(r.p_value, bootstrap_p_value(r.statistic, r.boot_stats));
      EXPECT_GT(r.p_value, 0.0);
      EXPECT_LE(r.p_value, 1.0);
      EXPECT_EQ(r.reject, r.p_value <= c.alpha);
      EXPECT_GE(r.statistic, 0.0);
      EXPECT_EQ(r.n, 80u);
      EXPECT_EQ(r.p, 4u);
    }
  }
}

TEST(RunTest, SingleReplicatePValue) {
  const RawSample raw = testing_support::linear_sample(40, 3, 0.5, 7);
  TestConfig c = quick_config();
  c.B = 1;
  c.eta = Eigen::Vector3d(0, 0, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    c.seed = seed;
    const double p = run_test(TestKind::predictor, raw, c).p_value;
    EXPECT_TRUE(p == 0.5 || p == 1.0);
  }
}

TEST(RunTest, DeterministicAcrossThreadCounts) {
  const RawSample raw = testing_support::linear_sample(70, 4, 0.5, 8);
  TestConfig c = quick_config();
  c.eta = Eigen::Vector4d(0, 1, 0, 1);
  c.threads = 1;
  const TestReport a = run_test(TestKind::predictor, raw, c);
  c.threads = 4;
  const TestReport b = run_test(TestKind::predictor, raw, c);
  EXPECT_EQ(a.boot_stats, b.boot_stats);
  EXPECT_EQ(a.statistic, b.statistic);
}

TEST(RunTest, UnitWeightReplicateIsZeroForPredictorTest) {
  const RawSample raw = testing_support::linear_sample(50, 4, 0.5, 9);
  TestConfig c = quick_config();
  c.eta = Eigen::Vector4d(1, 0, 0, 0);
  const CvmTest test(TestKind::predictor, raw, c);
  const StandardizedSample s_star = weighted_standardize(raw, BootstrapWeights::unit(50));
  const StepProcess mu_star =
      method_boot_process(s_star, BootstrapWeights::unit(50), BootVariant::b1, c.method);
  const StepProcess mu_k = constrained_boot_process(test.process(), mu_star, test.projector());
  EXPECT_LT(cvm_statistic(mu_k, test.measure(), predictor_projector(s_star, c.eta), 50), 1e-20);
}

TEST(RunTest, MeasureScaleLeavesPValueUnchanged) {
  const RawSample raw = testing_support::linear_sample(60, 4, 0.5, 10);
  TestConfig c = quick_config();
  c.eta = Eigen::Vector4d(0, 0, 1, 1);
  for (const Method& m : {Method::cume(), Method::sir(5)}) {
    c.method = m;
    c.measure_scale = 1.0;
    const TestReport a = run_test(TestKind::predictor, raw, c);
    c.measure_scale = 4.0;
    const TestReport b = run_test(TestKind::predictor, raw, c);
    EXPECT_NEAR(b.statistic, 4.0 * a.statistic, 1e-12 * std::max(1.0, b.statistic));
    for (std::size_t k = 0; k < a.boot_stats.size(); ++k)
      EXPECT_NEAR(b.boot_stats[k], 4.0 * a.boot_stats[k], 1e-12 * std::max(1.0, b.boot_stats[k]));
    EXPECT_EQ(a.p_value, b.p_value);
  }
}

TEST(RunTest, ConfigValidation) {
  const RawSample raw = testing_support::linear_sample(30, 3, 0.5, 11);
  TestConfig c = quick_config();
  c.B = 0;
  EXPECT_THROW(run_test(TestKind::dimension, raw, c), DomainError);
  c.B = 10;
  c.alpha = 1.0;
  EXPECT_THROW(run_test(TestKind::dimension, raw, c), DomainError);
  c.alpha = 0.05;
  c.d = 3;
  EXPECT_THROW(run_test(TestKind::dimension, raw, c), DomainError);
  c.d = 0;
  EXPECT_THROW(run_test(TestKind::predictor, raw, c), DomainError);
  c.method = Method::sir(31);
  EXPECT_THROW(run_test(TestKind::dimension, raw, c), DomainError);
}

TEST(RunTest, TiesProduceWarning) {
  RawSample raw = testing_support::linear_sample(40, 3, 0.5, 12);
  for (Eigen::Index i = 0; i < 40; ++i) raw.Y[i] = std::round(raw.Y[i]);
  TestConfig c = quick_config();
  c.B = 5;
  const TestReport r = run_test(TestKind::dimension, raw, c);
  ASSERT_FALSE(r.warnings.empty());
}

TEST(RunTest, PredictorTestDetectsActiveDirection) {
  const RawSample raw = testing_support::linear_sample(200, 4, 0.5, 13);
  TestConfig c = quick_config();
  c.B = 99;
  c.eta = Eigen::Vector4d(1, 0, 0, 0);
  EXPECT_TRUE(run_test(TestKind::predictor, raw, c).reject);
}

TEST(RunTest, MethodTestWithFixedBasis) {
  const RawSample raw = testing_support::linear_sample(100, 3, 0.5, 14);
  TestConfig c = quick_config();
  c.d = 1;
  c.beta = Eigen::Vector3d(1, 0, 0);
  const TestReport fixed = run_test(TestKind::method, raw, c);
  EXPECT_EQ(fixed.boot_stats.size(), 49u);
  c.beta = Eigen::MatrixXd();
  c.d = 2;
  EXPECT_THROW(run_test(TestKind::method, raw, c), DomainError);
  c.basis_method = Method::cume();
  c.d = 3;
  const TestReport full = run_test(TestKind::method, raw, c);
  EXPECT_LT(full.statistic, 1e-20);
}

TEST(EstimateDimension, StopsAtFirstAcceptance) {
  RawSample raw = testing_support::linear_sample(100, 3, 0.5, 15);
  RngStream rng(16, 0);
  for (Eigen::Index i = 0; i < 100; ++i) raw.Y[i] = rng.normal();
  TestConfig c = quick_config();
  const DimensionEstimate e = estimate_dimension(raw, c);
  ASSERT_FALSE(e.tests.empty());
  EXPECT_EQ(static_cast<int>(e.tests.size()), e.d + 1);
  EXPECT_FALSE(e.tests.back().reject);
  for (std::size_t k = 0; k + 1 < e.tests.size(); ++k) EXPECT_TRUE(e.tests[k].reject);
}

TEST(EstimateDimension, FindsSingleIndex) {
  const RawSample raw = testing_support::linear_sample(300, 4, 0.1, 17);
  TestConfig c = quick_config();
  c.B = 99;
  EXPECT_EQ(estimate_dimension(raw, c).d, 1);
}
