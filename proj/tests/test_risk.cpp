#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "shrinklab/risk.hpp"
#include "test_util.hpp"

using namespace shrinklab;
using testutil::padded;
using testutil::random_matrix;

TEST(Summarize, MeanAndStandardError) {
  const std::vector<double> v{1, 2, 3, 4};
  const RiskEstimate r = summarize(v);
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-14);
  EXPECT_EQ(r.n_reps, 4);
}

TEST(FrobeniusRisk, MleRisk) {
  const Matrix m = random_matrix(10, 3, 1, 2.0);
  const Estimator mle = closed_form_estimator(ClosedFormKind::mle);
  const RiskEstimate r1 = frobenius_risk(mle, m, SampleSize(1), 4000, RngSeed{1});
  EXPECT_LT(std::abs(r1.mean - 30.0), 4.0 * r1.std_error);
  const RiskEstimate r10 = frobenius_risk(mle, m, SampleSize(10), 4000, RngSeed{2});
  EXPECT_LT(std::abs(r10.mean - 3.0), 4.0 * r10.std_error);
}

TEST(FrobeniusRisk, ControlVariateIsExactForMle) {
  ReplicateOptions opts;
  opts.control_variate = true;
  const RiskEstimate r =
      frobenius_risk(closed_form_estimator(ClosedFormKind::mle), Matrix::Zero(10, 3), SampleSize(1), 100, RngSeed{3}, opts);
  EXPECT_NEAR(r.mean, 30.0, 1e-10);
  EXPECT_NEAR(r.std_error, 0.0, 1e-10);
}

TEST(FrobeniusRisk, ReplicatesAreReproducible) {
  const Estimator em = closed_form_estimator(ClosedFormKind::em);
  const Matrix m = padded({3, 1, 0}, 10);
  ReplicateOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const RiskEstimate a = frobenius_risk(em, m, SampleSize(1), 200, RngSeed{9}, one);
  const RiskEstimate b = frobenius_risk(em, m, SampleSize(1), 200, RngSeed{9}, many);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(FrobeniusRisk, EmAtOriginMatchesBruteForce) {
  // independent generator and loop
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> normal;
  const int reps = 20000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Matrix y(10, 3);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(gen);
    const Matrix k = y.transpose() * y;
    const Matrix hat = y * (Matrix::Identity(3, 3) - 6.0 * k.inverse());
    const double l = hat.squaredNorm();
    s += l;
    s2 += l * l;
  }
  const double bf = s / reps, bf_se = std::sqrt((s2 / reps - bf * bf) / reps);
  const RiskEstimate r = frobenius_risk(closed_form_estimator(ClosedFormKind::em), Matrix::Zero(10, 3), SampleSize(1),
                                        reps, RngSeed{4});
  EXPECT_LT(std::abs(r.mean - bf), 4.0 * std::hypot(r.std_error, bf_se));
  EXPECT_LT(r.mean, 30.0);
}

TEST(FrobeniusRisk, AntitheticNeedsEvenReps) {
  ReplicateOptions opts;
  opts.antithetic = true;
  EXPECT_THROW(frobenius_risk(closed_form_estimator(ClosedFormKind::mle), Matrix::Zero(3, 2), SampleSize(1), 5, RngSeed{1}, opts),
               Error);
  EXPECT_THROW(frobenius_risk(closed_form_estimator(ClosedFormKind::mle), Matrix::Zero(3, 2), SampleSize(1), 1, RngSeed{1}),
               Error);
}

TEST(FrobeniusRisk, AntitheticMleHasExactMeanPairs) {
  // Y = M +- Z: both replicates of a pair share the loss of Z
  ReplicateOptions opts;
  opts.antithetic = true;
  const Matrix m = random_matrix(4, 2, 5);
  const auto hats = replicate_estimates(closed_form_estimator(ClosedFormKind::mle), m, SampleSize(1), 4, RngSeed{1}, opts);
  EXPECT_LT((hats[0] - m + (hats[1] - m)).norm(), 1e-12);
  EXPECT_NEAR(frobenius_loss(hats[0], m), frobenius_loss(hats[1], m), 1e-12);
}

TEST(MatrixRisk, MleIsScaledIdentity) {
  const Matrix m = random_matrix(10, 3, 6);
  const Estimator mle = closed_form_estimator(ClosedFormKind::mle);
  const MatrixRiskEstimate r = matrix_quadratic_risk(mle, m, SampleSize(2), 4000, RngSeed{7});
  const Matrix expect = 5.0 * Matrix::Identity(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) EXPECT_LT(std::abs(r.mean(i) - expect(i)), 4.0 * r.std_error(i) + 1e-12) << i;
  const RiskEstimate f = frobenius_risk(mle, m, SampleSize(2), 4000, RngSeed{7});
  EXPECT_NEAR(r.mean.trace(), f.mean, 1e-9);
}

TEST(PairedDifference, IdenticalEstimatorsGiveZero) {
  const Estimator js = closed_form_estimator(ClosedFormKind::em);
  const RiskEstimate d = paired_risk_difference(js, js, padded({2, 1}, 5), SampleSize(1), 50, RngSeed{2});
  EXPECT_EQ(d.mean, 0.0);
  EXPECT_EQ(d.std_error, 0.0);
}

TEST(PairedDifference, CommonNoiseShrinksStandardError) {
  const Matrix m = padded({2, 1, 0.5}, 10);
  const Estimator em = closed_form_estimator(ClosedFormKind::em), mle = closed_form_estimator(ClosedFormKind::mle);
  const RiskEstimate paired = paired_risk_difference(em, mle, m, SampleSize(1), 2000, RngSeed{3});
  const RiskEstimate a = frobenius_risk(em, m, SampleSize(1), 2000, RngSeed{4});
  const RiskEstimate b = frobenius_risk(mle, m, SampleSize(1), 2000, RngSeed{5});
  EXPECT_LT(paired.std_error, 0.8 * std::hypot(a.std_error, b.std_error));
  EXPECT_LT(std::abs(paired.mean - (a.mean - b.mean)), 4.0 * std::hypot(a.std_error, b.std_error));
}

TEST(Asymptotics, ClosedFormsMatchGeneric) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix m = random_matrix(10, 3, 100 + s, 3.0);
    const PriorModel svs = PriorModel::svs(10, 3);
    for (double g : {1.0, 4.0, 10.0, 24.0}) {
      const double generic = asymptotic_frobenius_difference(svs, PriorModel::frobenius_power(10, 3, g), m);
      EXPECT_LT(testutil::rel_err(generic, svs_scalar_shrinkage_limit(3, g, m.squaredNorm())), 1e-10);
      const Matrix mat = asymptotic_matrix_difference(svs, PriorModel::frobenius_power(10, 3, g), m);
      EXPECT_LT((mat - svs_scalar_shrinkage_matrix_limit(g, m.transpose() * m)).norm(), 1e-10 * mat.norm());
      EXPECT_NEAR(mat.trace(), generic, 1e-10 * std::abs(generic));
    }
    const std::vector<double> gv{1.0, 2.0, 3.5};
    const double generic = asymptotic_frobenius_difference(svs, PriorModel::columnwise(10, 3, gv), m);
    EXPECT_LT(testutil::rel_err(generic, svs_column_shrinkage_limit(gv, m)), 1e-10);
    const Matrix mat = asymptotic_matrix_difference(svs, PriorModel::columnwise(10, 3, gv), m);
    EXPECT_LT((mat - svs_column_shrinkage_matrix_limit(gv, m)).norm(), 1e-10 * mat.norm());
  }
}

TEST(Asymptotics, ReferenceValues) {
  const Matrix m1 = padded({std::sqrt(50.0), std::sqrt(30.0), std::sqrt(20.0)}, 10);
  EXPECT_NEAR(asymptotic_frobenius_difference(PriorModel::svs(10, 3), PriorModel::frobenius_power(10, 3, 10.0), m1), -1.0,
              1e-12);
  const Matrix m2 = padded({1, 1, 1}, 10);
  EXPECT_NEAR(asymptotic_frobenius_difference(PriorModel::svs(10, 3), PriorModel::columnwise(10, 3, {2, 2, 2}), m2), -12.0,
              1e-12);
  // scalar shrinkage with gamma = 1 at M = [I; 0]: -19/9 I
  const Matrix mat = svs_scalar_shrinkage_matrix_limit(1.0, m2.transpose() * m2);
  EXPECT_LT((mat + (19.0 / 9.0) * Matrix::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT((asymptotic_matrix_difference(PriorModel::svs(10, 3), PriorModel::frobenius_power(10, 3, 1.0), m2) - mat).norm(),
            1e-12);
}

TEST(Asymptotics, UniformFactorGivesZero) {
  const Matrix m = random_matrix(6, 2, 8);
  EXPECT_EQ(asymptotic_frobenius_difference(PriorModel::svs(6, 2), PriorModel::uniform(6, 2), m), 0.0);
  EXPECT_EQ(asymptotic_matrix_difference(PriorModel::svs(6, 2), PriorModel::uniform(6, 2), m).norm(), 0.0);
}

TEST(Asymptotics, ShapeAndZeroChecks) {
  EXPECT_THROW(asymptotic_frobenius_difference(PriorModel::svs(6, 2), PriorModel::uniform(5, 2), random_matrix(6, 2, 1)),
               ShapeError);
  EXPECT_THROW(svs_scalar_shrinkage_limit(3, 1.0, 0.0), NumericError);
  EXPECT_THROW(svs_column_shrinkage_limit({1, 1, 1}, padded({1, 0, 1}, 5)), NumericError);
  EXPECT_THROW(svs_column_shrinkage_limit({1, 1}, padded({1, 1, 1}, 5)), ShapeError);
}

TEST(Asymptotics, SharedChainSmokeRun) {
  MCMCConfig c;
  c.proposal_variance = 0.001;
  c.iterations = 5000;
  c.burn_in = 500;
  const Matrix m = padded({1, 1, 1}, 10);
  const AsymptoticCheck a = asymptotic_check(PriorModel::svs(10, 3), PriorModel::columnwise(10, 3, {2, 2, 2}), m,
                                             SampleSize(100), 20, c, RngSeed{1});
  EXPECT_NEAR(a.limit, -12.0, 1e-10);
  EXPECT_DOUBLE_EQ(a.scaled_mean, 1e4 * a.raw.mean);
  EXPECT_EQ(a.raw.n_reps, 10);  // pair averages
  EXPECT_TRUE(std::isfinite(a.scaled_std_error));
}

TEST(Grid, PaddedMean) {
  GridSpec g;
  g.values = {0, 5, 10};
  g.fixed_sigmas = {2, 1};
  EXPECT_EQ(build_mean(g, 5, 6, 3), padded({5, 2, 1}, 6));
  g.axis = GridAxis::sigma2;
  EXPECT_EQ(build_mean(g, 5, 6, 3), padded({2, 5, 1}, 6));
}

TEST(Grid, HaarMeanHasRequestedSingularValues) {
  GridSpec g;
  g.values = {0, 10};
  g.fixed_sigmas = {10, 0};
  g.construction = MeanConstruction::haar_rotated;
  g.haar_seed = RngSeed{4};
  const Matrix m = build_mean(g, 10, 10, 3);
  const Vector s = singular_values(m);
  EXPECT_NEAR(s(0), 10.0, 1e-12);
  EXPECT_NEAR(s(1), 10.0, 1e-12);
  EXPECT_NEAR(s(2), 0.0, 1e-12);
  EXPECT_EQ(build_mean(g, 10, 10, 3), m);
  g.haar_seed = RngSeed{5};
  EXPECT_NE(build_mean(g, 10, 10, 3), m);
}

TEST(Grid, Validation) {
  GridSpec g;
  g.values = {0, 5};
  g.fixed_sigmas = {1};
  EXPECT_THROW(g.validate(3), Error);
  g.fixed_sigmas = {1, 1};
  EXPECT_NO_THROW(g.validate(3));
  g.values = {5, 0};
  EXPECT_THROW(g.validate(3), Error);
  g.values = {-1, 0};
  EXPECT_THROW(g.validate(3), Error);
  g.values.clear();
  EXPECT_THROW(g.validate(3), Error);
  GridSpec h;
  h.values = {1};
  h.axis = GridAxis::sigma2;
  EXPECT_THROW(h.validate(1), Error);
}

TEST(RiskCurve, RowsAndDeterminism) {
  RiskCurveSpec spec;
  spec.n = 10;
  spec.p = 3;
  spec.grid.values = {0, 2, 4};
  spec.grid.fixed_sigmas = {0, 0};
  spec.estimators = {closed_form_estimator(ClosedFormKind::em), closed_form_estimator(ClosedFormKind::mle)};
  spec.n_reps = 200;
  spec.seed = RngSeed{11};
  const auto a = risk_curve(spec), b = risk_curve(spec);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].risk.mean, b[i].risk.mean);
    EXPECT_EQ(a[i].axis_value, spec.grid.values[i / 2]);
    EXPECT_EQ(a[i].estimator, i % 2 ? "mle" : "em");
    EXPECT_EQ(a[i].seed, 11u);
  }
  // common noise: the MLE row is the same draw at every grid point
  EXPECT_EQ(a[1].risk.mean, a[3].risk.mean);
  EXPECT_LT(a[0].risk.mean, a[1].risk.mean);
  spec.estimators.clear();
  EXPECT_THROW(risk_curve(spec), Error);
}

TEST(RiskCurve, ControlVariateAgreesWithPlain) {
  RiskCurveSpec spec;
  spec.n = 10;
  spec.p = 3;
  spec.grid.values = {1};
  spec.grid.fixed_sigmas = {0, 0};
  spec.estimators = {closed_form_estimator(ClosedFormKind::em)};
  spec.n_reps = 4000;
  spec.seed = RngSeed{12};
  const auto plain = risk_curve(spec);
  spec.opts.control_variate = true;
  const auto cv = risk_curve(spec);
  EXPECT_LT(cv[0].risk.std_error, plain[0].risk.std_error);
  EXPECT_LT(std::abs(cv[0].risk.mean - plain[0].risk.mean), 4.0 * plain[0].risk.std_error);
}
