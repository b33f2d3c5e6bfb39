#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sfd/bench/functions.hpp"
#include "sfd/designs.hpp"
#include "sfd/surrogates.hpp"

using namespace sfd;

namespace {

Dataset make_data(const PointMatrix& x, const std::function<double(const Vector&)>& f) {
  auto s = share(DesignSpace::unit_cube(static_cast<int>(x.cols())));
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = f(x.row(i).transpose());
  return Dataset(make_design(s, x, "test"), y);
}

PointMatrix random_points(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  return random_uniform_points(n, d, rng);
}

PointMatrix points_1d(std::initializer_list<double> v) {
  PointMatrix p(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) p(i++, 0) = x;
  return p;
}

Dataset permuted(const Dataset& data, std::uint64_t seed) {
  Rng rng(seed);
  return subset(data, rng.permutation(static_cast<int>(data.size())));
}

double affine(const Vector& x) {
  double s = 2.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) s += (k + 1) * 0.75 * x[k] - 0.3 * (k % 2);
  return s;
}

}  // namespace

// ---------------------------------------------------------------- RSM

TEST(Rsm, RecoversExactQuadratic) {
  const Dataset data = make_data(random_points(30, 1, 1), [](const Vector& x) { return 1 + 2 * x[0] + 3 * x[0] * x[0]; });
  const RsmModel m = fit_rsm(data);
  ASSERT_EQ(m.terms.size(), 3u);
  for (std::size_t t = 0; t < m.terms.size(); ++t) {
    const auto& term = m.terms[t];
    const double c = m.coefficients[static_cast<Eigen::Index>(t)];
    if (term.a < 0) EXPECT_NEAR(c, 1.0, 1e-8);
    else if (term.b < 0) EXPECT_NEAR(c, 2.0, 1e-8);
    else EXPECT_NEAR(c, 3.0, 1e-8);
  }
}

TEST(Rsm, ConstantResponseIsInterceptOnly) {
  const Dataset data = make_data(random_points(40, 3, 2), [](const Vector&) { return 4.5; });
  const RsmModel m = fit_rsm(data);
  ASSERT_EQ(m.terms.size(), 1u);
  EXPECT_TRUE(m.has_term({-1, -1}));
  EXPECT_NEAR(m.coefficients[0], 4.5, 1e-12);
}

TEST(Rsm, BicNonIncreasingAlongPath) {
  Rng noise(3);
  const Dataset data = make_data(random_points(80, 4, 3), [&](const Vector& x) {
    return 1 + x[0] - 2 * x[1] * x[2] + 0.05 * noise.normal();
  });
  const RsmModel m = fit_rsm(data);
  ASSERT_GE(m.bic_path.size(), 2u);
  for (std::size_t i = 1; i < m.bic_path.size(); ++i) EXPECT_LE(m.bic_path[i], m.bic_path[i - 1] + 1e-12);
}

TEST(Rsm, RankDeficiencyWarns) {
  // 4 points cannot determine the 6-term bivariate quadratic
  PointMatrix p(4, 2);
  p << 0.1, 0.2, 0.8, 0.3, 0.4, 0.9, 0.6, 0.6;
  const Dataset data = make_data(p, [](const Vector& x) { return x[0] * x[1] + x[0]; });
  const auto f = fit(data, SurrogateKind::Rsm);
  bool warned = false;
  for (const auto& w : f.warnings) warned = warned || w.find("RankWarning") != std::string::npos;
  EXPECT_TRUE(warned);
}

// ---------------------------------------------------------------- MARS

TEST(Mars, SingleHinge) {
  const Dataset data = make_data(random_points(60, 1, 4), [](const Vector& x) { return std::max(0.0, x[0] - 0.5); });
  const MarsModel m = fit_mars(data);
  const PointMatrix q = random_points(100, 1, 5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) worst = std::max(worst, std::abs(m.predict_one(q.row(i).data()) - std::max(0.0, q(i, 0) - 0.5)));
  EXPECT_LT(worst, 0.02);
  const Vector fitted = m.predict(data.x());
  EXPECT_LT((fitted - data.responses).norm() / std::sqrt(60.0), 1e-6);
}

TEST(Mars, ConstantIsInterceptOnly) {
  const MarsModel m = fit_mars(make_data(random_points(30, 2, 6), [](const Vector&) { return -1.25; }));
  ASSERT_EQ(m.basis.size(), 1u);
  EXPECT_TRUE(m.basis[0].hinges.empty());
  EXPECT_NEAR(m.coefficients[0], -1.25, 1e-12);
}

TEST(Mars, PrunedGcvNotWorseThanUnpruned) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng noise(seed);
    const Dataset data = make_data(random_points(150, 4, seed + 10), [&](const Vector& x) {
      return friedman(x) + 0.1 * noise.normal();
    });
    const MarsModel m = fit_mars(data);
    EXPECT_LE(m.gcv, m.gcv_unpruned * (1 + 1e-12));
  }
}

TEST(Mars, BeatsRsmOnFriedman) {
  int wins = 0;
  auto space = share(friedman_space());
  const TruthSurface truth = analytic_truth("friedman");
  Rng qrng(50);
  Vector tq;
  PointMatrix q(1000, 4);
  for (int i = 0; i < 1000;) {
    Vector u(4);
    for (int k = 0; k < 4; ++k) u[k] = qrng.uniform();
    if (is_feasible_unit(*space, u)) q.row(i++) = u.transpose();
  }
  tq = truth.evaluate_unit(q);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Design d = gen_uniform(space, 756, seed);
    const Dataset data(d, truth.evaluate_unit(d.points));
    const double rm = rmse(tq, fit(data, SurrogateKind::Mars).predict(q));
    const double rr = rmse(tq, fit(data, SurrogateKind::Rsm).predict(q));
    wins += rm < rr ? 1 : 0;
  }
  EXPECT_GE(wins, 3);
}

// ---------------------------------------------------------------- LSHEP

TEST(Lshep, InterpolatesDataPoints) {
  const Dataset data = make_data(random_points(40, 2, 7), [](const Vector& x) { return std::sin(5 * x[0]) + x[1]; });
  const LshepModel m = fit_lshep(data);
  const Vector p = m.predict(data.x());
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], data.responses[i]);
}

TEST(Lshep, ReproducesLinear) {
  const Dataset data = make_data(random_points(80, 3, 8), affine);
  const LshepModel m = fit_lshep(data);
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Vector q = oracle::interior_query(data.x(), rng);
    bool covered = false;
    const double v = m.predict_one(q.data(), &covered);
    if (covered) EXPECT_NEAR(v, affine(q), 1e-8);
  }
}

TEST(Lshep, WeightVanishesAtRadius) {
  EXPECT_EQ(shepard_weight(0.4, 0.4), 0.0);
  EXPECT_EQ(shepard_weight(0.4, 0.5), 0.0);
  EXPECT_GT(shepard_weight(0.4, 0.39), 0.0);
  EXPECT_NEAR(shepard_weight(1.0, 0.5), 1.0, 1e-15);
}

TEST(Lshep, PermutationInvariant) {
  const Dataset data = make_data(random_points(50, 2, 10), [](const Vector& x) { return std::exp(x[0]) * x[1]; });
  const PointMatrix q = random_points(200, 2, 11);
  const Vector a = fit_lshep(data).predict(q), b = fit_lshep(permuted(data, 12)).predict(q);
  for (Eigen::Index i = 0; i < q.rows(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Lshep, CoverageWarningFarAway) {
  const Dataset data = make_data(random_points(30, 2, 13) * 0.2, [](const Vector& x) { return x[0]; });
  const auto f = fit(data, SurrogateKind::Lshep);
  PointMatrix q(1, 2);
  q << 0.95, 0.95;
  const auto p = f.predict_detailed(q);
  ASSERT_FALSE(p.warnings.empty());
  EXPECT_NE(p.warnings.front().find("CoverageWarning"), std::string::npos);
  EXPECT_TRUE(std::isfinite(p.values[0]));
}

// ---------------------------------------------------------------- Delaunay

TEST(Delaunay, LinearBlendOneDimension) {
  const Dataset data = make_data(points_1d({0.0, 1.0}), [](const Vector& x) { return 10 * x[0]; });
  const DelaunayModel m = fit_delaunay(data);
  EXPECT_NEAR(m.predict(points_1d({0.3}))[0], 3.0, 1e-12);
}

TEST(Delaunay, ExactAtTrainingPoints) {
  const Dataset data = make_data(random_points(40, 3, 14), [](const Vector& x) { return x.squaredNorm(); });
  const Vector p = fit_delaunay(data).predict(data.x());
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], data.responses[i], 1e-12);
}

TEST(Delaunay, AffineInterior) {
  const Dataset data = make_data(random_points(60, 3, 15), affine);
  const DelaunayModel m = fit_delaunay(data);
  Rng rng(16);
  for (int t = 0; t < 100; ++t) {
    const Vector q = oracle::interior_query(data.x(), rng);
    EXPECT_NEAR(m.predict_one(q), affine(q), 1e-8);
  }
}

TEST(Delaunay, PermutationInvariant) {
  const Dataset data = make_data(random_points(40, 2, 17), [](const Vector& x) { return std::cos(3 * x[0]) - x[1]; });
  const PointMatrix q = random_points(200, 2, 18);
  const Vector a = fit_delaunay(data).predict(q), b = fit_delaunay(permuted(data, 19)).predict(q);
  for (Eigen::Index i = 0; i < q.rows(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Delaunay, ExtrapolationWarning) {
  const Dataset data = make_data(random_points(20, 2, 20) * 0.5, affine);
  const auto f = fit(data, SurrogateKind::Delaunay);
  PointMatrix q(2, 2);
  q << 0.9, 0.9, 0.25, 0.25;
  const auto p = f.predict_detailed(q);
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_NE(p.warnings[0].find("1 queries"), std::string::npos);
}

// ---------------------------------------------------------------- GP

TEST(Gp, HandExampleTwoPoints) {
  Vector theta(1);
  theta << 1.0;
  const Vector y = (Vector(2) << 0.0, 1.0).finished();
  const double mu = kriging_mean(points_1d({0.0, 1.0}), y, theta, 0.0, points_1d({0.5}))[0];
  const double e = std::exp(-0.25), r = std::exp(-1.0);
  // [e e] [[1 r][r 1]]^-1 [0 1]' = e (1 - r) / (1 - r^2) = e / (1 + r)
  EXPECT_NEAR(mu, e / (1.0 + r), 1e-10);
  EXPECT_NEAR(mu, 0.569349, 1e-6);
}

TEST(Gp, LikelihoodGradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 5 + static_cast<int>(rng.below(26));
    const int d = 1 + static_cast<int>(rng.below(3));
    const PointMatrix x = random_uniform_points(n, d, rng);
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = std::sin(3 * x(i, 0)) + 0.1 * rng.normal();
    z.array() -= z.mean();
    Vector p(d + 1);
    for (int k = 0; k < d; ++k) p[k] = rng.uniform(std::log(0.05), std::log(2.0));
    p[d] = rng.uniform(std::log(1e-4), std::log(1e-1));
    EXPECT_LT(oracle::gradient_error(x, z, p), 1e-4) << "instance " << inst;
  }
}

TEST(Gp, InterpolatesAtNuggetFloor) {
  GpOptions opt;
  opt.nugget_ceiling = opt.nugget_floor;
  const Dataset data = make_data(random_points(30, 2, 22), [](const Vector& x) { return 10 * std::sin(4 * x[0]) + x[1]; });
  const GpModel m = fit_gp(data, opt);
  const double range = data.responses.maxCoeff() - data.responses.minCoeff();
  const Vector p = m.predict(data.x());
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], data.responses[i], 1e-6 * range);
}

TEST(Gp, RevertsToMeanFarAway) {
  const Dataset data = make_data(random_points(20, 1, 23) * 0.1, [](const Vector& x) { return 3 + x[0]; });
  GpModel m = fit_gp(data);
  m.theta.setConstant(1e-3);
  PointMatrix q(1, 1);
  q << 50.0;
  EXPECT_NEAR(m.predict(q)[0], data.responses.mean(), 1e-9);
}

TEST(Gp, VarianceNonNegativeAndSmallAtTraining) {
  const Dataset data = make_data(random_points(25, 2, 24), [](const Vector& x) { return x[0] * x[1]; });
  const GpModel m = fit_gp(data);
  const Vector vt = m.variance(data.x());
  const Vector vq = m.variance(random_points(50, 2, 25));
  EXPECT_GE(vq.minCoeff(), 0.0);
  EXPECT_GE(vt.minCoeff(), 0.0);
  EXPECT_LE(vt.maxCoeff(), 2.0 * m.nugget * m.sigma2 + 1e-9);
}

TEST(Gp, SeedDeterministic) {
  const Dataset data = make_data(random_points(30, 2, 26), [](const Vector& x) { return x[0] - x[1] * x[1]; });
  GpOptions opt;
  opt.seed = 5;
  const GpModel a = fit_gp(data, opt), b = fit_gp(data, opt);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.nugget, b.nugget);
}

TEST(Gp, LocalModeAboveThreshold) {
  GpOptions opt;
  opt.local_threshold = 100;
  opt.local_neighborhood = 30;
  const Dataset data = make_data(random_points(150, 2, 27), [](const Vector& x) { return std::sin(3 * x[0]) + x[1]; });
  const GpModel m = fit_gp(data, opt);
  EXPECT_TRUE(m.local());
  const PointMatrix q = random_points(50, 2, 28);
  Vector truth(50);
  for (int i = 0; i < 50; ++i) truth[i] = std::sin(3 * q(i, 0)) + q(i, 1);
  EXPECT_LT(rmse(truth, m.predict(q)), 0.01);
}

TEST(Gp, OptionValidation) {
  GpOptions o;
  o.lengthscale_lo = 2.0;
  o.lengthscale_hi = 1.0;
  EXPECT_THROW(validate(o), ShapeError);
  GpOptions p;
  p.nugget_floor = 0.0;
  EXPECT_THROW(validate(p), ShapeError);
}

// ---------------------------------------------------------------- facade

TEST(Facade, EmptyQueryGivesEmptyVector) {
  const Dataset data = make_data(random_points(20, 2, 29), affine);
  for (auto k : all_surrogate_kinds()) EXPECT_EQ(fit(data, k).predict(PointMatrix(0, 2)).size(), 0) << to_string(k);
}

TEST(Facade, DuplicatedQueryGivesIdenticalValues) {
  const Dataset data = make_data(random_points(30, 2, 30), [](const Vector& x) { return std::sin(4 * x[0]) * x[1]; });
  PointMatrix q(5, 2);
  for (int i = 0; i < 5; ++i) q.row(i) << 0.37, 0.61;
  for (auto k : all_surrogate_kinds()) {
    const Vector p = fit(data, k).predict(q);
    for (int i = 1; i < 5; ++i) EXPECT_EQ(p[i], p[0]) << to_string(k);
  }
}

TEST(Facade, InterpolatingKindsReproduceTraining) {
  const Dataset data = make_data(random_points(30, 2, 31), [](const Vector& x) { return std::exp(x[0]) + x[1]; });
  const double range = data.responses.maxCoeff() - data.responses.minCoeff();
  SurrogateSpec spec;
  spec.gp.nugget_ceiling = spec.gp.nugget_floor;
  for (auto k : {SurrogateKind::Delaunay, SurrogateKind::Gp, SurrogateKind::Lshep}) {
    spec.kind = k;
    const Vector p = fit(data, spec).predict(data.x());
    EXPECT_LT((p - data.responses).cwiseAbs().maxCoeff(), 1e-6 * range) << to_string(k);
  }
}

TEST(Facade, AffineTruthReproducedByAllKinds) {
  const Dataset data = make_data(random_points(60, 2, 32), affine);
  Rng rng(33);
  PointMatrix q(40, 2);
  for (int i = 0; i < 40; ++i) q.row(i) = oracle::interior_query(data.x(), rng).transpose();
  Vector truth(40);
  for (int i = 0; i < 40; ++i) truth[i] = affine(q.row(i).transpose());
  for (auto k : all_surrogate_kinds()) {
    SurrogateSpec spec;
    spec.kind = k;
    spec.mars.max_degree_grid = {1};
    const Vector p = fit(data, spec).predict(q);
    EXPECT_LT((p - truth).cwiseAbs().maxCoeff(), 1e-6) << to_string(k);
  }
}

TEST(Facade, TooFewPointsRejected) {
  const Dataset data = make_data(random_points(4, 3, 34), affine);
  EXPECT_THROW(fit(data, SurrogateKind::Mars), ShapeError);
  EXPECT_THROW(fit(data, SurrogateKind::Lshep), ShapeError);
  EXPECT_THROW(fit(data, SurrogateKind::Gp), ShapeError);
}

TEST(Facade, WrongQueryWidthRejected) {
  const auto f = fit(make_data(random_points(20, 2, 35), affine), SurrogateKind::Rsm);
  EXPECT_THROW(f.predict(PointMatrix::Zero(3, 3)), ShapeError);
}

TEST(Facade, KindNamesRoundTrip) {
  for (auto k : all_surrogate_kinds()) EXPECT_EQ(parse_surrogate_kind(to_string(k)), k);
  EXPECT_EQ(parse_surrogate_kind("lsp"), SurrogateKind::Lshep);
  EXPECT_THROW(parse_surrogate_kind("svm"), FormatError);
}
