#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sfd/geometry.hpp"

using namespace sfd;

namespace {

PointMatrix random_points(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  PointMatrix p(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = rng.uniform();
  return p;
}

double weight_sum(const SimplexResult& r) { return std::accumulate(r.weights.begin(), r.weights.end(), 0.0); }

Vector reconstruct(const PointMatrix& pts, const SimplexResult& r) {
  Vector q = Vector::Zero(pts.cols());
  for (std::size_t i = 0; i < r.weights.size(); ++i) q += r.weights[i] * pts.row(r.vertex_indices[i]).transpose();
  return q;
}

}  // namespace

TEST(Locate, VertexQueryPutsAllWeightOnVertex) {
  const PointMatrix p = random_points(30, 2, 1);
  for (int j : {0, 7, 29}) {
    const auto r = locate_simplex(p, p.row(j).transpose());
    for (std::size_t i = 0; i < r.weights.size(); ++i) {
      if (r.vertex_indices[i] == j) EXPECT_NEAR(r.weights[i], 1.0, 1e-10);
      else EXPECT_NEAR(r.weights[i], 0.0, 1e-10);
    }
    EXPECT_FALSE(r.extrapolated);
  }
}

TEST(Locate, CentroidOfSingleSimplex) {
  for (int d = 1; d <= 4; ++d) {
    PointMatrix p = PointMatrix::Zero(d + 1, d);
    for (int k = 0; k < d; ++k) p(k + 1, k) = 1.0;
    const Vector c = p.colwise().mean().transpose();
    const auto r = locate_simplex(p, c);
    ASSERT_EQ(static_cast<int>(r.weights.size()), d + 1);
    for (double w : r.weights) EXPECT_NEAR(w, 1.0 / (d + 1), 1e-12);
  }
}

TEST(Locate, EmptyCircumcircle2D) {
  const PointMatrix p = random_points(50, 2, 2);
  DelaunayLocator loc(p);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vector q = oracle::interior_query(p, rng);
    const auto r = loc.locate(q);
    ASSERT_FALSE(r.extrapolated);
    EXPECT_GE(oracle::circumsphere_margin(p, r.vertex_indices), -1e-9);
    EXPECT_NEAR(weight_sum(r), 1.0, 1e-10);
    EXPECT_LT((reconstruct(p, r) - q).norm(), 1e-10);
    for (double w : r.weights) EXPECT_GE(w, -1e-12);
  }
}

TEST(Locate, EmptyCircumsphere3D) {
  const PointMatrix p = random_points(40, 3, 4);
  DelaunayLocator loc(p);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto r = loc.locate(oracle::interior_query(p, rng));
    EXPECT_GE(oracle::circumsphere_margin(p, r.vertex_indices), -1e-9);
  }
}

TEST(Locate, AffineReproduction) {
  const PointMatrix p = random_points(60, 3, 6);
  const Vector a = (Vector(3) << 1.5, -2.0, 0.25).finished();
  DelaunayLocator loc(p);
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const Vector q = oracle::interior_query(p, rng);
    const auto r = loc.locate(q);
    double f = 0.0;
    for (std::size_t i = 0; i < r.weights.size(); ++i) f += r.weights[i] * (3.0 + a.dot(p.row(r.vertex_indices[i]).transpose()));
    EXPECT_NEAR(f, 3.0 + a.dot(q), 1e-8);
  }
}

TEST(Locate, ExteriorQueryIsProjected) {
  PointMatrix sq(4, 2);
  sq << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto r = locate_simplex(sq, (Vector(2) << 1.5, 0.5).finished());
  EXPECT_TRUE(r.extrapolated);
  EXPECT_NEAR(r.projection_distance, 0.5, 1e-9);
  EXPECT_NEAR(r.projected_query[0], 1.0, 1e-9);
  EXPECT_NEAR(r.projected_query[1], 0.5, 1e-9);
  EXPECT_NEAR(weight_sum(r), 1.0, 1e-10);
  EXPECT_LT((reconstruct(sq, r) - r.projected_query).norm(), 1e-9);
}

TEST(Locate, CollinearPointsAreDegenerate) {
  PointMatrix p(4, 2);
  p << 0, 0, 1, 1, 2, 2, 3, 3;
  EXPECT_THROW(DelaunayLocator{p}, DegeneracyError);
}

TEST(Locate, TooFewPointsAreDegenerate) {
  PointMatrix p(2, 2);
  p << 0, 0, 1, 1;
  EXPECT_THROW(DelaunayLocator{p}, DegeneracyError);
}

TEST(Project, InteriorQueryHasZeroDistance) {
  const PointMatrix p = random_points(20, 2, 8);
  Rng rng(9);
  const Vector q = oracle::interior_query(p, rng);
  const auto [proj, dist] = project_to_hull(p, q);
  EXPECT_EQ(dist, 0.0);
  EXPECT_LT((proj - q).norm(), 1e-15);
}

TEST(Project, SegmentInOneDimension) {
  PointMatrix p(2, 1);
  p << 0, 1;
  const auto [proj, dist] = project_to_hull(p, (Vector(1) << 1.5).finished());
  EXPECT_NEAR(proj[0], 1.0, 1e-12);
  EXPECT_NEAR(dist, 0.5, 1e-12);
}

TEST(Project, SquareCorner) {
  PointMatrix p(4, 2);
  p << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto [proj, dist] = project_to_hull(p, (Vector(2) << 2.0, 2.0).finished());
  EXPECT_NEAR(proj[0], 1.0, 1e-10);
  EXPECT_NEAR(proj[1], 1.0, 1e-10);
  EXPECT_NEAR(dist, std::sqrt(2.0), 1e-10);
}

TEST(Project, MatchesBruteForceOnCube) {
  // nearest point of [0,1]^3 is the coordinate-wise clamp
  PointMatrix p(8, 3);
  for (int m = 0; m < 8; ++m)
    for (int k = 0; k < 3; ++k) p(m, k) = (m >> k) & 1;
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    Vector q(3);
    for (int k = 0; k < 3; ++k) q[k] = rng.uniform(-1.0, 2.0);
    const Vector clamp = q.cwiseMax(0.0).cwiseMin(1.0);
    const auto [proj, dist] = project_to_hull(p, q);
    EXPECT_LT((proj - clamp).norm(), 1e-8);
    EXPECT_NEAR(dist, (q - clamp).norm(), 1e-8);
  }
}
