#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sfd/core.hpp"

namespace sfd {

/// Second-order polynomial term: intercept (-1,-1), linear (k,-1), product (k,l), k <= l.
struct RsmTerm {
  int a = -1;
  int b = -1;

  double eval(const double* x) const {
    if (a < 0) return 1.0;
    if (b < 0) return x[a];
    return x[a] * x[b];
  }
  bool operator==(const RsmTerm&) const = default;
};

inline std::string to_string(const RsmTerm& t) {
  if (t.a < 0) return "1";
  if (t.b < 0) return "x" + std::to_string(t.a + 1);
  if (t.a == t.b) return "x" + std::to_string(t.a + 1) + "^2";
  return "x" + std::to_string(t.a + 1) + "*x" + std::to_string(t.b + 1);
}

struct RsmModel {
  std::vector<RsmTerm> terms;
  Vector coefficients;
  bool rank_warning = false;
  /// BIC after each accepted elimination (first entry: full model).
  std::vector<double> bic_path;

  double predict_one(const double* x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < terms.size(); ++t) s += coefficients[static_cast<Eigen::Index>(t)] * terms[t].eval(x);
    return s;
  }

  Vector predict(const PointMatrix& q) const {
    Vector out(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) out[i] = predict_one(q.row(i).data());
    return out;
  }

  bool has_term(RsmTerm t) const {
    for (const auto& x : terms)
      if (x == t) return true;
    return false;
  }
};

namespace detail {

inline Eigen::MatrixXd rsm_features(const PointMatrix& x, const std::vector<RsmTerm>& terms) {
  Eigen::MatrixXd f(x.rows(), static_cast<Eigen::Index>(terms.size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (std::size_t t = 0; t < terms.size(); ++t) f(i, static_cast<Eigen::Index>(t)) = terms[t].eval(x.row(i).data());
  return f;
}

}  // namespace detail

/// Full quadratic least squares followed by backward elimination on BIC.
/// Terms on factors that take a single value in the data are never offered.
inline RsmModel fit_rsm(const Dataset& data) {
  const auto& x = data.x();
  const auto n = x.rows();
  const int d = static_cast<int>(x.cols());
  if (n < 1) throw ShapeError("rsm needs data");

  std::vector<bool> active(static_cast<std::size_t>(d), false);
  for (int k = 0; k < d; ++k) active[static_cast<std::size_t>(k)] = (x.col(k).array() != x(0, k)).any();

  std::vector<RsmTerm> pool{{-1, -1}};
  for (int k = 0; k < d; ++k)
    if (active[static_cast<std::size_t>(k)]) pool.push_back({k, -1});
  for (int k = 0; k < d; ++k)
    for (int l = k + 1; l < d; ++l)
      if (active[static_cast<std::size_t>(k)] && active[static_cast<std::size_t>(l)]) pool.push_back({k, l});
  for (int k = 0; k < d; ++k)
    if (active[static_cast<std::size_t>(k)]) pool.push_back({k, k});

  const Eigen::MatrixXd f = detail::rsm_features(x, pool);
  const double ybar = data.responses.mean();
  const Vector yc = data.responses.array() - ybar;
  const Eigen::MatrixXd gram = f.transpose() * f;
  const Vector h = f.transpose() * yc;
  const double tss = yc.squaredNorm();
  const double floor = std::max(1e-12 * tss, std::numeric_limits<double>::min());
  const double nd = static_cast<double>(n);

  struct Eval {
    double bic;
    long rank;
  };
  // The intercept absorbs the centring, so RSS(S) = |yc|^2 - beta' h_S.
  auto evaluate = [&](const std::vector<int>& s) -> Eval {
    const auto k = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd g(k, k);
    Vector hs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      hs[a] = h[s[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < k; ++b) g(a, b) = gram(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g);
    cod.setThreshold(1e-12);
    const Vector beta = cod.solve(hs);
    const double rss = std::max(tss - beta.dot(hs), floor);
    return {nd * std::log(rss / nd) + static_cast<double>(cod.rank()) * std::log(nd), cod.rank()};
  };

  std::vector<int> current(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) current[i] = static_cast<int>(i);
  RsmModel model;
  Eval cur = evaluate(current);
  model.bic_path.push_back(cur.bic);
  while (current.size() > 1) {
    double best_bic = cur.bic;
    std::size_t best_pos = 0;
    for (std::size_t pos = 1; pos < current.size(); ++pos) {  // position 0 is the intercept
      std::vector<int> trial = current;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(pos));
      const Eval e = evaluate(trial);
      if (e.bic < best_bic - 1e-12) {
        best_bic = e.bic;
        best_pos = pos;
      }
    }
    if (best_pos == 0) break;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best_pos));
    cur = evaluate(current);
    model.bic_path.push_back(cur.bic);
  }

  for (int idx : current) model.terms.push_back(pool[static_cast<std::size_t>(idx)]);
  const Eigen::MatrixXd fs = detail::rsm_features(x, model.terms);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fs);
  if (qr.rank() < fs.cols() || n <= fs.cols()) {
    model.rank_warning = qr.rank() < fs.cols();
    model.coefficients = fs.completeOrthogonalDecomposition().solve(data.responses);
  } else {
    model.coefficients = qr.solve(data.responses);
  }
  return model;
}

}  // namespace sfd
