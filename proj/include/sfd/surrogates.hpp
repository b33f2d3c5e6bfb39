#pragma once

#include <algorithm>
#include <map>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "sfd/core.hpp"
#include "sfd/surrogates/delaunay.hpp"
#include "sfd/surrogates/gp.hpp"
#include "sfd/surrogates/lshep.hpp"
#include "sfd/surrogates/mars.hpp"
#include "sfd/surrogates/rsm.hpp"

namespace sfd {

enum class SurrogateKind { Rsm, Mars, Lshep, Delaunay, Gp };

inline const std::vector<SurrogateKind>& all_surrogate_kinds() {
  static const std::vector<SurrogateKind> kinds = {SurrogateKind::Rsm, SurrogateKind::Mars, SurrogateKind::Lshep,
                                                   SurrogateKind::Delaunay, SurrogateKind::Gp};
  return kinds;
}

inline std::string to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::Rsm: return "rsm";
    case SurrogateKind::Mars: return "mars";
    case SurrogateKind::Lshep: return "lshep";
    case SurrogateKind::Delaunay: return "delaunay";
    case SurrogateKind::Gp: return "gp";
  }
  return "?";
}

inline SurrogateKind parse_surrogate_kind(const std::string& s) {
  static const std::map<std::string, SurrogateKind> names = {
      {"rsm", SurrogateKind::Rsm},           {"mars", SurrogateKind::Mars},
      {"lshep", SurrogateKind::Lshep},       {"lsp", SurrogateKind::Lshep},
      {"delaunay", SurrogateKind::Delaunay}, {"gp", SurrogateKind::Gp}};
  auto it = names.find(s);
  if (it == names.end()) throw FormatError("unknown surrogate kind '" + s + "'");
  return it->second;
}

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::Gp;
  GpOptions gp;
  MarsOptions mars;
  LshepOptions lshep;
};

inline void validate(const SurrogateSpec& s) {
  validate(s.gp);
  if (s.mars.max_terms_grid.empty() || s.mars.max_degree_grid.empty()) throw ShapeError("mars grids must be nonempty");
  for (int t : s.mars.max_terms_grid)
    if (t < 1) throw ShapeError("mars max_terms must be positive");
  for (int g : s.mars.max_degree_grid)
    if (g < 1) throw ShapeError("mars max_degree must be positive");
  if (!(s.lshep.radius_multiplier > 0.0)) throw ShapeError("lshep radius_multiplier must be positive");
}

/// Smallest training set each kind accepts in dimension d.
inline Eigen::Index minimum_training_size(SurrogateKind k, int d) {
  switch (k) {
    case SurrogateKind::Rsm: return 1;
    case SurrogateKind::Mars: return 10;
    case SurrogateKind::Lshep: return d + 2;
    case SurrogateKind::Delaunay: return d + 1;
    case SurrogateKind::Gp: return 5;
  }
  return 1;
}

using SurrogateModel = std::variant<RsmModel, MarsModel, LshepModel, DelaunayModel, GpModel>;

struct Prediction {
  Vector values;
  std::vector<std::string> warnings;
};

/// A fitted model in unit-cube coordinates of its training design.
struct FittedSurrogate {
  SurrogateKind kind = SurrogateKind::Gp;
  int dim = 0;
  SurrogateModel model;
  std::vector<std::string> warnings;

  Prediction predict_detailed(const PointMatrix& queries) const {
    Prediction out;
    if (queries.rows() == 0) return out;
    if (queries.cols() != dim)
      throw ShapeError("queries have " + std::to_string(queries.cols()) + " columns, model expects " +
                       std::to_string(dim));
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, LshepModel>) {
            auto p = m.predict_detailed(queries);
            out.values = std::move(p.values);
            if (p.uncovered > 0)
              out.warnings.push_back("CoverageWarning: " + std::to_string(p.uncovered) +
                                     " queries outside every Shepard radius");
          } else if constexpr (std::is_same_v<M, DelaunayModel>) {
            auto p = m.predict_detailed(queries);
            out.values = std::move(p.values);
            const auto ext = std::count(p.extrapolated.begin(), p.extrapolated.end(), true);
            if (ext > 0) out.warnings.push_back(std::to_string(ext) + " queries extrapolated by hull projection");
          } else {
            out.values = m.predict(queries);
          }
        },
        model);
    if (!out.values.allFinite()) throw NumericalError(to_string(kind) + " produced a non-finite prediction");
    return out;
  }

  Vector predict(const PointMatrix& queries) const {
    if (queries.rows() == 0) return Vector(0);
    return predict_detailed(queries).values;
  }
};

inline FittedSurrogate fit(const Dataset& data, const SurrogateSpec& spec) {
  validate(spec);
  if (data.size() < minimum_training_size(spec.kind, data.dim()))
    throw ShapeError(to_string(spec.kind) + " needs at least " +
                     std::to_string(minimum_training_size(spec.kind, data.dim())) + " points");
  FittedSurrogate f;
  f.kind = spec.kind;
  f.dim = data.dim();
  switch (spec.kind) {
    case SurrogateKind::Rsm: {
      auto m = fit_rsm(data);
      if (m.rank_warning) f.warnings.push_back("RankWarning: rsm design matrix is rank deficient");
      f.model = std::move(m);
      break;
    }
    case SurrogateKind::Mars: f.model = fit_mars(data, spec.mars); break;
    case SurrogateKind::Lshep: {
      auto m = fit_lshep(data, spec.lshep);
      if (m.padded_fits > 0)
        f.warnings.push_back(std::to_string(m.padded_fits) + " lshep local fits padded with the global slope");
      f.model = std::move(m);
      break;
    }
    case SurrogateKind::Delaunay: f.model = fit_delaunay(data); break;
    case SurrogateKind::Gp: {
      auto m = fit_gp(data, spec.gp);
      if (m.nugget_retries > 0)
        f.warnings.push_back("gp nugget doubled " + std::to_string(m.nugget_retries) + " times for a stable factor");
      f.model = std::move(m);
      break;
    }
  }
  return f;
}

inline FittedSurrogate fit(const Dataset& data, SurrogateKind kind) {
  SurrogateSpec s;
  s.kind = kind;
  return fit(data, s);
}

}  // namespace sfd
