#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "sfd/io/config.hpp"
#include "sfd/surrogates.hpp"

namespace sfd {

inline constexpr const char* kModelFormat = "sfd-model";
inline constexpr int kModelVersion = 1;

namespace detail {

// Diagnostics may be non-finite; JSON has no literal for that.
inline Json scalar_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline double json_scalar(const Json& p, const char* key) {
  if (!p.contains(key)) return 0.0;
  const Json& v = p.at(key);
  if (!v.is_string()) return v.get<double>();
  const std::string t = v.get<std::string>();
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  throw FormatError(std::string("model field '") + key + "' is not a number");
}

inline Json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class M>
Json mat_json(const M& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(r);
  }
  return rows;
}

template <class M>
M json_mat(const Json& j, Eigen::Index cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  M m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw FormatError("model matrix row has the wrong width");
    for (Eigen::Index k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  }
  return m;
}

}  // namespace detail

/// Self-describing JSON form of a fitted model. The optional space maps natural
/// coordinates for the CLI.
inline Json model_to_json(const FittedSurrogate& f, const DesignSpace* space = nullptr) {
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kind"] = to_string(f.kind);
  j["dim"] = f.dim;
  if (space) j["space"] = space_to_json(*space);
  Json p;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RsmModel>) {
          p["terms"] = Json::array();
          for (const auto& t : m.terms) p["terms"].push_back({t.a, t.b});
          p["coefficients"] = detail::vec_json(m.coefficients);
          p["rank_warning"] = m.rank_warning;
        } else if constexpr (std::is_same_v<M, MarsModel>) {
          p["basis"] = Json::array();
          for (const auto& b : m.basis) {
            Json hs = Json::array();
            for (const auto& h : b.hinges) hs.push_back({{"var", h.var}, {"knot", h.knot}, {"sign", h.sign}});
            p["basis"].push_back(hs);
          }
          p["coefficients"] = detail::vec_json(m.coefficients);
          p["max_terms"] = m.max_terms;
          p["max_degree"] = m.max_degree;
          p["gcv"] = detail::scalar_json(m.gcv);
          p["gcv_unpruned"] = detail::scalar_json(m.gcv_unpruned);
          p["gcv_r2"] = detail::scalar_json(m.gcv_r2);
        } else if constexpr (std::is_same_v<M, LshepModel>) {
          p["nodes"] = detail::mat_json(m.nodes);
          p["values"] = detail::vec_json(m.values);
          p["gradients"] = detail::mat_json(m.gradients);
          p["radii"] = detail::vec_json(m.radii);
          p["padded_fits"] = m.padded_fits;
        } else if constexpr (std::is_same_v<M, DelaunayModel>) {
          p["points"] = detail::mat_json(m.points());
          p["values"] = detail::vec_json(m.values());
        } else if constexpr (std::is_same_v<M, GpModel>) {
          p["x_min"] = detail::vec_json(m.x_min);
          p["x_range"] = detail::vec_json(m.x_range);
          p["y_min"] = m.y_min;
          p["y_range"] = m.y_range;
          p["y_center"] = m.y_center;
          p["theta"] = detail::vec_json(m.theta);
          p["nugget"] = m.nugget;
          p["sigma2"] = m.sigma2;
          p["log_likelihood"] = detail::scalar_json(m.log_likelihood);
          p["train"] = detail::mat_json(m.train);
          p["z"] = detail::vec_json(m.z);
          p["alpha"] = detail::vec_json(m.alpha);
          p["local_neighborhood"] = m.local_neighborhood ? Json(*m.local_neighborhood) : Json(nullptr);
          p["nugget_retries"] = m.nugget_retries;
        }
      },
      f.model);
  j["parameters"] = p;
  j["warnings"] = f.warnings;
  return j;
}

struct LoadedModel {
  FittedSurrogate model;
  std::optional<DesignSpace> space;
};

inline LoadedModel model_from_json(const Json& j) {
  try {
    if (j.value("format", std::string()) != kModelFormat) throw FormatError("not an sfd model file");
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
    LoadedModel out;
    FittedSurrogate& f = out.model;
    f.kind = parse_surrogate_kind(j.at("kind").get<std::string>());
    f.dim = j.at("dim").get<int>();
    if (j.contains("space")) out.space = parse_space(j.at("space"));
    const Json& p = j.at("parameters");
    const Eigen::Index d = f.dim;
    switch (f.kind) {
      case SurrogateKind::Rsm: {
        RsmModel m;
        for (const auto& t : p.at("terms")) m.terms.push_back({t.at(0).get<int>(), t.at(1).get<int>()});
        m.coefficients = detail::json_vec(p.at("coefficients"));
        m.rank_warning = p.value("rank_warning", false);
        f.model = std::move(m);
        break;
      }
      case SurrogateKind::Mars: {
        MarsModel m;
        for (const auto& b : p.at("basis")) {
          MarsBasis mb;
          for (const auto& h : b) mb.hinges.push_back({h.at("var").get<int>(), h.at("knot").get<double>(), h.at("sign").get<int>()});
          m.basis.push_back(std::move(mb));
        }
        m.coefficients = detail::json_vec(p.at("coefficients"));
        m.max_terms = p.value("max_terms", 0);
        m.max_degree = p.value("max_degree", 0);
        m.gcv = detail::json_scalar(p, "gcv");
        m.gcv_unpruned = detail::json_scalar(p, "gcv_unpruned");
        m.gcv_r2 = detail::json_scalar(p, "gcv_r2");
        f.model = std::move(m);
        break;
      }
      case SurrogateKind::Lshep: {
        LshepModel m;
        m.nodes = detail::json_mat<PointMatrix>(p.at("nodes"), d);
        m.values = detail::json_vec(p.at("values"));
        m.gradients = detail::json_mat<Eigen::MatrixXd>(p.at("gradients"), d);
        m.radii = detail::json_vec(p.at("radii"));
        m.padded_fits = p.value("padded_fits", 0);
        f.model = std::move(m);
        break;
      }
      case SurrogateKind::Delaunay: {
        f.model = DelaunayModel(detail::json_mat<PointMatrix>(p.at("points"), d), detail::json_vec(p.at("values")));
        break;
      }
      case SurrogateKind::Gp: {
        GpModel m;
        m.x_min = detail::json_vec(p.at("x_min"));
        m.x_range = detail::json_vec(p.at("x_range"));
        m.y_min = p.at("y_min").get<double>();
        m.y_range = p.at("y_range").get<double>();
        m.y_center = p.at("y_center").get<double>();
        m.theta = detail::json_vec(p.at("theta"));
        m.nugget = p.at("nugget").get<double>();
        m.sigma2 = p.at("sigma2").get<double>();
        m.log_likelihood = detail::json_scalar(p, "log_likelihood");
        m.train = detail::json_mat<PointMatrix>(p.at("train"), d);
        m.z = detail::json_vec(p.at("z"));
        m.alpha = detail::json_vec(p.at("alpha"));
        if (!p.at("local_neighborhood").is_null()) m.local_neighborhood = p.at("local_neighborhood").get<int>();
        m.nugget_retries = p.value("nugget_retries", 0);
        f.model = std::move(m);
        break;
      }
    }
    if (j.contains("warnings")) f.warnings = j.at("warnings").get<std::vector<std::string>>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const FittedSurrogate& f, const DesignSpace* space = nullptr) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << model_to_json(f, space).dump(1) << "\n";
}

inline LoadedModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

}  // namespace sfd
