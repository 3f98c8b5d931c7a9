#include "dirlearn/scm.hpp"

#include <cmath>

#include <json.hpp>

#include "dirlearn/errors.hpp"

namespace dirlearn {

namespace {

void check_stochastic(const char* name, const Eigen::VectorXd& row) {
  if (row.minCoeff() < 0.0) {
    throw ContractError(std::string(name) + ": negative probability entry");
  }
  if (std::abs(row.sum() - 1.0) > 1e-12) {
    throw ContractError(std::string(name) + ": row sums to " +
                        std::to_string(row.sum()) + ", expected 1");
  }
}

}  // namespace

void DiscreteScm::validate() const {
  if (p_v.size() == 0) throw ContractError("scm: empty confounder alphabet");
  check_stochastic("p_v", p_v);
  if (p_s_given_v.rows() != n_v()) {
    throw ContractError("scm: p_s_given_v must have one row per v");
  }
  for (int v = 0; v < n_v(); ++v) {
    check_stochastic("p_s_given_v", p_s_given_v.row(v));
  }
  if (static_cast<int>(p_y_given_sv.size()) != n_s()) {
    throw ContractError("scm: p_y_given_sv must have one table per s");
  }
  for (const auto& table : p_y_given_sv) {
    if (table.rows() != n_v() || table.cols() != n_y()) {
      throw ContractError("scm: p_y_given_sv tables must be |V| x |Y|");
    }
    for (int v = 0; v < n_v(); ++v) check_stochastic("p_y_given_sv", table.row(v));
  }
}

std::string DiscreteScm::to_json() const {
  nlohmann::ordered_json j;
  j["p_v"] = std::vector<double>(p_v.data(), p_v.data() + p_v.size());
  {
    std::vector<std::vector<double>> rows;
    for (int v = 0; v < n_v(); ++v) {
      rows.emplace_back(p_s_given_v.row(v).begin(), p_s_given_v.row(v).end());
    }
    j["p_s_given_v"] = rows;
  }
  {
    std::vector<std::vector<std::vector<double>>> tables;
    for (const auto& t : p_y_given_sv) {
      std::vector<std::vector<double>> rows;
      for (int v = 0; v < t.rows(); ++v) {
        rows.emplace_back(t.row(v).begin(), t.row(v).end());
      }
      tables.push_back(std::move(rows));
    }
    j["p_y_given_sv"] = tables;
  }
  return j.dump(2);
}

DiscreteScm DiscreteScm::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("scm: invalid JSON: ") + e.what());
  }
  DiscreteScm scm;
  try {
    const auto pv = j.at("p_v").get<std::vector<double>>();
    scm.p_v = Eigen::Map<const Eigen::VectorXd>(pv.data(), static_cast<Eigen::Index>(pv.size()));
    const auto psv = j.at("p_s_given_v").get<std::vector<std::vector<double>>>();
    scm.p_s_given_v.resize(static_cast<Eigen::Index>(psv.size()),
                           static_cast<Eigen::Index>(psv.empty() ? 0 : psv[0].size()));
    for (size_t v = 0; v < psv.size(); ++v) {
      if (static_cast<Eigen::Index>(psv[v].size()) != scm.p_s_given_v.cols()) {
        throw FormatError("scm: ragged p_s_given_v");
      }
      for (size_t s = 0; s < psv[v].size(); ++s) scm.p_s_given_v(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(s)) = psv[v][s];
    }
    const auto pysv = j.at("p_y_given_sv").get<std::vector<std::vector<std::vector<double>>>>();
    for (const auto& rows : pysv) {
      Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
      for (size_t v = 0; v < rows.size(); ++v) {
        if (static_cast<Eigen::Index>(rows[v].size()) != t.cols()) {
          throw FormatError("scm: ragged p_y_given_sv");
        }
        for (size_t y = 0; y < rows[v].size(); ++y) t(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(y)) = rows[v][y];
      }
      scm.p_y_given_sv.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scm: missing or malformed field: ") + e.what());
  }
  scm.validate();
  return scm;
}

DiscreteScm DiscreteScm::random(Rng& rng, int nv, int ns, int ny) {
  auto random_row = [&rng](Eigen::Index n) {
    Eigen::VectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) row[i] = rng.uniform(0.01, 1.0);
    row /= row.sum();
    return row;
  };
  DiscreteScm scm;
  scm.p_v = random_row(nv);
  scm.p_s_given_v.resize(nv, ns);
  for (int v = 0; v < nv; ++v) scm.p_s_given_v.row(v) = random_row(ns).transpose();
  for (int s = 0; s < ns; ++s) {
    Eigen::MatrixXd t(nv, ny);
    for (int v = 0; v < nv; ++v) t.row(v) = random_row(ny).transpose();
    scm.p_y_given_sv.push_back(std::move(t));
  }
  return scm;
}

DiscreteScm DiscreteScm::confounded_example() {
  DiscreteScm scm;
  scm.p_v = Eigen::Vector2d(0.5, 0.5);
  scm.p_s_given_v.resize(2, 2);
  scm.p_s_given_v << 0.9, 0.1,  // P(S|v0)
      0.1, 0.9;                 // P(S|v1)
  Eigen::MatrixXd t(2, 2);
  t << 0.2, 0.8,  // P(Y|s, v0): Y=1 with 0.8
      0.8, 0.2;   // P(Y|s, v1): Y=1 with 0.2
  scm.p_y_given_sv = {t, t};
  return scm;
}

Eigen::VectorXd observational(const DiscreteScm& scm, int s) {
  scm.validate();
  if (s < 0 || s >= scm.n_s()) throw ContractError("observational: s out of range");
  // Full joint P(v, s, y) = P(v) P(s|v) P(y|s,v), then condition on S=s.
  Eigen::VectorXd joint_y = Eigen::VectorXd::Zero(scm.n_y());
  double p_s = 0.0;
  for (int v = 0; v < scm.n_v(); ++v) {
    const double pvs = scm.p_v[v] * scm.p_s_given_v(v, s);
    p_s += pvs;
    joint_y += pvs * scm.p_y_given_sv[static_cast<size_t>(s)].row(v).transpose();
  }
  if (p_s <= 0.0) {
    throw UndefinedConditionalError("observational: P(S=" + std::to_string(s) +
                                    ") = 0, conditional undefined");
  }
  return joint_y / p_s;
}

Eigen::VectorXd interventional(const DiscreteScm& scm, int s) {
  scm.validate();
  if (s < 0 || s >= scm.n_s()) throw ContractError("interventional: s out of range");
  // Mutilated model: S set exogenously, so P'(v, y) = P(v) P(y|s,v).
  Eigen::VectorXd out = Eigen::VectorXd::Zero(scm.n_y());
  for (int v = 0; v < scm.n_v(); ++v) {
    for (int y = 0; y < scm.n_y(); ++y) {
      out[y] += scm.p_v[v] * scm.p_y_given_sv[static_cast<size_t>(s)](v, y);
    }
  }
  return out;
}

Eigen::VectorXd backdoor_formula(const DiscreteScm& scm, int s) {
  scm.validate();
  if (s < 0 || s >= scm.n_s()) throw ContractError("backdoor_formula: s out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(scm.n_y());
  for (int v = 0; v < scm.n_v(); ++v) {
    out += scm.p_y_given_sv[static_cast<size_t>(s)].row(v).transpose() * scm.p_v[v];
  }
  return out;
}

}  // namespace dirlearn
