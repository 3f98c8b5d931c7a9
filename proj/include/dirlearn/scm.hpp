#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "dirlearn/random.hpp"

namespace dirlearn {

/// Discrete structural causal model over finite alphabets with graph
/// V -> S, V -> Y, S -> Y. Every distribution row sums to 1 within 1e-12.
struct DiscreteScm {
  Eigen::VectorXd p_v;                        // |V|
  Eigen::MatrixXd p_s_given_v;                // |V| x |S|, rows stochastic
  std::vector<Eigen::MatrixXd> p_y_given_sv;  // [|S|] of |V| x |Y|, rows stochastic

  int n_v() const { return static_cast<int>(p_v.size()); }
  int n_s() const { return static_cast<int>(p_s_given_v.cols()); }
  int n_y() const {
    return p_y_given_sv.empty() ? 0 : static_cast<int>(p_y_given_sv[0].cols());
  }

  /// Throws ContractError unless all tables are stochastic and consistent.
  void validate() const;

  std::string to_json() const;
  static DiscreteScm from_json(const std::string& text);

  static DiscreteScm random(Rng& rng, int nv, int ns, int ny);

  /// The bundled 2x2x2 confounded example: P(Y=1|S=0) = 0.74 observationally
  /// but 0.50 under intervention.
  static DiscreteScm confounded_example();
};

/// P(Y | S=s) by enumeration of the full joint; errors when P(S=s) = 0.
Eigen::VectorXd observational(const DiscreteScm& scm, int s);

/// P(Y | do(S=s)) by enumerating the joint of the mutilated model in which
/// S is set exogenously.
Eigen::VectorXd interventional(const DiscreteScm& scm, int s);

/// Literal backdoor sum over the confounder: sum_v P(Y|s,v) P(v).
Eigen::VectorXd backdoor_formula(const DiscreteScm& scm, int s);

}  // namespace dirlearn
