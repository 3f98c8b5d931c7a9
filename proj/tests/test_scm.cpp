#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dirlearn/scm.hpp"

using namespace dirlearn;

TEST_CASE("confounded example: observational 0.74 vs interventional 0.50") {
  DiscreteScm scm = DiscreteScm::confounded_example();
  const int s = 0;
  Eigen::VectorXd obs = observational(scm, s);
  Eigen::VectorXd doo = interventional(scm, s);
  Eigen::VectorXd bd = backdoor_formula(scm, s);
  // Enumeration oracle: P(Y=1|s0) = (0.5*0.9*0.8 + 0.5*0.1*0.2) / 0.5 = 0.74.
  CHECK(std::abs(obs[1] - 0.74) < 1e-12);
  CHECK(std::abs(doo[1] - 0.50) < 1e-12);
  CHECK((bd - doo).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(obs[1] - doo[1]) > 0.1);  // strict confounding gap
  CHECK(std::abs(obs.sum() - 1.0) < 1e-12);
  CHECK(std::abs(doo.sum() - 1.0) < 1e-12);
}

TEST_CASE("no confounding: equal p_s_given_v rows collapse all three") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteScm scm = DiscreteScm::random(rng, 3, 2, 3);
    for (int v = 1; v < scm.n_v(); ++v) {
      scm.p_s_given_v.row(v) = scm.p_s_given_v.row(0);  // S independent of V
    }
    for (int s = 0; s < scm.n_s(); ++s) {
      Eigen::VectorXd obs = observational(scm, s);
      Eigen::VectorXd doo = interventional(scm, s);
      CHECK((obs - doo).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("backdoor formula equals interventional on random SCMs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int nv = 1 + rng.uniform_int(4);
    const int ns = 1 + rng.uniform_int(4);
    const int ny = 1 + rng.uniform_int(4);
    DiscreteScm scm = DiscreteScm::random(rng, nv, ns, ny);
    for (int s = 0; s < ns; ++s) {
      Eigen::VectorXd a = backdoor_formula(scm, s);
      Eigen::VectorXd b = interventional(scm, s);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(a.sum() - 1.0) < 1e-12);
      CHECK(a.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("point-mass prior reduces intervention to a single table row") {
  DiscreteScm scm = DiscreteScm::confounded_example();
  scm.p_v = Eigen::Vector2d(1.0, 0.0);
  Eigen::VectorXd doo = interventional(scm, 0);
  CHECK(std::abs(doo[0] - 0.2) < 1e-12);
  CHECK(std::abs(doo[1] - 0.8) < 1e-12);
}

TEST_CASE("zero-probability conditioning is an error, intervention is not") {
  DiscreteScm scm = DiscreteScm::confounded_example();
  scm.p_s_given_v.col(0).setZero();
  scm.p_s_given_v.col(1).setOnes();  // S=0 never observed
  CHECK_THROWS_AS(observational(scm, 0), UndefinedConditionalError);
  CHECK_NOTHROW(interventional(scm, 0));
}

TEST_CASE("invalid tables rejected") {
  DiscreteScm scm = DiscreteScm::confounded_example();
  scm.p_v = Eigen::Vector2d(0.6, 0.6);
  CHECK_THROWS_AS(scm.validate(), ContractError);
}

TEST_CASE("json round trip") {
  DiscreteScm scm = DiscreteScm::confounded_example();
  DiscreteScm back = DiscreteScm::from_json(scm.to_json());
  CHECK((back.p_v - scm.p_v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.p_s_given_v - scm.p_s_given_v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.p_y_given_sv[1] - scm.p_y_given_sv[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(DiscreteScm::from_json("{"), FormatError);
  CHECK_THROWS_AS(DiscreteScm::from_json("{\"p_v\":[1.0]}"), FormatError);
}
