#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dirlearn/losses.hpp"
#include "dirlearn/ops.hpp"
#include "dirlearn/random.hpp"

using namespace dirlearn;

namespace {

Tensor logits_of_probs(std::vector<int> shape, std::initializer_list<double> p) {
  Array a(static_cast<Eigen::Index>(p.size()));
  int i = 0;
  for (double v : p) a[i++] = std::log(v);
  return Tensor::from_array(std::move(shape), std::move(a));
}

Tensor make(std::vector<int> shape, std::initializer_list<double> vals) {
  Array a(static_cast<Eigen::Index>(vals.size()));
  int i = 0;
  for (double v : vals) a[i++] = v;
  return Tensor::from_array(std::move(shape), std::move(a));
}

}  // namespace

TEST_CASE("ce_label_smoothing: uniform prediction costs ln C for any epsilon") {
  Tape tape;
  const int c = 5;
  Tensor logits = Tensor::zeros({3, c});
  for (double eps : {0.0, 0.1, 0.4}) {
    Tensor loss = ce_label_smoothing(tape, logits, {0, 3, 4}, eps);
    CHECK(loss.scalar_value() == doctest::Approx(std::log(c)).epsilon(1e-12));
  }
}

TEST_CASE("ce_label_smoothing: hand-computed two-class case") {
  Tape tape;
  Tensor logits = logits_of_probs({1, 2}, {0.9, 0.1});
  Tensor loss = ce_label_smoothing(tape, logits, {0}, 0.1);
  // q = (0.95, 0.05); -(0.95 ln 0.9 + 0.05 ln 0.1)
  const double expect = -(0.95 * std::log(0.9) + 0.05 * std::log(0.1));
  CHECK(loss.scalar_value() == doctest::Approx(expect).epsilon(1e-9));
  CHECK(loss.scalar_value() == doctest::Approx(0.21522).epsilon(1e-4));
}

TEST_CASE("ce_label_smoothing: saturated correct prediction with eps=0 -> 0") {
  Tape tape;
  Tensor logits = make({1, 3}, {40.0, 0.0, 0.0});
  Tensor loss = ce_label_smoothing(tape, logits, {0}, 0.0);
  CHECK(loss.scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ce_label_smoothing: bad targets and epsilon rejected") {
  Tape tape;
  Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(ce_label_smoothing(tape, logits, {0, 3}, 0.1), ContractError);
  CHECK_THROWS_AS(ce_label_smoothing(tape, logits, {0, 1}, 1.0), ContractError);
}

TEST_CASE("ce >= H(q) with equality iff p == q") {
  Rng rng(99);
  Tape tape;
  const int c = 4;
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = rng.uniform(0.0, 0.5);
    const int target = rng.uniform_int(c);
    // H(q) for the smoothed target distribution.
    double hq = 0;
    for (int k = 0; k < c; ++k) {
      const double qk = eps / c + (k == target ? 1.0 - eps : 0.0);
      if (qk > 0) hq -= qk * std::log(qk);
    }
    Array lv(c);
    for (int k = 0; k < c; ++k) lv[k] = rng.uniform(-3, 3);
    Tensor logits = Tensor::from_array({1, c}, lv);
    double ce = ce_label_smoothing(tape, logits, {target}, eps).scalar_value();
    CHECK(ce >= hq - 1e-12);

    // p == q: logits = log q gives exactly H(q).
    Array lq(c);
    for (int k = 0; k < c; ++k) {
      lq[k] = std::log(eps / c + (k == target ? 1.0 - eps : 0.0) + 1e-300);
    }
    Tensor qlogits = Tensor::from_array({1, c}, lq);
    double ceq = ce_label_smoothing(tape, qlogits, {target}, eps).scalar_value();
    CHECK(ceq == doctest::Approx(hq).epsilon(1e-9));
  }
}

TEST_CASE("conditional_entropy: hand value, uniform max, one-hot min") {
  Tape tape;
  Tensor p = make({1, 3}, {0.5, 0.25, 0.25});
  const double expect = 0.5 * std::log(2.0) + 0.5 * std::log(4.0);
  CHECK(conditional_entropy(tape, p).scalar_value() ==
        doctest::Approx(expect).epsilon(1e-9));
  CHECK(conditional_entropy(tape, p).scalar_value() ==
        doctest::Approx(1.03972).epsilon(1e-4));

  const int n = 4, k = 5;
  Tensor u = Tensor::full({n, k}, 1.0 / k);
  CHECK(conditional_entropy(tape, u).scalar_value() ==
        doctest::Approx(n * std::log(k)).epsilon(1e-12));

  Tensor onehot = Tensor::zeros({2, 3});
  onehot.matrix2d()(0, 1) = 1.0;
  onehot.matrix2d()(1, 2) = 1.0;
  CHECK(conditional_entropy(tape, onehot).scalar_value() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("conditional_entropy: strictly below ln C off the uniform row") {
  Rng rng(7);
  Tape tape;
  const int k = 6;
  for (int trial = 0; trial < 100; ++trial) {
    Array p(k);
    for (int i = 0; i < k; ++i) p[i] = 1.0 / k;
    // Random perturbation on the simplex.
    const int a = rng.uniform_int(k);
    int b = rng.uniform_int(k);
    while (b == a) b = rng.uniform_int(k);
    const double d = rng.uniform(1e-6, 1.0 / k);
    p[a] += d;
    p[b] -= d;
    Tensor t = Tensor::from_array({1, k}, p);
    CHECK(conditional_entropy(tape, t).scalar_value() < std::log(k) - 1e-14);
  }
}

TEST_CASE("conditional_entropy: contract checks on rows") {
  Tape tape;
  Tensor bad = make({1, 2}, {0.7, 0.7});
  CHECK_THROWS_AS(conditional_entropy(tape, bad), ContractError);
  Tensor neg = make({1, 2}, {1.5, -0.5});
  CHECK_THROWS_AS(conditional_entropy(tape, neg), ContractError);
}

TEST_CASE("indistinguishability loss is -H") {
  Tape tape;
  Tensor p = make({2, 2}, {0.5, 0.5, 0.9, 0.1});
  const double h = conditional_entropy(tape, p).scalar_value();
  CHECK(indistinguishability_loss(tape, p).scalar_value() ==
        doctest::Approx(-h).epsilon(1e-12));
}

TEST_CASE("invar_loss: K=1 equals plain CE, duplication doubles it") {
  Rng rng(31);
  Tape tape;
  const int n = 4, m = 5;
  Array lv(n * m);
  for (int i = 0; i < lv.size(); ++i) lv[i] = rng.uniform(-2, 2);
  std::vector<int> targets = {0, 3, 2, 4};

  Tensor single = Tensor::from_array({1, n, m}, lv);
  Tensor flat = Tensor::from_array({n, m}, lv);
  const double k1 = invar_loss(tape, single, targets).scalar_value();
  const double ce = ce_label_smoothing(tape, flat, targets, 0.0, Reduction::Sum)
                        .scalar_value();
  CHECK(k1 == doctest::Approx(ce).epsilon(1e-12));

  Array dv(2 * n * m);
  dv << lv, lv;
  Tensor doubled = Tensor::from_array({2, n, m}, dv);
  CHECK(invar_loss(tape, doubled, targets).scalar_value() ==
        doctest::Approx(2.0 * k1).epsilon(1e-12));
}

TEST_CASE("invar_loss: equals the per-term summation oracle") {
  Rng rng(32);
  Tape tape;
  const int k = 3, n = 5, m = 4;
  Array lv(k * n * m);
  for (int i = 0; i < lv.size(); ++i) lv[i] = rng.uniform(-3, 3);
  std::vector<int> targets(n);
  for (int& t : targets) t = rng.uniform_int(m);
  Tensor stacked = Tensor::from_array({k, n, m}, lv);
  const double got = invar_loss(tape, stacked, targets).scalar_value();

  // Oracle: explicit -log softmax per (k, i) term.
  double expect = 0;
  for (int ik = 0; ik < k; ++ik) {
    for (int i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int j = 0; j < m; ++j) mx = std::max(mx, lv[(ik * n + i) * m + j]);
      double z = 0;
      for (int j = 0; j < m; ++j) z += std::exp(lv[(ik * n + i) * m + j] - mx);
      expect -= lv[(ik * n + i) * m + targets[i]] - mx - std::log(z);
    }
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mi_plugin: uniform posteriors on balanced labels give zero MI") {
  Tape tape;
  const int n = 10, g = 5;
  Tensor p = Tensor::full({n, g}, 1.0 / g);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % g;
  auto rep = mi_plugin(tape, p, labels);
  CHECK(rep.h_d.scalar_value() == doctest::Approx(std::log(g)).epsilon(1e-12));
  CHECK(rep.i_hat.scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mi_plugin: one-hot posteriors matching balanced binary labels") {
  Tape tape;
  const int n = 6, g = 2;
  Tensor p = Tensor::zeros({n, g});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 2;
    p.matrix2d()(i, labels[i]) = 1.0;
  }
  auto rep = mi_plugin(tape, p, labels);
  CHECK(rep.h_d.scalar_value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(rep.h_d_given_s.scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.i_hat.scalar_value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mi_plugin: identity holds and H_D ignores the posteriors") {
  Rng rng(44);
  Tape tape;
  const int n = 12, g = 4;
  std::vector<int> labels(n);
  for (int& l : labels) l = rng.uniform_int(g);
  for (int trial = 0; trial < 20; ++trial) {
    Array lv(n * g);
    for (int i = 0; i < lv.size(); ++i) lv[i] = rng.uniform(-4, 4);
    Tensor post = softmax(tape, Tensor::from_array({n, g}, lv));
    auto rep = mi_plugin(tape, post, labels);
    const double resid = rep.i_hat.scalar_value() +
                         rep.h_d_given_s.scalar_value() -
                         rep.h_d.scalar_value();
    CHECK(std::abs(resid) <= 1e-12);
  }
  // Perturbing the posteriors leaves H_D untouched.
  Tensor p1 = Tensor::full({n, g}, 1.0 / g);
  Array lv(n * g);
  for (int i = 0; i < lv.size(); ++i) lv[i] = rng.uniform(-4, 4);
  Tensor p2 = softmax(tape, Tensor::from_array({n, g}, lv));
  CHECK(mi_plugin(tape, p1, labels).h_d.scalar_value() ==
        mi_plugin(tape, p2, labels).h_d.scalar_value());
}

TEST_CASE("recon_loss: zero on identical inputs, 1 on unit gap, symmetric") {
  Tape tape;
  Tensor a = Tensor::full({1, 1, 28, 28}, 0.0);
  Tensor b = Tensor::full({1, 1, 28, 28}, 1.0);
  CHECK(recon_loss(tape, a, a).scalar_value() == 0.0);
  CHECK(recon_loss(tape, a, b).scalar_value() == doctest::Approx(1.0));
  Rng rng(5);
  Array av(12), bv(12);
  for (int i = 0; i < 12; ++i) {
    av[i] = rng.uniform(-1, 1);
    bv[i] = rng.uniform(-1, 1);
  }
  Tensor x = Tensor::from_array({3, 4}, av);
  Tensor y = Tensor::from_array({3, 4}, bv);
  CHECK(recon_loss(tape, x, y).scalar_value() ==
        doctest::Approx(recon_loss(tape, y, x).scalar_value()).epsilon(1e-15));
  Tensor z = Tensor::zeros({4, 3});
  CHECK_THROWS_AS(recon_loss(tape, x, z), ShapeError);
}

TEST_CASE("loss report serializes to a JSONL row") {
  LossReport r{"id_s", 1.5, 100};
  CHECK(loss_report_jsonl(7, r) == "{\"step\":7,\"name\":\"id_s\",\"value\":1.5}");
}
