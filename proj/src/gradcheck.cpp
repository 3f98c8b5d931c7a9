#include "dirlearn/gradcheck.hpp"

#include <cmath>

#include "dirlearn/losses.hpp"
#include "dirlearn/ops.hpp"
#include "dirlearn/random.hpp"

namespace dirlearn::gradcheck {

namespace {

Array random_array(Rng& rng, int n, double lo = -2.0, double hi = 2.0) {
  Array a(n);
  for (int i = 0; i < n; ++i) a[i] = rng.uniform(lo, hi);
  return a;
}

/// Random fixed projection so the scalar loss exercises the full Jacobian.
Tensor project(Tape& tape, const Tensor& out, Rng& rng) {
  Array c(out.numel());
  for (int i = 0; i < out.numel(); ++i) c[i] = rng.uniform(-1.0, 1.0);
  Tensor coeff = Tensor::from_array(out.shape(), std::move(c));
  return sum(tape, mul(tape, out, coeff));
}

}  // namespace

double max_rel_error(const LossBuilder& builder, std::vector<Tensor> inputs,
                     double h) {
  Tape tape;
  Tensor loss = builder(tape, inputs);
  tape.backward(loss);
  std::vector<Array> analytic;
  analytic.reserve(inputs.size());
  for (Tensor& t : inputs) analytic.push_back(t.grad());

  double worst = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    if (!inputs[ti].requires_grad()) continue;
    Array& vals = inputs[ti].values();
    for (int j = 0; j < inputs[ti].numel(); ++j) {
      const double orig = vals[j];
      vals[j] = orig + h;
      Tape plus(false);
      const double lp = builder(plus, inputs).scalar_value();
      vals[j] = orig - h;
      Tape minus(false);
      const double lm = builder(minus, inputs).scalar_value();
      vals[j] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double a = analytic[ti][j];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-3});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

namespace {

struct OpCase {
  std::string name;
  std::function<double(Rng&)> run;  // one randomized instance -> rel err
};

double check_unary(Rng& rng, const std::function<Tensor(Tape&, const Tensor&)>& op,
                   std::vector<int> shape, double lo = -2.0, double hi = 2.0) {
  Tensor x = Tensor::param(shape, random_array(rng, shape_numel(shape), lo, hi));
  std::uint64_t pseed = rng.engine()();
  return max_rel_error(
      [&op, pseed](Tape& t, std::vector<Tensor>& in) {
        Rng prng(pseed);
        return project(t, op(t, in[0]), prng);
      },
      {x});
}

std::vector<int> rand_mat_shape(Rng& rng) {
  return {1 + rng.uniform_int(4), 1 + rng.uniform_int(6)};
}

std::vector<OpCase> primitive_cases() {
  std::vector<OpCase> cases;

  cases.push_back({"add", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    Tensor a = Tensor::param(shape, random_array(rng, n));
    Tensor b = Tensor::param(shape, random_array(rng, n));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, add(t, in[0], in[1]), prng);
    }, {a, b});
  }});

  cases.push_back({"sub", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    Tensor a = Tensor::param(shape, random_array(rng, n));
    Tensor b = Tensor::param(shape, random_array(rng, n));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, sub(t, in[0], in[1]), prng);
    }, {a, b});
  }});

  cases.push_back({"mul", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    Tensor a = Tensor::param(shape, random_array(rng, n));
    Tensor b = Tensor::param(shape, random_array(rng, n));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, mul(t, in[0], in[1]), prng);
    }, {a, b});
  }});

  cases.push_back({"scale", [](Rng& rng) {
    double c = rng.uniform(-3.0, 3.0);
    return check_unary(rng, [c](Tape& t, const Tensor& x) { return scale(t, x, c); },
                       rand_mat_shape(rng));
  }});

  cases.push_back({"sum", [](Rng& rng) {
    return check_unary(rng, [](Tape& t, const Tensor& x) { return sum(t, x); },
                       rand_mat_shape(rng));
  }});

  cases.push_back({"mean", [](Rng& rng) {
    return check_unary(rng, [](Tape& t, const Tensor& x) { return mean(t, x); },
                       rand_mat_shape(rng));
  }});

  cases.push_back({"reshape", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    return check_unary(rng, [n](Tape& t, const Tensor& x) {
      return reshape(t, x, {n});
    }, shape);
  }});

  cases.push_back({"concat_cols", [](Rng& rng) {
    int n = 1 + rng.uniform_int(4);
    int fa = 1 + rng.uniform_int(4), fb = 1 + rng.uniform_int(4);
    Tensor a = Tensor::param({n, fa}, random_array(rng, n * fa));
    Tensor b = Tensor::param({n, fb}, random_array(rng, n * fb));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, concat_cols(t, in[0], in[1]), prng);
    }, {a, b});
  }});

  cases.push_back({"gather_rows", [](Rng& rng) {
    int n = 2 + rng.uniform_int(4), f = 1 + rng.uniform_int(4);
    int k = 1 + rng.uniform_int(2 * n);  // repeats allowed
    std::vector<int> idx(static_cast<size_t>(k));
    for (int& v : idx) v = rng.uniform_int(n);
    return check_unary(rng, [idx](Tape& t, const Tensor& x) {
      return gather_rows(t, x, idx);
    }, {n, f});
  }});

  cases.push_back({"stack_rows0", [](Rng& rng) {
    int k = 1 + rng.uniform_int(3);
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    std::vector<Tensor> parts;
    for (int i = 0; i < k; ++i) {
      parts.push_back(Tensor::param(shape, random_array(rng, n)));
    }
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, stack_rows0(t, in), prng);
    }, parts);
  }});

  cases.push_back({"log_floored", [](Rng& rng) {
    return check_unary(rng, [](Tape& t, const Tensor& x) {
      return log_floored(t, x);
    }, rand_mat_shape(rng), 0.1, 2.0);
  }});

  cases.push_back({"relu", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    Array vals(n);
    // Keep inputs away from the kink at zero.
    for (int i = 0; i < n; ++i) {
      const double m = rng.uniform(0.05, 2.0);
      vals[i] = rng.uniform_int(2) == 0 ? -m : m;
    }
    Tensor x = Tensor::param(shape, std::move(vals));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, relu(t, in[0]), prng);
    }, {x});
  }});

  cases.push_back({"linear", [](Rng& rng) {
    int n = 1 + rng.uniform_int(3), f = 1 + rng.uniform_int(4), o = 1 + rng.uniform_int(4);
    Tensor x = Tensor::param({n, f}, random_array(rng, n * f));
    Tensor w = Tensor::param({o, f}, random_array(rng, o * f));
    Tensor b = Tensor::param({o}, random_array(rng, o));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, linear(t, in[0], in[1], in[2]), prng);
    }, {x, w, b});
  }});

  cases.push_back({"softmax", [](Rng& rng) {
    return check_unary(rng, [](Tape& t, const Tensor& x) { return softmax(t, x); },
                       rand_mat_shape(rng));
  }});

  cases.push_back({"log_softmax", [](Rng& rng) {
    return check_unary(rng, [](Tape& t, const Tensor& x) {
      return log_softmax(t, x);
    }, rand_mat_shape(rng));
  }});

  cases.push_back({"conv2d", [](Rng& rng) {
    int n = 1 + rng.uniform_int(2), cin = 1 + rng.uniform_int(2);
    int cout = 1 + rng.uniform_int(3), k = 1 + rng.uniform_int(3);
    int h = k + rng.uniform_int(4), w = k + rng.uniform_int(4);
    Tensor x = Tensor::param({n, cin, h, w}, random_array(rng, n * cin * h * w));
    Tensor wt = Tensor::param({cout, cin, k, k}, random_array(rng, cout * cin * k * k));
    Tensor b = Tensor::param({cout}, random_array(rng, cout));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, conv2d(t, in[0], in[1], in[2]), prng);
    }, {x, wt, b});
  }});

  cases.push_back({"conv_transpose2d", [](Rng& rng) {
    int n = 1 + rng.uniform_int(2), cin = 1 + rng.uniform_int(2);
    int cout = 1 + rng.uniform_int(2), k = 1 + rng.uniform_int(3);
    int h = 1 + rng.uniform_int(3), w = 1 + rng.uniform_int(3);
    int stride = 1 + rng.uniform_int(2);
    Tensor x = Tensor::param({n, cin, h, w}, random_array(rng, n * cin * h * w));
    Tensor wt = Tensor::param({cin, cout, k, k}, random_array(rng, cin * cout * k * k));
    Tensor b = Tensor::param({cout}, random_array(rng, cout));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps, stride](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, conv_transpose2d(t, in[0], in[1], in[2], stride), prng);
    }, {x, wt, b});
  }});

  cases.push_back({"maxpool2d", [](Rng& rng) {
    int n = 1 + rng.uniform_int(2), c = 1 + rng.uniform_int(2);
    int k = 2, stride = 2;
    int h = k + rng.uniform_int(4), w = k + rng.uniform_int(4);
    // Separate window entries so the FD step cannot flip an argmax.
    Array vals(n * c * h * w);
    bool ok = false;
    while (!ok) {
      for (int i = 0; i < vals.size(); ++i) {
        vals[i] = rng.uniform_int(401) * 0.01 - 2.0;
      }
      ok = true;
      const int oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
      for (int in = 0; in < n * c && ok; ++in) {
        for (int ioh = 0; ioh < oh && ok; ++ioh) {
          for (int iow = 0; iow < ow && ok; ++iow) {
            double top1 = -1e300, top2 = -1e300;
            for (int ki = 0; ki < k; ++ki) {
              for (int kj = 0; kj < k; ++kj) {
                double v = vals[in * h * w + (ioh * stride + ki) * w + iow * stride + kj];
                if (v > top1) { top2 = top1; top1 = v; }
                else if (v > top2) { top2 = v; }
              }
            }
            if (top1 - top2 < 1e-3) ok = false;
          }
        }
      }
    }
    Tensor x = Tensor::param({n, c, h, w}, std::move(vals));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps, k, stride](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      return project(t, maxpool2d(t, in[0], k, stride), prng);
    }, {x});
  }});

  cases.push_back({"batchnorm2d_train", [](Rng& rng) {
    int n = 2 + rng.uniform_int(2), c = 1 + rng.uniform_int(2);
    int h = 2 + rng.uniform_int(2), w = 2 + rng.uniform_int(2);
    Tensor x = Tensor::param({n, c, h, w}, random_array(rng, n * c * h * w));
    Tensor gamma = Tensor::param({c}, random_array(rng, c, 0.5, 1.5));
    Tensor beta = Tensor::param({c}, random_array(rng, c, -0.5, 0.5));
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps, c](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      BatchNormState state(c);  // fresh per eval: running stats untouched
      return project(t, batchnorm2d(t, in[0], in[1], in[2], state, true), prng);
    }, {x, gamma, beta});
  }});

  cases.push_back({"batchnorm2d_eval", [](Rng& rng) {
    int n = 1 + rng.uniform_int(2), c = 1 + rng.uniform_int(2);
    int h = 2 + rng.uniform_int(2), w = 2 + rng.uniform_int(2);
    Tensor x = Tensor::param({n, c, h, w}, random_array(rng, n * c * h * w));
    Tensor gamma = Tensor::param({c}, random_array(rng, c, 0.5, 1.5));
    Tensor beta = Tensor::param({c}, random_array(rng, c, -0.5, 0.5));
    Array rmean = random_array(rng, c, -0.5, 0.5);
    Array rvar = random_array(rng, c, 0.5, 1.5);
    std::uint64_t ps = rng.engine()();
    return max_rel_error([ps, c, rmean, rvar](Tape& t, std::vector<Tensor>& in) {
      Rng prng(ps);
      BatchNormState state(c);
      state.running_mean = rmean;
      state.running_var = rvar;
      return project(t, batchnorm2d(t, in[0], in[1], in[2], state, false), prng);
    }, {x, gamma, beta});
  }});

  return cases;
}

std::vector<OpCase> loss_cases() {
  std::vector<OpCase> cases;

  cases.push_back({"ce_label_smoothing", [](Rng& rng) {
    int n = 1 + rng.uniform_int(4), c = 2 + rng.uniform_int(4);
    double eps = rng.uniform(0.0, 0.3);
    std::vector<int> targets(static_cast<size_t>(n));
    for (int& t : targets) t = rng.uniform_int(c);
    Tensor logits = Tensor::param({n, c}, random_array(rng, n * c));
    return max_rel_error([targets, eps](Tape& t, std::vector<Tensor>& in) {
      return ce_label_smoothing(t, in[0], targets, eps);
    }, {logits});
  }});

  cases.push_back({"conditional_entropy", [](Rng& rng) {
    int n = 1 + rng.uniform_int(4), c = 2 + rng.uniform_int(4);
    Tensor logits = Tensor::param({n, c}, random_array(rng, n * c));
    return max_rel_error([](Tape& t, std::vector<Tensor>& in) {
      return conditional_entropy(t, softmax(t, in[0]));
    }, {logits});
  }});

  cases.push_back({"indistinguishability_loss", [](Rng& rng) {
    int n = 1 + rng.uniform_int(4), c = 2 + rng.uniform_int(4);
    Tensor logits = Tensor::param({n, c}, random_array(rng, n * c));
    return max_rel_error([](Tape& t, std::vector<Tensor>& in) {
      return indistinguishability_loss(t, softmax(t, in[0]));
    }, {logits});
  }});

  cases.push_back({"invar_loss", [](Rng& rng) {
    int k = 1 + rng.uniform_int(3), n = 1 + rng.uniform_int(3), m = 2 + rng.uniform_int(3);
    std::vector<int> targets(static_cast<size_t>(n));
    for (int& t : targets) t = rng.uniform_int(m);
    Tensor logits = Tensor::param({k, n, m}, random_array(rng, k * n * m));
    return max_rel_error([targets](Tape& t, std::vector<Tensor>& in) {
      return invar_loss(t, in[0], targets);
    }, {logits});
  }});

  cases.push_back({"mi_plugin_ihat", [](Rng& rng) {
    int n = 2 + rng.uniform_int(4), g = 2 + rng.uniform_int(3);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int& l : labels) l = rng.uniform_int(g);
    Tensor logits = Tensor::param({n, g}, random_array(rng, n * g));
    return max_rel_error([labels](Tape& t, std::vector<Tensor>& in) {
      return mi_plugin(t, softmax(t, in[0]), labels).i_hat;
    }, {logits});
  }});

  cases.push_back({"recon_loss", [](Rng& rng) {
    auto shape = rand_mat_shape(rng);
    int n = shape_numel(shape);
    Tensor a = Tensor::param(shape, random_array(rng, n));
    Tensor b = Tensor::param(shape, random_array(rng, n));
    return max_rel_error([](Tape& t, std::vector<Tensor>& in) {
      return recon_loss(t, in[0], in[1]);
    }, {a, b});
  }});

  return cases;
}

}  // namespace

std::vector<Result> run_all(int instances_per_op, std::uint64_t seed) {
  std::vector<Result> results;
  auto run_group = [&](const std::vector<OpCase>& cases) {
    for (const OpCase& c : cases) {
      Rng rng(derive_seed(seed, {std::hash<std::string>{}(c.name)}));
      Result r{c.name, 0.0, instances_per_op};
      for (int i = 0; i < instances_per_op; ++i) {
        r.max_rel_err = std::max(r.max_rel_err, c.run(rng));
      }
      results.push_back(r);
    }
  };
  run_group(primitive_cases());
  run_group(loss_cases());
  return results;
}

}  // namespace dirlearn::gradcheck
