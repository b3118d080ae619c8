#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mihash/gradcheck.hpp"
#include "mihash/loss.hpp"
#include "mihash/net.hpp"
#include "mihash/rng.hpp"

using namespace mihash;

namespace {

Bag make_bag(const std::string& id, const std::string& label,
             std::initializer_list<std::vector<double>> features) {
  Bag b{id, label, {}};
  for (const auto& f : features) {
    b.instances.push_back(Instance{f});
  }
  return b;
}

BagDataset tiny_dataset(Rng& rng, std::size_t dim) {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.bags_per_class = 3;
  spec.dim = dim;
  spec.bag_min = 1;
  spec.bag_max = 4;
  return generate_synthetic(rng, spec);
}

}  // namespace

TEST_CASE("init_params follows the fan rule with zero biases") {
  Rng rng(3);
  const ModelParams p = init_params(rng, 5, {8}, 6, 4);
  REQUIRE(p.encoder.size() == 2);
  CHECK(p.encoder[0].weight.rows == 8);
  CHECK(p.encoder[0].weight.cols == 5);
  CHECK(p.encoder[0].activation == Activation::ReLU);
  CHECK(p.encoder[1].activation == Activation::Linear);
  CHECK(p.mi_head.weight.rows == 4);
  CHECK(p.mi_head.weight.cols == 6);

  for (const auto& layer : p.encoder) {
    const double limit = std::sqrt(
        6.0 / static_cast<double>(layer.weight.rows + layer.weight.cols));
    for (double w : layer.weight.data) {
      CHECK(std::abs(w) <= limit);
    }
    for (double b : layer.bias) {
      CHECK(b == 0.0);
    }
  }
  for (double b : p.mi_head.bias) CHECK(b == 0.0);
  for (double b : p.si_head.bias) CHECK(b == 0.0);

  Rng rng2(3);
  const ModelParams q = init_params(rng2, 5, {8}, 6, 4);
  CHECK(q.encoder[0].weight.data == p.encoder[0].weight.data);
  CHECK(q.si_head.weight.data == p.si_head.weight.data);
}

TEST_CASE("forward pooling on singleton bags is pool-agnostic") {
  Rng rng(5);
  const ModelParams p = init_params(rng, 3, {4}, 3, 4);
  const Bag bag = make_bag("b", "A", {{0.1, -0.2, 0.4}});
  const ForwardTrace mx = forward(p, {&bag}, PoolMode::Max);
  const ForwardTrace mn = forward(p, {&bag}, PoolMode::Mean);
  CHECK(mx.pooled.data == mn.pooled.data);
  CHECK(mx.h_mi.data == mn.h_mi.data);
  // Singleton pooling passes the embedding straight through.
  CHECK(mx.pooled.data == std::vector<double>(mx.act.back().row(0),
                                              mx.act.back().row(0) + 3));
}

TEST_CASE("max pooling records dominating routing") {
  Rng rng(7);
  const ModelParams p = init_params(rng, 4, {5}, 4, 4);
  const Bag bag = make_bag("b", "A", {{0.3, 1.0, -2.0, 0.1},
                                      {-1.0, 0.2, 0.9, 1.4},
                                      {2.0, -0.3, 0.0, -0.5}});
  const ForwardTrace t = forward(p, {&bag}, PoolMode::Max);
  const Matrix& z = t.act.back();
  for (std::size_t k = 0; k < t.pooled.cols; ++k) {
    const std::size_t r = t.routing[k];
    CHECK(t.pooled(0, k) == z(r, k));
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(t.pooled(0, k) >= z(j, k));
    }
  }
}

TEST_CASE("zero parameters give zero bag codes") {
  Rng rng(9);
  ModelParams p = init_params(rng, 3, {4}, 3, 5);
  visit_params(p, [](const std::string&, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  const Bag bag = make_bag("b", "A", {{0.5, -0.5, 1.0}, {0.0, 0.0, 0.0}});
  const ForwardTrace t = forward(p, {&bag}, PoolMode::Max);
  for (double h : t.h_mi.data) CHECK(h == 0.0);
}

TEST_CASE("head outputs stay strictly inside the open unit interval") {
  Rng rng(11);
  const BagDataset ds = tiny_dataset(rng, 6);
  Rng init(13);
  const ModelParams p = init_params(init, 6, {8}, 5, 7);
  for (const PoolMode pool : {PoolMode::Max, PoolMode::Mean}) {
    const ForwardTrace t = forward(p, ds, pool);
    for (double h : t.h_mi.data) {
      CHECK(h > -1.0);
      CHECK(h < 1.0);
    }
    for (double h : t.h_si.data) {
      CHECK(h > -1.0);
      CHECK(h < 1.0);
    }
  }
}

TEST_CASE("permuting instances inside a bag changes nothing that matters") {
  Rng rng(15);
  Rng init(17);
  const ModelParams p = init_params(init, 4, {6}, 5, 6);
  const Bag bag = make_bag("b", "A", {{0.1, 0.2, 0.3, 0.4},
                                      {-0.5, 0.1, 0.9, -0.2},
                                      {1.2, -0.7, 0.0, 0.6}});
  Bag permuted = bag;
  std::swap(permuted.instances[0], permuted.instances[2]);

  for (const PoolMode pool : {PoolMode::Max, PoolMode::Mean}) {
    const ForwardTrace a = forward(p, {&bag}, pool);
    const ForwardTrace b = forward(p, {&permuted}, pool);
    for (std::size_t k = 0; k < a.pooled.cols; ++k) {
      CHECK(a.pooled(0, k) == doctest::Approx(b.pooled(0, k)).epsilon(1e-15));
    }
    for (std::size_t k = 0; k < a.h_mi.cols; ++k) {
      CHECK(a.h_mi(0, k) == doctest::Approx(b.h_mi(0, k)).epsilon(1e-15));
    }
    // Instance codes match as a set (rows permuted alongside the instances).
    std::multiset<double> sa(a.h_si.data.begin(), a.h_si.data.end());
    std::multiset<double> sb(b.h_si.data.begin(), b.h_si.data.end());
    CHECK(sa == sb);
  }
}

TEST_CASE("forward rejects empty bags and dimension mismatches") {
  Rng rng(19);
  const ModelParams p = init_params(rng, 3, {4}, 3, 4);
  Bag empty{"e", "A", {}};
  CHECK_THROWS_AS(forward(p, {&empty}, PoolMode::Max), std::invalid_argument);
  const Bag wrong = make_bag("w", "A", {{1.0, 2.0}});
  CHECK_THROWS_AS(forward(p, {&wrong}, PoolMode::Max), std::invalid_argument);
}

TEST_CASE("quantize applies the sign rule") {
  const std::vector<double> h{0.3, -0.7};
  const HashCode code = quantize(h);
  CHECK(code.sign(0) == +1);
  CHECK(code.sign(1) == -1);

  const std::vector<double> zeros{0.0, 0.0, 0.0};
  const HashCode z = quantize(zeros);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(z.sign(k) == +1);
  }

  // Idempotent on sign vectors.
  const HashCode again = quantize(z.to_signs());
  CHECK(again == z);
}

TEST_CASE("backward routes mean-pool gradients equally") {
  Rng rng(21);
  ModelParams p = init_params(rng, 3, {}, 3, 2);
  // Identity-ish single linear layer so the routing is easy to read.
  const Bag bag = make_bag("b", "A", {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
  const ForwardTrace t = forward(p, {&bag}, PoolMode::Mean);

  Matrix d_mi(1, 2, 0.0);
  d_mi(0, 0) = 1.0;
  const Matrix d_si(2, 2, 0.0);
  const Gradients g = backward(p, t, d_mi, d_si, 0.0);

  // The pooled gradient must split in half between the two instances; verify
  // through the input gradient path indirectly by symmetry of contributions
  // to the first-layer weight gradient: both instances contribute equally
  // scaled rows.
  const Matrix& dw = g.encoder[0].weight;
  // d_pooled = W_mi^T d_pre; both instances receive d_pooled / 2, and with
  // one-hot inputs each instance's contribution lands in its own column.
  for (std::size_t o = 0; o < dw.rows; ++o) {
    CHECK(dw(o, 0) == doctest::Approx(dw(o, 1)).epsilon(1e-12));
    CHECK(dw(o, 2) == 0.0);
  }
}

TEST_CASE("backward gives non-argmax instances exactly zero from the bag path") {
  Rng rng(23);
  const ModelParams p = init_params(rng, 4, {5}, 4, 3);
  const Bag bag = make_bag("b", "A", {{2.0, 2.0, 2.0, 2.0},
                                      {-2.0, -2.0, -2.0, -2.0}});
  const ForwardTrace t = forward(p, {&bag}, PoolMode::Max);

  Matrix d_mi(1, 3);
  for (auto& v : d_mi.data) v = 1.0;
  const Matrix d_si(2, 3, 0.0);

  // Compare against a single-instance bag containing only the winners: if
  // max pooling routes correctly, removing a never-selected instance leaves
  // every head/pool gradient unchanged except for instance-level terms.
  const Gradients g = backward(p, t, d_mi, d_si, 0.0);

  // All routing went to a single instance (the one dominating every
  // dimension) or split; either way the loser dimensions receive zero:
  // verify via the recorded routing.
  const Matrix& z = t.act.back();
  for (std::size_t k = 0; k < t.pooled.cols; ++k) {
    const std::size_t winner = t.routing[k];
    CHECK(t.pooled(0, k) == z(winner, k));
  }
  // Sanity: gradients are finite and not all zero.
  bool any = false;
  visit_params(g, [&any](const std::string&, const std::vector<double>& v) {
    for (double x : v) {
      if (x != 0.0) any = true;
    }
  });
  CHECK(any);
}

TEST_CASE("zero upstream gradients and no decay give zero gradients") {
  Rng rng(25);
  const BagDataset ds = tiny_dataset(rng, 4);
  Rng init(27);
  const ModelParams p = init_params(init, 4, {5}, 4, 3);
  const ForwardTrace t = forward(p, ds, PoolMode::Max);
  const Matrix d_mi(t.bag_count(), 3, 0.0);
  const Matrix d_si(t.instance_count(), 3, 0.0);
  const Gradients g = backward(p, t, d_mi, d_si, 0.0);
  visit_params(g, [](const std::string&, const std::vector<double>& v) {
    for (double x : v) {
      CHECK(x == 0.0);
    }
  });
}

TEST_CASE("backward rejects mis-shaped head gradients") {
  Rng rng(29);
  const BagDataset ds = tiny_dataset(rng, 4);
  Rng init(31);
  const ModelParams p = init_params(init, 4, {5}, 4, 3);
  const ForwardTrace t = forward(p, ds, PoolMode::Max);
  const Matrix bad(t.bag_count() + 1, 3, 0.0);
  const Matrix d_si(t.instance_count(), 3, 0.0);
  CHECK_THROWS_AS(backward(p, t, bad, d_si, 0.0), std::invalid_argument);
}

TEST_CASE("finite_diff_check is exact on a quadratic toy loss") {
  Rng rng(33);
  const ModelParams p = init_params(rng, 3, {4}, 3, 2);
  const auto loss = [](const ModelParams& theta) {
    double s = 0.0;
    visit_params(theta, [&s](const std::string&, const std::vector<double>& v) {
      for (double x : v) s += x * x;
    });
    return s;
  };
  Gradients analytic = zeros_like(p);
  {
    std::vector<std::vector<double>*> slots;
    visit_params(analytic, [&slots](const std::string&, std::vector<double>& v) {
      slots.push_back(&v);
    });
    std::size_t i = 0;
    visit_params(p, [&](const std::string&, const std::vector<double>& v) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        (*slots[i])[j] = 2.0 * v[j];
      }
      ++i;
    });
  }
  const GradCheckReport report = finite_diff_check(p, loss, analytic, 1e-4);
  CHECK(report.max_rel_error <= 1e-9);
}

TEST_CASE("composite gradient survives central differences in all modes") {
  for (const PoolMode pool : {PoolMode::Max, PoolMode::Mean}) {
    for (const RobustKind robust : {RobustKind::Huber, RobustKind::L2}) {
      for (const std::uint64_t seed : {1, 2, 3, 4, 6}) {
        GradCheckSpec spec;
        spec.pool = pool;
        spec.robust = robust;
        spec.seed = seed;
        const GradCheckReport report = run_gradcheck(spec);
        CAPTURE(to_string(pool));
        CAPTURE(to_string(robust));
        CAPTURE(seed);
        CAPTURE(report.worst_block);
        CHECK(report.max_rel_error <= 1e-4);
      }
    }
  }
}

TEST_CASE("a corrupted gradient entry is caught and named") {
  GradCheckSpec spec;
  spec.corrupt = true;
  const GradCheckReport report = run_gradcheck(spec);
  CHECK(report.max_rel_error > 1e-4);
  CHECK(report.worst_block == "encoder0.weight");
  CHECK(report.worst_index == 0);
}

TEST_CASE("gradcheck report covers every parameter block exactly once") {
  const GradCheckReport report = run_gradcheck(GradCheckSpec{});
  std::set<std::string> names;
  for (const auto& [name, err] : report.block_errors) {
    CHECK(names.insert(name).second);
  }
  CHECK(names == std::set<std::string>{"encoder0.weight", "encoder0.bias",
                                       "encoder1.weight", "encoder1.bias",
                                       "mi_head.weight", "mi_head.bias",
                                       "si_head.weight", "si_head.bias"});
}

TEST_CASE("finite_diff_check subsampling probes only the requested coordinates") {
  Rng rng(35);
  const ModelParams p = init_params(rng, 3, {4}, 3, 2);
  std::size_t calls = 0;
  const auto loss = [&calls](const ModelParams& theta) {
    ++calls;
    double s = 0.0;
    visit_params(theta, [&s](const std::string&, const std::vector<double>& v) {
      for (double x : v) s += x * x;
    });
    return s;
  };
  Gradients analytic = zeros_like(p);
  std::vector<std::vector<double>*> slots;
  visit_params(analytic, [&slots](const std::string&, std::vector<double>& v) {
    slots.push_back(&v);
  });
  std::size_t i = 0;
  visit_params(p, [&](const std::string&, const std::vector<double>& v) {
    for (std::size_t j = 0; j < v.size(); ++j) (*slots[i])[j] = 2.0 * v[j];
    ++i;
  });
  Rng sub(7);
  finite_diff_check(p, loss, analytic, 1e-4, 2, &sub);
  // 8 blocks, at most 2 coordinates each, 2 evaluations per coordinate.
  CHECK(calls <= 8 * 2 * 2);
}
