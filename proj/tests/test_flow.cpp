#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "pfe/flow.hpp"
#include "pfe/rng.hpp"
#include "testutil.hpp"

using namespace pfe;

namespace {

// Weights rigged so the network output equals the condition block of the
// input; with sigma_min = 1 the OT target field is exactly x1, so feeding x1
// as the condition makes this a perfect regressor.
VectorFieldNet condition_echo_net(std::size_t d, std::size_t frequencies) {
  VectorFieldNet net;
  net.data_dim = d;
  net.cond_dim = d;
  net.time_frequencies = frequencies;
  const std::size_t input = 2 * d + 2 * frequencies;
  net.params = make_mlp({input, d}, Activation::relu, 0);
  auto& layer = net.params.layers[0];
  std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  for (std::size_t i = 0; i < d; ++i) layer.weight(i, d + i) = 1.0;
  return net;
}

VectorFieldNet constant_field_net(const Vec& c, std::size_t frequencies) {
  VectorFieldNet net;
  net.data_dim = c.size();
  net.cond_dim = 0;
  net.time_frequencies = frequencies;
  const std::size_t input = c.size() + 2 * frequencies;
  net.params = make_mlp({input, c.size()}, Activation::relu, 0);
  auto& layer = net.params.layers[0];
  std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
  layer.bias = c;
  return net;
}

}  // namespace

TEST_CASE("sample_ot_path closed forms") {
  Vec x1{2.0, -1.0, 0.5};
  Vec x0{0.25, 1.0, -0.75};
  const double s = 1e-4;

  SUBCASE("t = 0 returns the noise with the full displacement field") {
    PathSample p = sample_ot_path(x1, 0.0, x0, s);
    CHECK(p.x == x0);
    for (std::size_t i = 0; i < x1.size(); ++i) {
      CHECK(p.target_field[i] == doctest::Approx(x1[i] - (1.0 - s) * x0[i]).epsilon(1e-12));
    }
  }

  SUBCASE("points on the path mean regress exactly to x1") {
    Vec zero(x1.size(), 0.0);
    for (double t : {0.0, 0.1, 0.5, 0.9, 0.999}) {
      PathSample p = sample_ot_path(x1, t, zero, s);
      for (std::size_t i = 0; i < x1.size(); ++i) {
        CHECK(p.x[i] == doctest::Approx(t * x1[i]).epsilon(1e-12));
        CHECK(p.target_field[i] == doctest::Approx(x1[i]).epsilon(1e-9));
      }
    }
  }

  SUBCASE("sigma_min = 1 keeps full noise and a constant field") {
    for (double t : {0.0, 0.3, 0.8}) {
      PathSample p = sample_ot_path(x1, t, x0, 1.0);
      for (std::size_t i = 0; i < x1.size(); ++i) {
        CHECK(p.x[i] == doctest::Approx(t * x1[i] + x0[i]).epsilon(1e-12));
        CHECK(p.target_field[i] == doctest::Approx(x1[i]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("the field along the path equals x1 - (1-sigma_min) x0 for any draw") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
      Vec a = rng.gaussian_vec(5);
      Vec b = rng.gaussian_vec(5);
      const double t = rng.uniform();
      PathSample p = sample_ot_path(a, t, b, s);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(p.target_field[i] == doctest::Approx(a[i] - (1.0 - s) * b[i]).epsilon(1e-9));
      }
    }
  }

  SUBCASE("t outside [0, 1) is rejected") {
    CHECK_THROWS_AS(sample_ot_path(x1, 1.0, x0, s), std::invalid_argument);
    CHECK_THROWS_AS(sample_ot_path(x1, -0.01, x0, s), std::invalid_argument);
    CHECK_THROWS_AS(sample_ot_path(x1, 0.5, x0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("path endpoint distributions match the schedule") {
  Vec x1{3.0, -2.0};
  Rng rng(42);
  const std::size_t n = 10000;

  auto stats_at = [&](double t) {
    Vec mean(2, 0.0), second(2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      PathSample p = sample_ot_path(x1, t, rng.gaussian_vec(2), 1e-4);
      for (std::size_t j = 0; j < 2; ++j) {
        mean[j] += p.x[j];
        second[j] += p.x[j] * p.x[j];
      }
    }
    for (std::size_t j = 0; j < 2; ++j) {
      mean[j] /= static_cast<double>(n);
      second[j] = second[j] / static_cast<double>(n) - mean[j] * mean[j];
    }
    return std::make_pair(mean, second);
  };

  auto [mean0, var0] = stats_at(1e-9);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(mean0[j]) < 0.05);
    CHECK(var0[j] == doctest::Approx(1.0).epsilon(0.05));
  }

  auto [mean1, var1] = stats_at(1.0 - 1e-9);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(mean1[j] == doctest::Approx(x1[j]).epsilon(1e-3));
    CHECK(std::sqrt(std::max(var1[j], 0.0)) < 1e-3);
  }
}

TEST_CASE("time features expose distinct frequencies") {
  Vec at_zero = time_features(0.0, 3);
  REQUIRE(at_zero.size() == 6);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(at_zero[2 * k] == doctest::Approx(0.0));
    CHECK(at_zero[2 * k + 1] == doctest::Approx(1.0));
  }
  Vec quarter = time_features(0.25, 2);
  CHECK(quarter[0] == doctest::Approx(1.0));          // sin(pi/2)
  CHECK(quarter[1] == doctest::Approx(0.0).epsilon(1e-9));  // cos(pi/2)
  CHECK(quarter[2] == doctest::Approx(0.0).epsilon(1e-9));  // sin(pi)
  CHECK(quarter[3] == doctest::Approx(-1.0));         // cos(pi)
}

TEST_CASE("a perfect regressor has zero CFM loss") {
  VectorFieldNet net = condition_echo_net(3, 2);
  Rng rng(43);
  std::vector<Vec> targets, conditions;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 8; ++i) {
    targets.push_back(rng.gaussian_vec(3));
    conditions.push_back(targets.back());
    seeds.push_back(1000 + static_cast<std::uint64_t>(i));
  }
  CHECK(cfm_loss(net, targets, conditions, seeds, 1.0) == 0.0);
}

TEST_CASE("cfm_loss is invariant to batch order") {
  VectorFieldNet net = make_vector_field_net(3, 2, 16, 2, 7);
  Rng rng(44);
  std::vector<Vec> targets, conditions;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 10; ++i) {
    targets.push_back(rng.gaussian_vec(3));
    conditions.push_back(rng.gaussian_vec(2));
    seeds.push_back(2000 + static_cast<std::uint64_t>(i));
  }
  const double forward = cfm_loss(net, targets, conditions, seeds, 1e-4);

  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(45);
  shuffle_rng.shuffle(order);
  std::vector<Vec> t2, c2;
  std::vector<std::uint64_t> s2;
  for (std::size_t i : order) {
    t2.push_back(targets[i]);
    c2.push_back(conditions[i]);
    s2.push_back(seeds[i]);
  }
  CHECK(cfm_loss(net, t2, c2, s2, 1e-4) == doctest::Approx(forward).epsilon(1e-12));
}

TEST_CASE("cfm_loss gradients match finite differences") {
  VectorFieldNet net = make_vector_field_net(2, 2, 8, 2, 8);
  Rng rng(46);
  std::vector<Vec> targets, conditions;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 3; ++i) {
    targets.push_back(rng.gaussian_vec(2));
    conditions.push_back(rng.gaussian_vec(2));
    seeds.push_back(3000 + static_cast<std::uint64_t>(i));
  }

  MlpParams grad = make_zero_grad(net.params);
  std::vector<Vec> cond_grads;
  cfm_loss(net, targets, conditions, seeds, 1e-4, &grad, &cond_grads);

  auto loss_now = [&]() { return cfm_loss(net, targets, conditions, seeds, 1e-4); };

  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t layer = rng.index(net.params.layers.size());
    auto& l = net.params.layers[layer];
    if (rng.uniform() < 0.7 && !l.weight.data.empty()) {
      const std::size_t idx = rng.index(l.weight.data.size());
      const double numeric = test::central_diff_at(&l.weight.data[idx], loss_now);
      CHECK(test::rel_error(grad.layers[layer].weight.data[idx], numeric) < 1e-4);
    } else {
      const std::size_t idx = rng.index(l.bias.size());
      const double numeric = test::central_diff_at(&l.bias[idx], loss_now);
      CHECK(test::rel_error(grad.layers[layer].bias[idx], numeric) < 1e-4);
    }
  }

  REQUIRE(cond_grads.size() == conditions.size());
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    for (std::size_t j = 0; j < conditions[i].size(); ++j) {
      const double numeric = test::central_diff_at(&conditions[i][j], loss_now);
      CHECK(test::rel_error(cond_grads[i][j], numeric) < 1e-4);
    }
  }
}

TEST_CASE("cfm_loss validates inputs and flags non-finite losses") {
  VectorFieldNet net = make_vector_field_net(2, 0, 8, 2, 9);
  const std::vector<Vec> empty;
  const std::vector<std::uint64_t> no_seeds;
  CHECK_THROWS_AS(cfm_loss(net, empty, empty, no_seeds, 1e-4), std::invalid_argument);

  std::vector<Vec> targets{{1.0, std::numeric_limits<double>::infinity()}};
  std::vector<Vec> conditions{{}};
  std::vector<std::uint64_t> seeds{1};
  CHECK_THROWS_WITH_AS(cfm_loss(net, targets, conditions, seeds, 1e-4),
                       doctest::Contains("sample 0"), std::runtime_error);
}

TEST_CASE("integrate on rigged nets matches closed forms") {
  FlowConfig config;
  config.ode_steps = 32;

  SUBCASE("a constant field translates the start point exactly") {
    Vec c{0.5, -0.25, 1.0};
    VectorFieldNet net = constant_field_net(c, 2);
    Vec x0{1.0, 2.0, -3.0};
    SpeakerEmbedding out = integrate(net, {}, x0, config);
    CHECK(out.provenance == Provenance::flow_generated);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(out.values[i] == doctest::Approx(x0[i] + c[i]).epsilon(1e-12));
    }

    config.ode_steps = 7;  // step count must not matter for a constant field
    SpeakerEmbedding odd = integrate(net, {}, x0, config);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(odd.values[i] == doctest::Approx(x0[i] + c[i]).epsilon(1e-12));
    }
  }

  SUBCASE("a zero field is the identity") {
    VectorFieldNet net = constant_field_net(Vec(3, 0.0), 2);
    Vec x0{0.1, -0.2, 0.3};
    CHECK(integrate(net, {}, x0, config).values == x0);
  }
}

TEST_CASE("Euler on the exact OT field lands on x1") {
  const double s = 1e-4;
  Rng rng(47);
  FlowConfig config;
  config.sigma_min = s;
  config.ode_steps = 32;

  for (int trial = 0; trial < 10; ++trial) {
    Vec x1 = rng.gaussian_vec(4);
    Vec x0 = rng.gaussian_vec(4);
    auto true_field = [&](const Vec& x, double t) {
      const double shrink = 1.0 - (1.0 - s) * t;
      Vec v(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        v[i] = (x1[i] - (1.0 - s) * x[i]) / shrink;
      }
      return v;
    };
    Vec end = integrate_field(true_field, x0, config);
    const double miss = std::sqrt(squared_distance(end, x1));
    const double gap = std::sqrt(squared_distance(x1, x0));
    CHECK(miss < 0.05 * gap);

    FlowConfig doubled = config;
    doubled.ode_steps = 64;
    Vec end2 = integrate_field(true_field, x0, doubled);
    CHECK(std::sqrt(squared_distance(end, end2)) <
          1e-3 * std::max(1.0, std::sqrt(dot(end, end))));
  }
}

TEST_CASE("integrate reports the step of a blow-up") {
  VectorFieldNet net = constant_field_net({std::numeric_limits<double>::quiet_NaN()}, 1);
  FlowConfig config;
  config.ode_steps = 4;
  const Vec start{0.0};
  const Vec no_condition;
  CHECK_THROWS_WITH_AS(integrate(net, no_condition, start, config),
                       doctest::Contains("step 0"), std::runtime_error);
}

TEST_CASE("trained flow matches a near-degenerate 1-D target") {
  Rng rng(48);
  std::vector<Vec> targets, conditions;
  for (int i = 0; i < 256; ++i) {
    targets.push_back({5.0 + 0.1 * rng.gaussian()});
    conditions.push_back({});
  }
  VectorFieldNet net = make_vector_field_net(1, 0, 64, 4, 10);
  FlowConfig flow_cfg;
  flow_cfg.time_frequencies = 4;
  FlowTrainConfig train_cfg;
  train_cfg.epochs = 160;
  train_cfg.learning_rate = 2e-3;
  train_cfg.seed = 11;
  FlowTrainResult result = train_flow(net, conditions, targets, flow_cfg, train_cfg);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());

  Rng sample_rng(49);
  double mean = 0.0, second = 0.0;
  const int n = 1000;
  Vec max_change{0.0};
  for (int i = 0; i < n; ++i) {
    Vec x0{sample_rng.gaussian()};
    SpeakerEmbedding e = integrate(net, {}, x0, flow_cfg);
    mean += e.values[0];
    second += e.values[0] * e.values[0];

    if (i < 50) {
      FlowConfig doubled = flow_cfg;
      doubled.ode_steps = flow_cfg.ode_steps * 2;
      SpeakerEmbedding e2 = integrate(net, {}, x0, doubled);
      const double rel = std::abs(e2.values[0] - e.values[0]) /
                         std::max(1.0, std::abs(e.values[0]));
      max_change[0] = std::max(max_change[0], rel);
    }
  }
  mean /= n;
  const double stddev = std::sqrt(std::max(0.0, second / n - mean * mean));
  CHECK(std::abs(mean - 5.0) < 0.2);
  CHECK(stddev < 0.3);
  // A learned field bends along the trajectory, so Euler drift on doubling is
  // O(1/steps); only the exact OT field is expected to be near-invariant.
  CHECK(max_change[0] < 2e-2);
}

TEST_CASE("trained flow splits mass between two 1-D modes") {
  Rng rng(50);
  std::vector<Vec> targets, conditions;
  for (int i = 0; i < 512; ++i) {
    const double sign = (i % 2 == 0) ? -3.0 : 3.0;
    targets.push_back({sign + 0.05 * rng.gaussian()});
    conditions.push_back({});
  }
  VectorFieldNet net = make_vector_field_net(1, 0, 64, 4, 12);
  FlowConfig flow_cfg;
  flow_cfg.time_frequencies = 4;
  FlowTrainConfig train_cfg;
  train_cfg.epochs = 160;
  train_cfg.learning_rate = 2e-3;
  train_cfg.seed = 13;
  train_flow(net, conditions, targets, flow_cfg, train_cfg);

  Rng sample_rng(51);
  int middle = 0, low = 0, high = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Vec x0{sample_rng.gaussian()};
    const double v = integrate(net, {}, x0, flow_cfg).values[0];
    if (v > -1.0 && v < 1.0) ++middle;
    else if (v <= -1.0) ++low;
    else ++high;
  }
  CHECK(middle < n / 10);
  CHECK(low > n / 4);
  CHECK(high > n / 4);
}
