#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "pfe/discriminative.hpp"
#include "pfe/rng.hpp"
#include "pfe/synthdata.hpp"
#include "testutil.hpp"

using namespace pfe;

namespace {

const ImpressionSchema& fixture_schema() {
  static ImpressionSchema schema =
      ImpressionSchema::load(std::string(PFE_DATA_DIR) + "/impression_schema.json");
  return schema;
}

EncoderConfig tiny_encoder_config() {
  EncoderConfig cfg;
  cfg.seed = 555;
  cfg.phrase_dim = 32;
  cfg.cond_dim = 8;
  cfg.frozen_rank = 0;
  return cfg;
}

}  // namespace

TEST_CASE("disc_loss hand values") {
  Vec e{1.0, 0.0, 0.0};

  CHECK(disc_loss(e, e) == 0.0);

  Vec neg{-1.0, 0.0, 0.0};
  CHECK(disc_loss(neg, e) == doctest::Approx(6.0));

  Vec twice{2.0, 0.0, 0.0};
  CHECK(disc_loss(twice, e) == doctest::Approx(1.0));
}

TEST_CASE("disc_loss positive-scaling property") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Vec e = rng.gaussian_vec(6);
    const double len = norm(e);
    for (auto& x : e) x /= len;
    const double alpha = 0.05 + 3.0 * rng.uniform();
    Vec scaled_e = scaled(e, alpha);
    CHECK(disc_loss(scaled_e, e) == doctest::Approx((alpha - 1.0) * (alpha - 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("disc_loss zero-norm prediction counts a warning") {
  DiscWarnings warnings;
  Vec zero{0.0, 0.0};
  Vec target{3.0, 4.0};
  const double value = disc_loss(zero, target, &warnings);
  CHECK(value == doctest::Approx(25.0 + 1.0));
  CHECK(warnings.zero_norm_predictions == 1);

  Vec grad(2, 0.0);
  const double again = disc_loss_grad(zero, target, grad, &warnings);
  CHECK(again == doctest::Approx(26.0));
  CHECK(warnings.zero_norm_predictions == 2);
  CHECK(grad[0] == doctest::Approx(-6.0));
  CHECK(grad[1] == doctest::Approx(-8.0));
}

TEST_CASE("disc_loss error cases") {
  const Vec empty;
  const Vec one{1.0};
  const Vec two{1.0, 2.0};
  const Vec zeros{0.0, 0.0};
  CHECK_THROWS_AS(disc_loss(empty, empty), std::invalid_argument);
  CHECK_THROWS_AS(disc_loss(one, two), std::invalid_argument);
  CHECK_THROWS_AS(disc_loss(two, zeros), std::invalid_argument);
}

TEST_CASE("disc_loss gradient matches finite differences through the cosine term") {
  Rng rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    Vec target = rng.gaussian_vec(7);
    Vec predicted = rng.gaussian_vec(7);
    Vec grad(7, 0.0);
    disc_loss_grad(predicted, target, grad);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const double numeric = test::central_diff(
          [&](const Vec& p) { return disc_loss(p, target); }, predicted, i);
      CHECK(test::rel_error(grad[i], numeric) < 1e-4);
    }
  }
}

TEST_CASE("projection net shape and deterministic prediction") {
  ProjectionNet net = make_projection_net(8, 5, 16, 99);
  CHECK(net.params.layers.size() == 4);
  CHECK(net.params.input_dim() == 8);
  CHECK(net.params.output_dim() == 5);

  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 1);
  SynthWorld world(SynthWorldConfig{}, schema);
  Prompt p = build_full_prompt(schema, world.sample_record("spk", 1));
  SpeakerEmbedding a = predict(enc, adapter, net, p);
  SpeakerEmbedding b = predict(enc, adapter, net, p);
  CHECK(a.values == b.values);
  CHECK(a.provenance == Provenance::discriminative);
}

TEST_CASE("zeroed final layer predicts its bias for every prompt") {
  ProjectionNet net = make_projection_net(8, 5, 16, 99);
  auto& last = net.params.layers.back();
  std::fill(last.weight.data.begin(), last.weight.data.end(), 0.0);
  last.bias = {1.0, -2.0, 3.0, -4.0, 5.0};

  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 1);
  SynthWorld world(SynthWorldConfig{}, schema);
  for (std::uint64_t s = 0; s < 3; ++s) {
    Prompt p = build_full_prompt(schema, world.sample_record("spk_" + std::to_string(s), s));
    CHECK(predict(enc, adapter, net, p).values == last.bias);
  }
}

TEST_CASE("training memorizes a single pair") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 2);
  ProjectionNet net = make_projection_net(8, 4, 32, 7);
  SynthWorld world(SynthWorldConfig{}, schema);
  Prompt p = build_full_prompt(schema, world.sample_record("solo", 2));
  Vec target{0.5, -1.0, 2.0, 0.25};

  DiscTrainConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 600;
  cfg.learning_rate = 3e-3;
  auto result = train_discriminative(enc, adapter, net, {p}, {target}, cfg);
  REQUIRE(result.epoch_losses.size() == 600);
  for (double l : result.epoch_losses) CHECK(std::isfinite(l));
  CHECK(result.epoch_losses.back() < 1e-3);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());
}

TEST_CASE("training with identical targets converges to that target") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 3);
  ProjectionNet net = make_projection_net(8, 4, 32, 8);
  SynthWorld world(SynthWorldConfig{}, schema);

  std::vector<Prompt> prompts;
  std::vector<Vec> targets;
  Vec target{1.0, 1.0, -1.0, 0.5};
  for (std::uint64_t s = 0; s < 12; ++s) {
    prompts.push_back(
        build_full_prompt(schema, world.sample_record("const_" + std::to_string(s), 10 + s)));
    targets.push_back(target);
  }
  DiscTrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 400;
  cfg.learning_rate = 3e-3;
  auto result = train_discriminative(enc, adapter, net, prompts, targets, cfg);
  CHECK(result.epoch_losses.back() < 1e-2);
  for (const auto& p : prompts) {
    SpeakerEmbedding pred = predict(enc, adapter, net, p);
    CHECK(std::sqrt(squared_distance(pred.values, target)) < 0.2);
  }
}

TEST_CASE("use_lora=false leaves the adapter bitwise untouched") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 4);
  const std::vector<double> a_before = adapter.a.data;
  const std::vector<double> b_before = adapter.b.data;

  ProjectionNet net = make_projection_net(8, 4, 16, 9);
  SynthWorld world(SynthWorldConfig{}, schema);
  std::vector<Prompt> prompts;
  std::vector<Vec> targets;
  Rng rng(20);
  for (std::uint64_t s = 0; s < 8; ++s) {
    prompts.push_back(
        build_full_prompt(schema, world.sample_record("nl_" + std::to_string(s), 30 + s)));
    targets.push_back(rng.gaussian_vec(4));
  }
  DiscTrainConfig cfg;
  cfg.use_lora = false;
  cfg.epochs = 30;
  auto result = train_discriminative(enc, adapter, net, prompts, targets, cfg);
  (void)result;
  CHECK(adapter.a.data == a_before);
  CHECK(adapter.b.data == b_before);
}

TEST_CASE("freeze_adapter trains the net but not the adapter") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 5);
  Rng rng(21);
  for (auto& x : adapter.b.data) x = 0.1 * rng.gaussian();
  const std::vector<double> a_before = adapter.a.data;
  const std::vector<double> b_before = adapter.b.data;

  ProjectionNet net = make_projection_net(8, 4, 16, 10);
  const std::vector<double> w_before = net.params.layers[0].weight.data;
  SynthWorld world(SynthWorldConfig{}, schema);
  std::vector<Prompt> prompts;
  std::vector<Vec> targets;
  for (std::uint64_t s = 0; s < 8; ++s) {
    prompts.push_back(
        build_full_prompt(schema, world.sample_record("fr_" + std::to_string(s), 40 + s)));
    targets.push_back(rng.gaussian_vec(4));
  }
  DiscTrainConfig cfg;
  cfg.freeze_adapter = true;
  cfg.epochs = 20;
  train_discriminative(enc, adapter, net, prompts, targets, cfg);
  CHECK(adapter.a.data == a_before);
  CHECK(adapter.b.data == b_before);
  CHECK(net.params.layers[0].weight.data != w_before);
}

TEST_CASE("joint adapter training beats a frozen encoder on rank-starved data") {
  const auto& schema = fixture_schema();
  EncoderConfig cfg = tiny_encoder_config();
  cfg.cond_dim = 16;
  cfg.frozen_rank = 2;  // starve the frozen path
  FrozenEncoder enc(cfg, &schema);

  SynthWorldConfig wcfg;
  wcfg.seed = 71;
  wcfg.embedding_dim = 8;
  wcfg.noise_scale = 0.01;
  wcfg.modes_per_condition = 1;
  SynthWorld world(wcfg, schema);
  std::vector<Prompt> prompts;
  std::vector<Vec> targets;
  for (std::uint64_t s = 0; s < 60; ++s) {
    ImpressionRecord r = world.sample_record("rs_" + std::to_string(s), 50 + s);
    prompts.push_back(build_full_prompt(schema, r));
    targets.push_back(world.sample_embedding(r, 50 + s).values);
  }

  DiscTrainConfig tcfg;
  tcfg.batch_size = 16;
  tcfg.epochs = 250;
  tcfg.learning_rate = 2e-3;
  tcfg.seed = 5;

  tcfg.use_lora = false;
  LoraAdapter frozen_adapter = make_lora_adapter(32, 16, 8, 8.0, 6);
  ProjectionNet frozen_net = make_projection_net(16, 8, 64, 11);
  auto frozen_run =
      train_discriminative(enc, frozen_adapter, frozen_net, prompts, targets, tcfg);

  tcfg.use_lora = true;
  LoraAdapter lora_adapter = make_lora_adapter(32, 16, 8, 8.0, 6);
  ProjectionNet lora_net = make_projection_net(16, 8, 64, 11);
  auto lora_run = train_discriminative(enc, lora_adapter, lora_net, prompts, targets, tcfg);

  CHECK(lora_run.epoch_losses.back() < 0.8 * frozen_run.epoch_losses.back());
}

TEST_CASE("a non-finite loss aborts with epoch and batch in the message") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 7);
  ProjectionNet net = make_projection_net(8, 4, 16, 12);
  SynthWorld world(SynthWorldConfig{}, schema);
  Prompt p = build_full_prompt(schema, world.sample_record("div", 60));

  DiscTrainConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 5;
  const Vec poisoned{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(train_discriminative(enc, adapter, net, {p}, {poisoned}, cfg),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("trained on a balanced bimodal target, the prediction is mean-seeking") {
  const auto& schema = fixture_schema();
  FrozenEncoder enc(tiny_encoder_config(), &schema);
  LoraAdapter adapter = make_lora_adapter(32, 8, 4, 4.0, 8);
  ProjectionNet net = make_projection_net(8, 6, 32, 13);

  SynthWorldConfig wcfg;
  wcfg.seed = 72;
  wcfg.embedding_dim = 6;
  wcfg.noise_scale = 0.05;
  wcfg.modes_per_condition = 2;
  wcfg.mode_separation = 3.0;
  SynthWorld world(wcfg, schema);
  ImpressionRecord record = world.sample_record("bi", 70);
  Prompt p = build_full_prompt(schema, record);

  std::vector<Prompt> prompts;
  std::vector<Vec> targets;
  for (std::uint64_t s = 0; s < 40; ++s) {
    prompts.push_back(p);
    targets.push_back(world.sample_embedding(record, 200 + s).values);
  }
  DiscTrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 300;
  cfg.learning_rate = 2e-3;
  train_discriminative(enc, adapter, net, prompts, targets, cfg);

  const Vec base = world.base_embedding(record);
  const Vec m0 = world.mode_mean(record, 0);
  const Vec m1 = world.mode_mean(record, 1);
  const SpeakerEmbedding pred = predict(enc, adapter, net, p);
  const double to_base = std::sqrt(squared_distance(pred.values, base));
  const double half_gap = 0.5 * std::sqrt(squared_distance(m0, m1));
  CHECK(to_base < 0.4 * half_gap);
  CHECK(std::sqrt(squared_distance(pred.values, m0)) > 0.5 * half_gap);
  CHECK(std::sqrt(squared_distance(pred.values, m1)) > 0.5 * half_gap);
}
