#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "kgrg/training.hpp"

using namespace kgrg;
using namespace kgrg::train;
using ad::Tensor;

namespace {

const std::string kDataDir = KGRG_DATA_DIR;

Config tiny_config(attn::Variant v = attn::Variant::kBaseline,
                   bool cvae = false) {
  Config cfg;
  cfg.attention = v;
  cfg.cvae = cvae;
  cfg.batch_size = 2;
  cfg.seed = 11;
  return cfg;
}

model::ModelParameters tiny_params(const Config& cfg) {
  Rng rng = Rng::stream(cfg.seed, "init");
  return model::init_params(cfg, 12, rng);
}

std::vector<ProcessedExample> tiny_dataset() {
  return {
      {{5, 6}, {7}, {8, 9}},
      {{6, 7}, {8}, {9, 10}},
      {{7, 8}, {9}, {10, 11}},
  };
}

void fill_grads(model::ModelParameters& p, double value) {
  for (auto& [name, t] : p.named_tensors()) {
    t.zero_grad();
    auto& g = t.node()->grad;
    for (double& x : g) x = value;
  }
}

bool params_equal(const model::ModelParameters& a,
                  const model::ModelParameters& b) {
  auto na = a.named_tensors();
  auto nb = b.named_tensors();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i)
    if (na[i].first != nb[i].first ||
        na[i].second.values() != nb[i].second.values())
      return false;
  return true;
}

}  // namespace

TEST_CASE("first adam step moves by about lr in the gradient direction") {
  Config cfg = tiny_config();
  auto p = tiny_params(cfg);
  AdamState adam = make_adam_state(p);
  const double w0 = p.embedding.values()[0];
  fill_grads(p, 2.0);
  adam_step(p, adam, 1e-3);
  // bias-corrected m-hat = g, v-hat = g^2 -> update = lr * g/(|g|+eps)
  CHECK(p.embedding.values()[0] ==
        doctest::Approx(w0 - 1e-3).epsilon(1e-9));
  CHECK(adam.step_count == 1);

  // direction follows the gradient sign
  auto q = tiny_params(cfg);
  AdamState adam2 = make_adam_state(q);
  const double v0 = q.out_proj_b.values()[3];
  fill_grads(q, -0.5);
  adam_step(q, adam2, 1e-3);
  CHECK(q.out_proj_b.values()[3] == doctest::Approx(v0 + 1e-3).epsilon(1e-9));
}

TEST_CASE("adam rejects missing and non-finite gradients") {
  Config cfg = tiny_config();
  auto p = tiny_params(cfg);
  AdamState adam = make_adam_state(p);
  // no gradients at all
  CHECK_THROWS_WITH_AS(adam_step(p, adam, 1e-3),
                       doctest::Contains("missing gradient"),
                       std::runtime_error);
  fill_grads(p, 1.0);
  p.embedding.node()->grad[5] = std::nan("");
  CHECK_THROWS_WITH_AS(adam_step(p, adam, 1e-3),
                       doctest::Contains("non-finite gradient in parameter "
                                         "embedding"),
                       std::runtime_error);
}

TEST_CASE("frozen embeddings stay fixed under adam") {
  Config cfg = tiny_config();
  cfg.freeze_embeddings = true;
  auto p = tiny_params(cfg);
  AdamState adam = make_adam_state(p);
  auto before = p.embedding.values();
  auto bias_before = p.out_proj_b.values();
  fill_grads(p, 1.0);
  adam_step(p, adam, 1e-2);
  CHECK(p.embedding.values() == before);
  // but other tensors moved
  CHECK(p.out_proj_b.values() != bias_before);
}

TEST_CASE("training reduces the loss on a tiny corpus") {
  Config cfg = tiny_config();
  auto p = tiny_params(cfg);
  Trainer trainer(p, cfg);
  auto data = tiny_dataset();
  StepStats first = trainer.train_step({data[0], data[1]});
  StepStats last{};
  for (int s = 0; s < 60; ++s) last = trainer.run(data, 1);
  CHECK(std::isfinite(first.loss));
  CHECK(last.loss < first.loss);
  CHECK(last.kl == 0.0);  // no cvae path
  CHECK(trainer.global_step() == 61);
  CHECK_THROWS_AS(trainer.train_step({}), std::runtime_error);
  CHECK_THROWS_AS(trainer.run({}, 1), std::runtime_error);
}

TEST_CASE("cvae training reports a positive kl term") {
  Config cfg = tiny_config(attn::Variant::kBaseline, true);
  cfg.kl_ramp_steps = 10;
  auto p = tiny_params(cfg);
  Trainer trainer(p, cfg);
  auto data = tiny_dataset();
  StepStats st{};
  for (int s = 0; s < 5; ++s) st = trainer.run(data, 1);
  CHECK(st.kl > 0.0);
  CHECK(std::isfinite(st.loss));
}

TEST_CASE("training is bit-for-bit deterministic") {
  Config cfg = tiny_config(attn::Variant::kBaseline, true);
  auto data = tiny_dataset();
  auto pa = tiny_params(cfg);
  auto pb = tiny_params(cfg);
  REQUIRE(params_equal(pa, pb));
  Trainer ta(pa, cfg), tb(pb, cfg);
  ta.run(data, 8);
  tb.run(data, 8);
  CHECK(params_equal(pa, pb));
}

TEST_CASE("checkpoint round trip is lossless") {
  Config cfg = tiny_config();
  auto p = tiny_params(cfg);
  Trainer trainer(p, cfg);
  trainer.run(tiny_dataset(), 3);
  const std::string path = "training_test_ckpt.txt";
  save_checkpoint(path, p, trainer.adam(), trainer.global_step(),
                  trainer.rng().state());
  Checkpoint ck = load_checkpoint(path, cfg);
  CHECK(ck.step == 3);
  CHECK(ck.seed == cfg.seed);
  CHECK(params_equal(ck.params, p));
  CHECK(ck.adam.step_count == trainer.adam().step_count);
  CHECK(ck.adam.m == trainer.adam().m);
  CHECK(ck.adam.v == trainer.adam().v);
  CHECK(ck.rng_state == trainer.rng().state());
  std::remove(path.c_str());
}

TEST_CASE("checkpoint errors name the problem") {
  Config cfg = tiny_config();
  auto p = tiny_params(cfg);
  AdamState adam = make_adam_state(p);
  const std::string path = "training_test_ckpt_bad.txt";
  save_checkpoint(path, p, adam, 0, Rng(0).state());

  // config fingerprint mismatch
  Config other = cfg;
  other.attention = attn::Variant::kContextOnly;
  CHECK_THROWS_WITH_AS(load_checkpoint(path, other),
                       doctest::Contains("fingerprint"), std::runtime_error);

  // truncation
  {
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    std::ofstream out(path);
    out << all.substr(0, all.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(path, cfg), std::runtime_error);

  {
    std::ofstream out(path);
    out << "not a checkpoint\n";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path, cfg),
                       doctest::Contains("not a kgrg checkpoint"),
                       std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("no_such_ckpt.txt", cfg), std::runtime_error);
}

TEST_CASE("resumed training matches an uninterrupted run") {
  Config cfg = tiny_config(attn::Variant::kBaseline, true);
  cfg.kl_ramp_steps = 20;
  auto data = tiny_dataset();

  auto full = tiny_params(cfg);
  Trainer tf(full, cfg);
  tf.run(data, 10);

  auto half = tiny_params(cfg);
  Trainer th(half, cfg);
  th.run(data, 5);
  const std::string path = "training_test_resume.txt";
  save_checkpoint(path, half, th.adam(), th.global_step(), th.rng().state());

  Checkpoint ck = load_checkpoint(path, cfg);
  Trainer tr(ck.params, cfg);
  tr.restore(ck.adam, ck.step, ck.rng_state);
  CHECK(tr.global_step() == 5);
  tr.run(data, 5);

  CHECK(params_equal(ck.params, full));
  CHECK(tr.adam().m == tf.adam().m);
  CHECK(tr.adam().v == tf.adam().v);
  std::remove(path.c_str());
}
