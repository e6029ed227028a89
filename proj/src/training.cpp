#include "kgrg/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace kgrg::train {

using ad::Tensor;

AdamState make_adam_state(const model::ModelParameters& params) {
  AdamState s;
  for (const auto& [name, t] : params.named_tensors()) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void adam_step(model::ModelParameters& params, AdamState& state, double lr) {
  auto named = params.named_tensors();
  if (named.size() != state.m.size())
    throw std::runtime_error("adam state does not match parameter set");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    if (params.config.freeze_embeddings && name == "embedding") continue;
    const auto& g = t.grad();
    if (g.size() != t.values().size())
      throw std::runtime_error("missing gradient for parameter " + name);
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = t.values();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw std::runtime_error("non-finite gradient in parameter " + name);
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      w[j] -= lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

Trainer::Trainer(model::ModelParameters& params, const Config& cfg)
    : params_(params),
      cfg_(cfg),
      adam_(make_adam_state(params)),
      rng_(Rng::stream(cfg.seed, "train")) {}

void Trainer::restore(AdamState adam, long step, const std::string& rng_state) {
  adam_ = std::move(adam);
  global_step_ = step;
  rng_.set_state(rng_state);
  cursor_ = static_cast<std::size_t>(step) * cfg_.batch_size;
}

StepStats Trainer::train_step(const std::vector<ProcessedExample>& batch) {
  if (batch.empty()) throw std::runtime_error("train_step: empty batch");
  for (auto& [name, t] : params_.named_tensors()) t.zero_grad();

  ad::Tape tape;
  Tensor total_nll = Tensor::zeros({1});
  Tensor total_kl = Tensor::zeros({1});
  int total_tokens = 0;

  const double w =
      cvae::anneal_weight(global_step_, cvae::AnnealSchedule{cfg_.kl_ramp_steps});

  for (const ProcessedExample& ex : batch) {
    model::EncodedExample enc =
        model::encode_example(tape, ex.context, ex.fact, params_);
    std::optional<Tensor> z;
    if (cfg_.cvae) {
      std::vector<int> full = {Vocabulary::kBos};
      full.insert(full.end(), ex.response.begin(), ex.response.end());
      full.push_back(Vocabulary::kEos);
      Tensor rvec = model::encode_response(tape, full, params_);
      cvae::LatentParams lp = cvae::recognize(
          tape, rvec, enc.context_summary, *enc.fact_summary, params_.recog);
      std::vector<double> eps(cfg_.latent_dim);
      for (double& e : eps) e = rng_.normal();
      z = cvae::reparameterize(tape, lp, eps);
      total_kl = ad::add(tape, total_kl, cvae::kl_to_standard_normal(tape, lp));
    }
    auto [nll, count] =
        model::decode_teacher_forced(tape, enc, ex.response, z, params_);
    total_nll = ad::add(tape, total_nll, nll);
    total_tokens += count;
  }

  Tensor recon = ad::scale(tape, total_nll, 1.0 / total_tokens);
  Tensor kl_mean = ad::scale(tape, total_kl, 1.0 / static_cast<int>(batch.size()));
  Tensor loss =
      cfg_.cvae ? cvae::elbo_loss(tape, recon, kl_mean, w) : recon;
  tape.backward(loss);

  // Global gradient-norm clipping.
  if (cfg_.grad_clip_norm > 0) {
    double norm2 = 0.0;
    for (auto& [name, t] : params_.named_tensors())
      for (double g : t.grad()) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (norm > cfg_.grad_clip_norm) {
      const double f = cfg_.grad_clip_norm / norm;
      for (auto& [name, t] : params_.named_tensors()) {
        auto& g = t.node()->grad;
        for (double& x : g) x *= f;
      }
    }
  }

  adam_step(params_, adam_, cfg_.learning_rate);
  ++global_step_;

  StepStats stats;
  stats.loss = loss.item();
  stats.nll_per_token = recon.item();
  stats.kl = kl_mean.item();
  return stats;
}

StepStats Trainer::run(const std::vector<ProcessedExample>& dataset, int steps,
                       const std::string& checkpoint_path, std::ostream* log) {
  if (dataset.empty()) throw std::runtime_error("training dataset is empty");
  StepStats last;
  for (int s = 0; s < steps; ++s) {
    std::vector<ProcessedExample> batch;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      batch.push_back(dataset[cursor_ % dataset.size()]);
      ++cursor_;
    }
    last = train_step(batch);
    if (log && (global_step_ % 50 == 0 || s + 1 == steps))
      *log << "step " << global_step_ << " loss " << last.loss << " nll/token "
           << last.nll_per_token << " kl " << last.kl << "\n";
    if (!checkpoint_path.empty() && cfg_.checkpoint_every > 0 &&
        (global_step_ % cfg_.checkpoint_every == 0 || s + 1 == steps))
      save_checkpoint(checkpoint_path, params_, adam_, global_step_,
                      rng_.state());
  }
  return last;
}

// --- checkpoints ------------------------------------------------------------

namespace {

void write_tensor_block(std::ostream& os, const std::string& name,
                        const std::vector<int>& shape,
                        const std::vector<double>& values) {
  os << name;
  for (int d : shape) os << " " << d;
  os << "\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    os << (i ? " " : "") << values[i];
  os << "\n";
}

std::vector<double> read_values_line(std::istream& is, const std::string& name,
                                     std::size_t expected) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("checkpoint truncated at tensor " + name);
  std::istringstream vs(line);
  std::vector<double> vals;
  double x;
  while (vs >> x) vals.push_back(x);
  if (vals.size() != expected)
    throw std::runtime_error("checkpoint tensor " + name +
                             " has wrong value count");
  return vals;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const model::ModelParameters& params,
                     const AdamState& adam, long step,
                     const std::string& rng_state) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f << std::setprecision(17);
  f << "kgrg-ckpt v1 step=" << step << " seed=" << params.config.seed << "\n";
  f << "fingerprint " << params.config.fingerprint() << "\n";
  f << "vocab_size " << params.vocab_size << "\n";
  f << "rng " << rng_state << "\n";
  f << "adam_steps " << adam.step_count << "\n";
  auto named = params.named_tensors();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    write_tensor_block(f, name, t.shape(), t.values());
    write_tensor_block(f, "adam.m:" + name, t.shape(), adam.m[i]);
    write_tensor_block(f, "adam.v:" + name, t.shape(), adam.v[i]);
  }
  if (!f) throw std::runtime_error("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, const Config& cfg) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("kgrg-ckpt v1 ", 0) != 0)
    throw std::runtime_error("not a kgrg checkpoint: " + path);
  Checkpoint ck;
  {
    std::istringstream hs(line.substr(13));
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("step=", 0) == 0) ck.step = std::stol(tok.substr(5));
      if (tok.rfind("seed=", 0) == 0) ck.seed = std::stoull(tok.substr(5));
    }
  }
  if (!std::getline(f, line) || line.rfind("fingerprint ", 0) != 0)
    throw std::runtime_error("checkpoint missing fingerprint line");
  ck.fingerprint = line.substr(12);
  if (ck.fingerprint != cfg.fingerprint())
    throw std::runtime_error(
        "checkpoint fingerprint does not match the current config: " +
        ck.fingerprint);
  int vocab_size = 0;
  if (!std::getline(f, line) || line.rfind("vocab_size ", 0) != 0 ||
      (vocab_size = std::stoi(line.substr(11))) <= 0)
    throw std::runtime_error("checkpoint missing vocab_size line");
  if (!std::getline(f, line) || line.rfind("rng ", 0) != 0)
    throw std::runtime_error("checkpoint missing rng line");
  ck.rng_state = line.substr(4);
  if (!std::getline(f, line) || line.rfind("adam_steps ", 0) != 0)
    throw std::runtime_error("checkpoint missing adam_steps line");

  Rng init_rng(0);  // values are fully overwritten below
  ck.params = model::init_params(cfg, vocab_size, init_rng);
  ck.adam = make_adam_state(ck.params);
  ck.adam.step_count = std::stol(line.substr(11));

  auto named = ck.params.named_tensors();
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    for (int which = 0; which < 3; ++which) {
      const std::string expect =
          which == 0 ? name : (which == 1 ? "adam.m:" + name : "adam.v:" + name);
      if (!std::getline(f, line))
        throw std::runtime_error("checkpoint truncated before tensor " + expect);
      std::istringstream hs(line);
      std::string got;
      hs >> got;
      if (got != expect)
        throw std::runtime_error("checkpoint tensor order mismatch: expected " +
                                 expect + ", got " + got);
      std::vector<int> shape;
      int d;
      while (hs >> d) shape.push_back(d);
      if (shape != t.shape())
        throw std::runtime_error("checkpoint tensor " + expect +
                                 " has wrong shape");
      auto vals = read_values_line(f, expect, t.values().size());
      if (which == 0)
        t.values() = std::move(vals);
      else if (which == 1)
        ck.adam.m[i] = std::move(vals);
      else
        ck.adam.v[i] = std::move(vals);
    }
  }
  return ck;
}

}  // namespace kgrg::train
