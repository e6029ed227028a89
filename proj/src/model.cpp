#include "kgrg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgrg::model {

namespace {

constexpr int kHidden = 128;
constexpr int kEmbed = 100;

Tensor uniform_param(Rng& rng, std::vector<int> shape) {
  int n = 1;
  for (int d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-0.1, 0.1);
  return Tensor::param(std::move(shape), std::move(v));
}

GruCellParams init_gru(Rng& rng, int input, int hidden) {
  GruCellParams p;
  p.wz = uniform_param(rng, {hidden, input});
  p.uz = uniform_param(rng, {hidden, hidden});
  p.bz = uniform_param(rng, {hidden});
  p.wr = uniform_param(rng, {hidden, input});
  p.ur = uniform_param(rng, {hidden, hidden});
  p.br = uniform_param(rng, {hidden});
  p.wh = uniform_param(rng, {hidden, input});
  p.uh = uniform_param(rng, {hidden, hidden});
  p.bh = uniform_param(rng, {hidden});
  return p;
}

attn::ScorerParams init_scorer(Rng& rng, int d) {
  attn::ScorerParams p;
  p.v = uniform_param(rng, {d});
  p.w1 = uniform_param(rng, {d, d});
  p.w2 = uniform_param(rng, {d, d});
  p.b = uniform_param(rng, {1});
  return p;
}

void push_gru(std::vector<std::pair<std::string, Tensor>>& out,
              const std::string& prefix, const GruCellParams& p) {
  out.emplace_back(prefix + ".wz", p.wz);
  out.emplace_back(prefix + ".uz", p.uz);
  out.emplace_back(prefix + ".bz", p.bz);
  out.emplace_back(prefix + ".wr", p.wr);
  out.emplace_back(prefix + ".ur", p.ur);
  out.emplace_back(prefix + ".br", p.br);
  out.emplace_back(prefix + ".wh", p.wh);
  out.emplace_back(prefix + ".uh", p.uh);
  out.emplace_back(prefix + ".bh", p.bh);
}

void push_scorer(std::vector<std::pair<std::string, Tensor>>& out,
                 const std::string& prefix, const attn::ScorerParams& p) {
  out.emplace_back(prefix + ".v", p.v);
  out.emplace_back(prefix + ".w1", p.w1);
  out.emplace_back(prefix + ".w2", p.w2);
  out.emplace_back(prefix + ".b", p.b);
}

Tensor embed_token(Tape& t, const ModelParameters& p, int id) {
  return ad::row(t, p.embedding, id);
}

// Runs a 2-layer bidirectional GRU stack; returns per-position top-layer
// fwd/bwd concats (each 256-dim).
std::vector<Tensor> bidir_stack(Tape& t, const std::vector<Tensor>& inputs,
                                const GruCellParams cells[2][2]) {
  const int L = static_cast<int>(inputs.size());
  std::vector<Tensor> layer_in = inputs;
  std::vector<Tensor> layer_out;
  for (int layer = 0; layer < 2; ++layer) {
    std::vector<Tensor> fwd(L), bwd(L);
    Tensor h = Tensor::zeros({kHidden});
    for (int i = 0; i < L; ++i) {
      h = gru_cell(t, layer_in[i], h, cells[layer][0]);
      fwd[i] = h;
    }
    h = Tensor::zeros({kHidden});
    for (int i = L - 1; i >= 0; --i) {
      h = gru_cell(t, layer_in[i], h, cells[layer][1]);
      bwd[i] = h;
    }
    layer_out.clear();
    for (int i = 0; i < L; ++i)
      layer_out.push_back(ad::concat_vec(t, {fwd[i], bwd[i]}));
    layer_in = layer_out;
  }
  return layer_out;
}

}  // namespace

// --- parameters -------------------------------------------------------------

int ModelParameters::attended_size() const {
  return uses_facts() ? 2 * kHidden : kHidden;
}

bool ModelParameters::uses_facts() const {
  return config.attention == attn::Variant::kParallel ||
         config.attention == attn::Variant::kContextGuided;
}

int ModelParameters::decoder_input_size() const {
  int n = kEmbed + attended_size();
  if (config.cvae && config.z_injection == ZInjection::kPerStep) n += kHidden;
  return n;
}

std::vector<std::pair<std::string, Tensor>> ModelParameters::named_tensors()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embedding", embedding);
  for (int l = 0; l < 2; ++l)
    for (int d = 0; d < 2; ++d)
      push_gru(out, "enc_c.l" + std::to_string(l) + ".d" + std::to_string(d),
               enc_c[l][d]);
  out.emplace_back("enc_c.proj_w", enc_c_proj_w);
  out.emplace_back("enc_c.proj_b", enc_c_proj_b);
  if (uses_facts() || config.cvae) {
    for (int w = 0; w < 3; ++w) {
      out.emplace_back("cnn.w" + std::to_string(w + 1), cnn_w[w]);
      out.emplace_back("cnn.b" + std::to_string(w + 1), cnn_b[w]);
    }
    out.emplace_back("cnn.proj_w", cnn_proj_w);
    out.emplace_back("cnn.proj_b", cnn_proj_b);
  }
  if (config.cvae)
    for (int l = 0; l < 2; ++l)
      for (int d = 0; d < 2; ++d)
        push_gru(out, "enc_r.l" + std::to_string(l) + ".d" + std::to_string(d),
                 enc_r[l][d]);
  for (int l = 0; l < 2; ++l) {
    push_gru(out, "dec.l" + std::to_string(l), dec[l]);
    out.emplace_back("dec_init.w" + std::to_string(l), dec_init_w[l]);
    out.emplace_back("dec_init.b" + std::to_string(l), dec_init_b[l]);
  }
  out.emplace_back("out_proj.w", out_proj_w);
  out.emplace_back("out_proj.b", out_proj_b);
  if (config.attention != attn::Variant::kBaseline)
    push_scorer(out, "attn_c", attn_c);
  if (config.attention == attn::Variant::kParallel)
    push_scorer(out, "attn_f", attn_f);
  if (config.attention == attn::Variant::kContextGuided) {
    push_scorer(out, "attn_g", attn_g);
    push_scorer(out, "attn_o", attn_o);
  }
  if (config.cvae) {
    out.emplace_back("recog.w1", recog.w1);
    out.emplace_back("recog.b1", recog.b1);
    out.emplace_back("recog.mu_w", recog.mu_w);
    out.emplace_back("recog.mu_b", recog.mu_b);
    out.emplace_back("recog.logvar_w", recog.logvar_w);
    out.emplace_back("recog.logvar_b", recog.logvar_b);
    out.emplace_back("z_proj.w", z_proj_w);
    out.emplace_back("z_proj.b", z_proj_b);
  }
  return out;
}

Tensor ModelParameters::find(const std::string& name) const {
  for (const auto& [n, t] : named_tensors())
    if (n == name) return t;
  throw std::runtime_error("no model tensor named " + name);
}

ModelParameters init_params(const Config& cfg, int vocab_size, Rng& rng) {
  cfg.validate();
  ModelParameters p;
  p.config = cfg;
  p.vocab_size = vocab_size;
  p.embedding = uniform_param(rng, {vocab_size, kEmbed});
  for (int l = 0; l < 2; ++l)
    for (int d = 0; d < 2; ++d)
      p.enc_c[l][d] = init_gru(rng, l == 0 ? kEmbed : 2 * kHidden, kHidden);
  p.enc_c_proj_w = uniform_param(rng, {2 * kHidden, kHidden});
  p.enc_c_proj_b = uniform_param(rng, {kHidden});
  for (int w = 0; w < 3; ++w) {
    p.cnn_w[w] = uniform_param(rng, {(w + 1) * kEmbed, kHidden});
    p.cnn_b[w] = uniform_param(rng, {kHidden});
  }
  p.cnn_proj_w = uniform_param(rng, {3 * kHidden, kHidden});
  p.cnn_proj_b = uniform_param(rng, {kHidden});
  for (int l = 0; l < 2; ++l)
    for (int d = 0; d < 2; ++d)
      p.enc_r[l][d] = init_gru(rng, l == 0 ? kEmbed : 2 * kHidden, kHidden);
  for (int l = 0; l < 2; ++l) {
    p.dec[l] = init_gru(rng, l == 0 ? p.decoder_input_size() : kHidden, kHidden);
    p.dec_init_w[l] = uniform_param(rng, {kHidden, kHidden});
    p.dec_init_b[l] = uniform_param(rng, {kHidden});
  }
  p.out_proj_w = uniform_param(rng, {vocab_size, kHidden});
  p.out_proj_b = uniform_param(rng, {vocab_size});
  p.attn_c = init_scorer(rng, kHidden);
  p.attn_f = init_scorer(rng, kHidden);
  p.attn_g = init_scorer(rng, kHidden);
  p.attn_o = init_scorer(rng, kHidden);
  p.recog.w1 = uniform_param(rng, {2 * kHidden, 4 * kHidden});
  p.recog.b1 = uniform_param(rng, {2 * kHidden});
  p.recog.mu_w = uniform_param(rng, {cfg.latent_dim, 2 * kHidden});
  p.recog.mu_b = uniform_param(rng, {cfg.latent_dim});
  p.recog.logvar_w = uniform_param(rng, {cfg.latent_dim, 2 * kHidden});
  p.recog.logvar_b = uniform_param(rng, {cfg.latent_dim});
  p.z_proj_w = uniform_param(rng, {kHidden, cfg.latent_dim});
  p.z_proj_b = uniform_param(rng, {kHidden});
  return p;
}

void load_embeddings(const std::string& path, const Vocabulary& vocab,
                     ModelParameters& params) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read embeddings file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string word;
    is >> word;
    std::vector<double> vals;
    double x;
    while (is >> x) vals.push_back(x);
    if (static_cast<int>(vals.size()) != kEmbed)
      throw std::runtime_error("embedding dimension mismatch at line " +
                               std::to_string(lineno));
    if (!vocab.contains(word)) continue;
    const int id = vocab.id(word);
    std::copy(vals.begin(), vals.end(),
              params.embedding.values().begin() + id * kEmbed);
  }
}

// --- forward pieces ---------------------------------------------------------

Tensor gru_cell(Tape& t, const Tensor& x, const Tensor& h,
                const GruCellParams& p) {
  Tensor z = ad::sigmoid(
      t, ad::add(t, ad::add(t, ad::matmul(t, p.wz, x), ad::matmul(t, p.uz, h)),
                 p.bz));
  Tensor r = ad::sigmoid(
      t, ad::add(t, ad::add(t, ad::matmul(t, p.wr, x), ad::matmul(t, p.ur, h)),
                 p.br));
  Tensor cand = ad::tanh_(
      t, ad::add(t,
                 ad::add(t, ad::matmul(t, p.wh, x),
                         ad::matmul(t, p.uh, ad::mul(t, r, h))),
                 p.bh));
  Tensor ones = Tensor::from(h.shape(), std::vector<double>(h.numel(), 1.0));
  return ad::add(t, ad::mul(t, ad::sub(t, ones, z), h), ad::mul(t, z, cand));
}

Tensor encode_context(Tape& t, const std::vector<int>& ids,
                      const ModelParameters& p) {
  if (ids.empty()) throw std::runtime_error("encode_context: empty input");
  std::vector<Tensor> emb;
  for (int id : ids) emb.push_back(embed_token(t, p, id));
  std::vector<Tensor> top = bidir_stack(t, emb, p.enc_c);
  Tensor stacked = ad::stack_rows(t, top);  // (L, 256)
  return ad::add_row_broadcast(t, ad::matmul(t, stacked, p.enc_c_proj_w),
                               p.enc_c_proj_b);
}

Tensor encode_facts(Tape& t, const std::vector<int>& ids,
                    const ModelParameters& p) {
  if (ids.empty()) throw std::runtime_error("encode_facts: empty input");
  Tensor emb = ad::gather_rows(t, p.embedding, ids);  // (L, 100)
  Tensor maps[3];
  for (int w = 0; w < 3; ++w)
    maps[w] = ad::tanh_(
        t, ad::conv1d_same(t, emb, p.cnn_w[w], p.cnn_b[w], w + 1));
  const int L = static_cast<int>(ids.size());
  std::vector<Tensor> rows;
  for (int l = 0; l < L; ++l)
    rows.push_back(ad::concat_vec(
        t, {ad::row(t, maps[0], l), ad::row(t, maps[1], l),
            ad::row(t, maps[2], l)}));
  Tensor stacked = ad::stack_rows(t, rows);  // (L, 384)
  return ad::add_row_broadcast(t, ad::matmul(t, stacked, p.cnn_proj_w),
                               p.cnn_proj_b);
}

Tensor encode_response(Tape& t, const std::vector<int>& ids,
                       const ModelParameters& p) {
  if (ids.empty()) throw std::runtime_error("encode_response: empty input");
  std::vector<Tensor> emb;
  for (int id : ids) emb.push_back(embed_token(t, p, id));

  const int L = static_cast<int>(ids.size());
  std::vector<Tensor> layer_in = emb;
  Tensor final_fwd, final_bwd;
  for (int layer = 0; layer < 2; ++layer) {
    std::vector<Tensor> fwd(L), bwd(L);
    Tensor h = Tensor::zeros({kHidden});
    for (int i = 0; i < L; ++i) {
      h = gru_cell(t, layer_in[i], h, p.enc_r[layer][0]);
      fwd[i] = h;
    }
    final_fwd = h;
    h = Tensor::zeros({kHidden});
    for (int i = L - 1; i >= 0; --i) {
      h = gru_cell(t, layer_in[i], h, p.enc_r[layer][1]);
      bwd[i] = h;
    }
    final_bwd = h;
    layer_in.clear();
    for (int i = 0; i < L; ++i)
      layer_in.push_back(ad::concat_vec(t, {fwd[i], bwd[i]}));
  }
  return ad::concat_vec(t, {final_fwd, final_bwd});
}

DecoderState init_decoder_state(Tape& t, const Tensor& h_c,
                                const ModelParameters& p,
                                const std::optional<Tensor>& z) {
  Tensor mean = ad::mean_rows(t, h_c);
  std::optional<Tensor> zp;
  if (z && p.config.z_injection == ZInjection::kInitOnly)
    zp = ad::add(t, ad::matmul(t, p.z_proj_w, *z), p.z_proj_b);
  DecoderState s;
  for (int l = 0; l < 2; ++l) {
    Tensor pre = ad::add(t, ad::matmul(t, p.dec_init_w[l], mean),
                         p.dec_init_b[l]);
    if (zp) pre = ad::add(t, pre, *zp);
    s.hidden.push_back(ad::tanh_(t, pre));
  }
  return s;
}

std::pair<Tensor, DecoderState> decode_step(Tape& t, const DecoderState& state,
                                            int prev_token_id,
                                            const Tensor& attended,
                                            const std::optional<Tensor>& z,
                                            const ModelParameters& p) {
  std::vector<Tensor> parts{embed_token(t, p, prev_token_id), attended};
  if (z && p.config.z_injection == ZInjection::kPerStep)
    parts.push_back(ad::add(t, ad::matmul(t, p.z_proj_w, *z), p.z_proj_b));
  Tensor input = ad::concat_vec(t, parts);
  if (input.numel() != p.decoder_input_size())
    throw std::runtime_error("decode_step: input size mismatch");
  DecoderState next;
  Tensor h0 = gru_cell(t, input, state.hidden[0], p.dec[0]);
  Tensor h1 = gru_cell(t, h0, state.hidden[1], p.dec[1]);
  next.hidden = {h0, h1};
  Tensor logits = ad::add(t, ad::matmul(t, p.out_proj_w, h1), p.out_proj_b);
  return {ad::softmax(t, logits), next};
}

EncodedExample encode_example(Tape& t, const std::vector<int>& context_ids,
                              const std::vector<int>& fact_ids,
                              const ModelParameters& p) {
  EncodedExample enc;
  enc.h_c = encode_context(t, context_ids, p);
  enc.context_summary = ad::mean_rows(t, enc.h_c);
  if (p.uses_facts() || p.config.cvae) {
    enc.h_f = encode_facts(t, fact_ids, p);
    enc.fact_summary = ad::mean_rows(t, *enc.h_f);
  }
  if (p.config.attention == attn::Variant::kContextGuided)
    enc.beta_prior = attn::fact_prior(t, enc.h_c, *enc.h_f, p.attn_g);
  return enc;
}

Tensor attend(Tape& t, const Tensor& o_prev, const EncodedExample& enc,
              const ModelParameters& p) {
  switch (p.config.attention) {
    case attn::Variant::kBaseline:
      return Tensor::zeros({kHidden});
    case attn::Variant::kContextOnly:
      return attn::context_only(t, o_prev, enc.h_c, p.attn_c).context_vector;
    case attn::Variant::kParallel: {
      auto out = attn::parallel(t, o_prev, enc.h_c, *enc.h_f, p.attn_c,
                                p.attn_f);
      return ad::concat_vec(t, {out.context_vector, *out.fact_vector});
    }
    case attn::Variant::kContextGuided: {
      auto out = attn::context_guided(t, o_prev, enc.h_c, *enc.h_f,
                                      *enc.beta_prior, p.attn_c, p.attn_o);
      return ad::concat_vec(t, {out.context_vector, *out.fact_vector});
    }
  }
  throw std::runtime_error("bad attention variant");
}

std::pair<Tensor, int> decode_teacher_forced(Tape& t,
                                             const EncodedExample& enc,
                                             const std::vector<int>& response_ids,
                                             const std::optional<Tensor>& z,
                                             const ModelParameters& p) {
  DecoderState state = init_decoder_state(t, enc.h_c, p, z);

  std::vector<int> targets = response_ids;
  targets.push_back(Vocabulary::kEos);
  int prev = Vocabulary::kBos;
  Tensor nll = Tensor::zeros({1});
  for (int target : targets) {
    Tensor attended = attend(t, state.top(), enc, p);
    auto [dist, next] = decode_step(t, state, prev, attended, z, p);
    nll = ad::sub(t, nll, ad::log_(t, ad::pick(t, dist, target)));
    state = next;
    prev = target;
  }
  return {nll, static_cast<int>(targets.size())};
}

std::pair<Tensor, int> teacher_forced_nll(Tape& t,
                                          const std::vector<int>& context_ids,
                                          const std::vector<int>& fact_ids,
                                          const std::vector<int>& response_ids,
                                          const std::optional<Tensor>& z,
                                          const ModelParameters& p) {
  EncodedExample enc = encode_example(t, context_ids, fact_ids, p);
  return decode_teacher_forced(t, enc, response_ids, z, p);
}

// --- beam search ------------------------------------------------------------

namespace {

struct Hyp {
  int state = 0;
  int last_token = 0;
  std::vector<int> tokens;
  double logp = 0.0;
};

double final_score(const Hyp& h, bool length_normalize) {
  if (!length_normalize) return h.logp;
  return h.logp / (static_cast<double>(h.tokens.size()) + 1.0);
}

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::vector<int> beam_search(StepModel& m, int beam_width, int max_len,
                             int bos_id, int eos_id, bool length_normalize) {
  if (beam_width < 1) throw std::runtime_error("beam_width must be >= 1");
  std::vector<Hyp> live{Hyp{m.start_state(), bos_id, {}, 0.0}};
  std::vector<Hyp> finished;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (Hyp& h : live) {
      auto [logprobs, ns] = m.step(h.state, h.last_token);
      for (int v = 0; v < m.vocab_size(); ++v) {
        Hyp c = h;
        c.state = ns;
        c.logp += logprobs[v];
        if (v == eos_id) {
          c.last_token = v;
        } else {
          c.last_token = v;
          c.tokens.push_back(v);
        }
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) {
                       if (a.logp != b.logp) return a.logp > b.logp;
                       return lex_less(a.tokens, b.tokens);
                     });
    live.clear();
    const int keep =
        std::min<int>(beam_width, static_cast<int>(candidates.size()));
    for (int i = 0; i < keep; ++i) {
      if (candidates[i].last_token == eos_id)
        finished.push_back(std::move(candidates[i]));
      else
        live.push_back(std::move(candidates[i]));
    }
  }
  // Length-capped survivors compete without a terminator probability.
  for (Hyp& h : live) finished.push_back(std::move(h));
  if (finished.empty()) return {};

  const Hyp* best = &finished[0];
  for (const Hyp& h : finished) {
    const double s = final_score(h, length_normalize);
    const double bs = final_score(*best, length_normalize);
    if (s > bs || (s == bs && lex_less(h.tokens, best->tokens))) best = &h;
  }
  return best->tokens;
}

ModelStepper::ModelStepper(const ModelParameters& p, const EncodedExample& enc,
                           std::optional<std::vector<double>> z_values)
    : params_(p), enc_(enc), tape_(std::make_unique<Tape>()) {
  tape_->set_enabled(false);
  if (z_values) {
    if (static_cast<int>(z_values->size()) != p.config.latent_dim)
      throw std::runtime_error("latent sample has wrong dimension");
    z_ = Tensor::from({p.config.latent_dim}, std::move(*z_values));
  }
}

int ModelStepper::vocab_size() const { return params_.vocab_size; }

int ModelStepper::start_state() {
  states_.push_back(init_decoder_state(*tape_, enc_.h_c, params_, z_));
  return static_cast<int>(states_.size()) - 1;
}

std::pair<std::vector<double>, int> ModelStepper::step(int state,
                                                       int prev_token) {
  const DecoderState& s = states_.at(state);
  Tensor attended = attend(*tape_, s.top(), enc_, params_);
  auto [dist, next] = decode_step(*tape_, s, prev_token, attended, z_, params_);
  std::vector<double> logprobs(dist.values().size());
  for (std::size_t i = 0; i < logprobs.size(); ++i)
    logprobs[i] = std::log(std::max(dist.values()[i], 1e-300));
  states_.push_back(std::move(next));
  return {std::move(logprobs), static_cast<int>(states_.size()) - 1};
}

std::vector<int> generate_response(const std::vector<int>& context_ids,
                                   const std::vector<int>& fact_ids,
                                   const ModelParameters& p,
                                   std::optional<std::vector<double>> z_values,
                                   int beam_width, int max_len,
                                   bool length_normalize) {
  Tape tape;
  tape.set_enabled(false);
  EncodedExample enc = encode_example(tape, context_ids, fact_ids, p);
  ModelStepper stepper(p, enc, std::move(z_values));
  return beam_search(stepper, beam_width, max_len, Vocabulary::kBos,
                     Vocabulary::kEos, length_normalize);
}

}  // namespace kgrg::model
