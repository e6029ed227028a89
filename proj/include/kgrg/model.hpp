#ifndef KGRG_MODEL_HPP
#define KGRG_MODEL_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgrg/attention.hpp"
#include "kgrg/autodiff.hpp"
#include "kgrg/config.hpp"
#include "kgrg/rng.hpp"
#include "kgrg/vocab.hpp"

namespace kgrg::model {

using ad::Tape;
using ad::Tensor;

// Per-cell GRU parameters. w*: (hidden, input), u*: (hidden, hidden),
// b*: (hidden).
struct GruCellParams {
  Tensor wz, uz, bz;
  Tensor wr, ur, br;
  Tensor wh, uh, bh;
};

struct RecognitionParams {
  Tensor w1, b1;          // (256, 512), (256)
  Tensor mu_w, mu_b;      // (latent, 256)
  Tensor logvar_w, logvar_b;
};

// Every trainable tensor of the model, built for one configuration.
struct ModelParameters {
  Config config;
  int vocab_size = 0;

  Tensor embedding;  // (V, 100)

  GruCellParams enc_c[2][2];  // [layer][direction]
  Tensor enc_c_proj_w;        // (256, 128), applied row-wise X.W
  Tensor enc_c_proj_b;        // (128)

  Tensor cnn_w[3], cnn_b[3];  // widths 1,2,3: ((w*100),128), (128)
  Tensor cnn_proj_w;          // (384, 128), row-wise
  Tensor cnn_proj_b;          // (128)

  GruCellParams enc_r[2][2];  // response encoder (cvae only)

  GruCellParams dec[2];       // unidirectional decoder
  Tensor dec_init_w[2];       // (128, 128)
  Tensor dec_init_b[2];       // (128)

  Tensor out_proj_w;  // (V, 128)
  Tensor out_proj_b;  // (V)

  attn::ScorerParams attn_c, attn_f, attn_g, attn_o;

  RecognitionParams recog;  // cvae only
  Tensor z_proj_w;          // (128, latent), cvae only
  Tensor z_proj_b;          // (128)

  // Active tensors in a stable order (drives Adam and checkpoints).
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  Tensor find(const std::string& name) const;

  int decoder_input_size() const;
  int attended_size() const;  // 128 or 256 depending on variant
  bool uses_facts() const;
};

ModelParameters init_params(const Config& cfg, int vocab_size, Rng& rng);

// GloVe-style text embeddings: `word v1 ... v100`. Words absent from the
// file keep their random initialization.
void load_embeddings(const std::string& path, const Vocabulary& vocab,
                     ModelParameters& params);

Tensor gru_cell(Tape& t, const Tensor& x, const Tensor& h,
                const GruCellParams& p);

// 2-layer bidirectional GRU over embeddings; per-position top-layer
// fwd/bwd concat (256) projected to 128. Returns (L, 128).
Tensor encode_context(Tape& t, const std::vector<int>& ids,
                      const ModelParameters& p);

// Same-padded width-1/2/3 convolutions, tanh, concat (384), projection to
// 128. Returns (L, 128).
Tensor encode_facts(Tape& t, const std::vector<int>& ids,
                    const ModelParameters& p);

// Final forward/backward top-layer states concatenated. Returns (256).
Tensor encode_response(Tape& t, const std::vector<int>& ids,
                       const ModelParameters& p);

struct DecoderState {
  std::vector<Tensor> hidden;  // one (128) per layer
  // o_{t-1} in the attention equations: the previous top-layer hidden.
  const Tensor& top() const { return hidden.back(); }
};

// Each layer's hidden = tanh(linear(mean over positions of h_c)); with
// init-only z injection the projected latent joins the linear input.
DecoderState init_decoder_state(Tape& t, const Tensor& h_c,
                                const ModelParameters& p,
                                const std::optional<Tensor>& z = std::nullopt);

// One teacher-forced / decoding step. The attended vector comes from the
// attention dispatch on the pre-step state; z is present iff cvae per-step
// injection is active.
std::pair<Tensor, DecoderState> decode_step(Tape& t, const DecoderState& state,
                                            int prev_token_id,
                                            const Tensor& attended,
                                            const std::optional<Tensor>& z,
                                            const ModelParameters& p);

// Encoded inputs shared across decoding steps of one example.
struct EncodedExample {
  Tensor h_c;                          // (N, 128)
  std::optional<Tensor> h_f;           // (M, 128)
  std::optional<Tensor> beta_prior;    // context-guided only, computed once
  Tensor context_summary;              // mean-pooled h_c (128)
  std::optional<Tensor> fact_summary;  // mean-pooled h_f (128)
};

EncodedExample encode_example(Tape& t, const std::vector<int>& context_ids,
                              const std::vector<int>& fact_ids,
                              const ModelParameters& p);

// Variant dispatch; baseline yields a zero vector of the attended size.
Tensor attend(Tape& t, const Tensor& o_prev, const EncodedExample& enc,
              const ModelParameters& p);

// Teacher-forced sum of -log p(token) over response+EOS, with BOS prepended
// on the input side, over an already-encoded example.
std::pair<Tensor, int> decode_teacher_forced(Tape& t,
                                             const EncodedExample& enc,
                                             const std::vector<int>& response_ids,
                                             const std::optional<Tensor>& z,
                                             const ModelParameters& p);

// Convenience wrapper: encode then decode. Returns (nll_sum, token_count).
std::pair<Tensor, int> teacher_forced_nll(Tape& t,
                                          const std::vector<int>& context_ids,
                                          const std::vector<int>& fact_ids,
                                          const std::vector<int>& response_ids,
                                          const std::optional<Tensor>& z,
                                          const ModelParameters& p);

// --- beam search --------------------------------------------------------

// Step interface so the search is testable against enumeration oracles.
// States are opaque handles owned by the model.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual int vocab_size() const = 0;
  virtual int start_state() = 0;
  // Log-probabilities over the vocabulary for the next position, plus the
  // state after consuming prev_token.
  virtual std::pair<std::vector<double>, int> step(int state,
                                                   int prev_token) = 0;
};

// Finished hypotheses ranked by sum-logp / (len+1) when length_normalize
// (the +1 counts the terminator), raw sum otherwise. Ties break toward the
// lexicographically smaller token sequence, which also prefers the earlier
// finish. Returns the winning token sequence without BOS/EOS.
std::vector<int> beam_search(StepModel& m, int beam_width, int max_len,
                             int bos_id, int eos_id,
                             bool length_normalize = true);

// Wires the full model into StepModel for one encoded example.
class ModelStepper : public StepModel {
 public:
  ModelStepper(const ModelParameters& p, const EncodedExample& enc,
               std::optional<std::vector<double>> z_values);
  int vocab_size() const override;
  int start_state() override;
  std::pair<std::vector<double>, int> step(int state, int prev_token) override;

 private:
  const ModelParameters& params_;
  const EncodedExample& enc_;
  std::optional<Tensor> z_;
  std::unique_ptr<Tape> tape_;
  std::vector<DecoderState> states_;
};

// Full decode of one example: encode, init, beam search.
std::vector<int> generate_response(const std::vector<int>& context_ids,
                                   const std::vector<int>& fact_ids,
                                   const ModelParameters& p,
                                   std::optional<std::vector<double>> z_values,
                                   int beam_width, int max_len,
                                   bool length_normalize);

}  // namespace kgrg::model

#endif  // KGRG_MODEL_HPP
