#ifndef KGRG_CONFIG_HPP
#define KGRG_CONFIG_HPP

#include <cstdint>
#include <string>

#include "kgrg/attention.hpp"

namespace kgrg {

enum class ZInjection { kPerStep, kInitOnly };

// Run configuration. Defaults follow the model's stated hyperparameters:
// 100-dim embeddings, hidden size 128, beam size 8, context/fact/response
// caps 100/500/20. Hidden and embedding sizes are validated, not tunable.
struct Config {
  attn::Variant attention = attn::Variant::kContextGuided;
  bool cvae = false;
  int latent_dim = 64;
  int kl_ramp_steps = 5000;
  ZInjection z_injection = ZInjection::kPerStep;
  int hidden_size = 128;
  int embed_size = 100;
  int beam_width = 8;
  int max_context_tokens = 100;
  int max_fact_tokens = 500;
  int max_response_tokens = 20;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int train_steps = 2000;
  int checkpoint_every = 500;
  int min_count = 1;
  double grad_clip_norm = 5.0;
  bool length_normalize = true;
  bool freeze_embeddings = false;

  void validate() const;
  // Stable one-line summary; stored in checkpoints as a compatibility stamp.
  std::string fingerprint() const;
};

// `key = value` lines, '#' comments. Unknown keys or unparsable values are
// errors naming the key and line.
Config parse_config_file(const std::string& path, Config base = Config{});
// Applies one key=value pair (CLI override path).
void apply_config_entry(Config& cfg, const std::string& key,
                        const std::string& value, int lineno = -1);

}  // namespace kgrg

#endif  // KGRG_CONFIG_HPP
