#ifndef KGRG_TRAINING_HPP
#define KGRG_TRAINING_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "kgrg/corpus.hpp"
#include "kgrg/cvae.hpp"
#include "kgrg/model.hpp"

namespace kgrg::train {

// Per-parameter Adam moments, parallel to ModelParameters::named_tensors().
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(const model::ModelParameters& params);

// Bias-corrected Adam update from the gradients currently stored on the
// parameter tensors. Errors on a non-finite gradient, naming the parameter.
void adam_step(model::ModelParameters& params, AdamState& state, double lr);

struct StepStats {
  double loss = 0.0;           // objective actually optimized
  double nll_per_token = 0.0;  // reconstruction part
  double kl = 0.0;             // mean per-example KL (0 without cvae)
};

// Teacher-forced loop: cyclic deterministic batching, gradient-norm clipping,
// KL annealing on the cvae path, one private rng stream for latent noise.
class Trainer {
 public:
  Trainer(model::ModelParameters& params, const Config& cfg);

  StepStats train_step(const std::vector<ProcessedExample>& batch);

  // Runs train_step over cyclic batches of the dataset.
  StepStats run(const std::vector<ProcessedExample>& dataset, int steps,
                const std::string& checkpoint_path = "",
                std::ostream* log = nullptr);

  long global_step() const { return global_step_; }
  AdamState& adam() { return adam_; }
  Rng& rng() { return rng_; }
  void restore(AdamState adam, long step, const std::string& rng_state);

 private:
  model::ModelParameters& params_;
  Config cfg_;
  AdamState adam_;
  Rng rng_;
  long global_step_ = 0;
  std::size_t cursor_ = 0;
};

struct Checkpoint {
  model::ModelParameters params;
  AdamState adam;
  long step = 0;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::string rng_state;
};

// Text format: `kgrg-ckpt v1 step=<n> seed=<s>` header, then per tensor a
// `name shape_dims...` line followed by one line of values. Round trip is
// lossless; resumed training matches an uninterrupted run bit for bit.
void save_checkpoint(const std::string& path,
                     const model::ModelParameters& params,
                     const AdamState& adam, long step,
                     const std::string& rng_state);
Checkpoint load_checkpoint(const std::string& path, const Config& cfg);

}  // namespace kgrg::train

#endif  // KGRG_TRAINING_HPP
