#ifndef KGRG_CVAE_HPP
#define KGRG_CVAE_HPP

#include <vector>

#include "kgrg/autodiff.hpp"
#include "kgrg/model.hpp"
#include "kgrg/rng.hpp"

namespace kgrg::cvae {

using ad::Tape;
using ad::Tensor;

// Posterior parameters; log_var is clamped to [-10, 10].
struct LatentParams {
  Tensor mu;
  Tensor log_var;
};

struct AnnealSchedule {
  int ramp_steps = 5000;  // K >= 1
};

// Recognition network q(z | response, context, fact): one tanh hidden layer
// (256) over the concatenated summaries, two linear heads.
LatentParams recognize(Tape& t, const Tensor& response_vec,
                       const Tensor& context_summary,
                       const Tensor& fact_summary,
                       const model::RecognitionParams& p);

// Standard-normal prior draw, one value per latent dimension.
std::vector<double> sample_prior(Rng& rng, int latent_dim);

// z = mu + exp(log_var / 2) * eps.
Tensor reparameterize(Tape& t, const LatentParams& lp,
                      const std::vector<double>& eps);

// Closed-form KL(q || N(0, I)) = -1/2 sum(1 + lv - mu^2 - exp(lv)).
Tensor kl_to_standard_normal(Tape& t, const LatentParams& lp);

// Linear ramp min(1, step / K).
double anneal_weight(long step, const AnnealSchedule& schedule);

// loss = recon_nll + w * kl.
Tensor elbo_loss(Tape& t, const Tensor& recon_nll, const Tensor& kl, double w);

}  // namespace kgrg::cvae

#endif  // KGRG_CVAE_HPP
