#include "kgrg/cvae.hpp"

#include <stdexcept>

namespace kgrg::cvae {

LatentParams recognize(Tape& t, const Tensor& response_vec,
                       const Tensor& context_summary,
                       const Tensor& fact_summary,
                       const model::RecognitionParams& p) {
  Tensor input =
      ad::concat_vec(t, {response_vec, context_summary, fact_summary});
  if (input.numel() != p.w1.cols())
    throw std::runtime_error("recognize: input dimension mismatch");
  Tensor hidden = ad::tanh_(t, ad::add(t, ad::matmul(t, p.w1, input), p.b1));
  LatentParams lp;
  lp.mu = ad::add(t, ad::matmul(t, p.mu_w, hidden), p.mu_b);
  lp.log_var = ad::clamp(
      t, ad::add(t, ad::matmul(t, p.logvar_w, hidden), p.logvar_b), -10.0,
      10.0);
  return lp;
}

std::vector<double> sample_prior(Rng& rng, int latent_dim) {
  std::vector<double> z(latent_dim);
  for (double& x : z) x = rng.normal();
  return z;
}

Tensor reparameterize(Tape& t, const LatentParams& lp,
                      const std::vector<double>& eps) {
  if (static_cast<int>(eps.size()) != lp.mu.numel())
    throw std::runtime_error("reparameterize: eps dimension mismatch");
  Tensor eps_t = Tensor::from({lp.mu.numel()}, eps);
  Tensor sigma = ad::exp_(t, ad::scale(t, lp.log_var, 0.5));
  return ad::add(t, lp.mu, ad::mul(t, sigma, eps_t));
}

Tensor kl_to_standard_normal(Tape& t, const LatentParams& lp) {
  const int n = lp.mu.numel();
  Tensor ones = Tensor::from({n}, std::vector<double>(n, 1.0));
  Tensor inner = ad::sub(t, ad::add(t, ones, lp.log_var),
                         ad::add(t, ad::mul(t, lp.mu, lp.mu),
                                 ad::exp_(t, lp.log_var)));
  return ad::scale(t, ad::sum(t, inner), -0.5);
}

double anneal_weight(long step, const AnnealSchedule& schedule) {
  if (schedule.ramp_steps < 1)
    throw std::runtime_error("anneal schedule needs ramp_steps >= 1");
  if (step < 0) throw std::runtime_error("anneal_weight: negative step");
  const double w = static_cast<double>(step) / schedule.ramp_steps;
  return w >= 1.0 ? 1.0 : w;
}

Tensor elbo_loss(Tape& t, const Tensor& recon_nll, const Tensor& kl,
                 double w) {
  return ad::add(t, recon_nll, ad::scale(t, kl, w));
}

}  // namespace kgrg::cvae
