#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kgrg/cvae.hpp"

using namespace kgrg;
using namespace kgrg::cvae;
using ad::Tape;
using ad::Tensor;

namespace {

LatentParams make_latent(std::vector<double> mu, std::vector<double> lv) {
  LatentParams lp;
  const int n = static_cast<int>(mu.size());
  lp.mu = Tensor::param({n}, std::move(mu));
  lp.log_var = Tensor::param({n}, std::move(lv));
  return lp;
}

// Independent Monte-Carlo estimate of E_q[log q(z) - log p(z)].
double mc_kl(const std::vector<double>& mu, const std::vector<double>& lv,
             int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = static_cast<int>(mu.size());
  double total = 0.0;
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) {
      const double eps = gauss(rng);
      const double z = mu[i] + std::exp(0.5 * lv[i]) * eps;
      // log q - log p with the 2*pi constants cancelled
      total += 0.5 * (z * z - eps * eps - lv[i]);
    }
  }
  return total / samples;
}

}  // namespace

TEST_CASE("closed-form kl hand values") {
  Tape t;
  CHECK(kl_to_standard_normal(t, make_latent({0.0}, {0.0})).item() == 0.0);
  CHECK(kl_to_standard_normal(t, make_latent({1.0}, {0.0})).item() ==
        doctest::Approx(0.5).epsilon(1e-15));
  // mu=0, var=2: KL = (var - 1 - ln var)/2 = (1 - ln 2)/2
  CHECK(kl_to_standard_normal(t, make_latent({0.0}, {std::log(2.0)})).item() ==
        doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-14));
  // dimensions add up
  CHECK(kl_to_standard_normal(t, make_latent({1.0, 1.0, 0.0}, {0.0, 0.0, 0.0}))
            .item() == doctest::Approx(1.0).epsilon(1e-15));
  // KL is nonnegative on random instances
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mu(4), lv(4);
    for (double& x : mu) x = u(rng);
    for (double& x : lv) x = u(rng);
    CHECK(kl_to_standard_normal(t, make_latent(mu, lv)).item() >= 0.0);
  }
}

TEST_CASE("closed-form kl agrees with a 200k-sample monte carlo estimate") {
  std::vector<double> mu = {0.7, -0.3, 1.1, 0.0};
  std::vector<double> lv = {0.2, -0.5, 0.0, 0.9};
  Tape t;
  const double closed = kl_to_standard_normal(t, make_latent(mu, lv)).item();
  const double mc = mc_kl(mu, lv, 200000, 12345);
  CHECK(std::abs(mc - closed) / closed < 0.01);
}

TEST_CASE("reparameterize is exact and differentiable") {
  Tape t;
  LatentParams lp = make_latent({0.5, -1.0}, {std::log(4.0), 0.0});
  Tensor z = reparameterize(t, lp, {1.0, -2.0});
  CHECK(z.values()[0] == doctest::Approx(0.5 + 2.0 * 1.0).epsilon(1e-15));
  CHECK(z.values()[1] == doctest::Approx(-1.0 + 1.0 * -2.0).epsilon(1e-15));
  CHECK_THROWS_AS(reparameterize(t, lp, {1.0}), std::runtime_error);

  double err = ad::gradient_check(
      [](Tape& tt, const std::vector<Tensor>& v) {
        LatentParams p{v[0], v[1]};
        Tensor zz = reparameterize(tt, p, {0.3, -0.8, 1.2});
        return ad::add(tt, ad::sum(tt, ad::mul(tt, zz, zz)),
                       kl_to_standard_normal(tt, p));
      },
      {Tensor::param({3}, {0.1, 0.4, -0.2}),
       Tensor::param({3}, {0.0, -0.3, 0.5})});
  CHECK(err < 1e-6);
}

TEST_CASE("recognition network shapes and clamped log variance") {
  Config cfg;
  cfg.cvae = true;
  Rng rng(2);
  auto params = model::init_params(cfg, 12, rng);
  Tape t;
  t.set_enabled(false);
  Tensor r = model::encode_response(t, {5, 6, 7}, params);
  Tensor cs = Tensor::zeros({128});
  Tensor fs = Tensor::zeros({128});
  LatentParams lp = recognize(t, r, cs, fs, params.recog);
  CHECK(lp.mu.numel() == cfg.latent_dim);
  CHECK(lp.log_var.numel() == cfg.latent_dim);
  for (double x : lp.log_var.values()) {
    CHECK(x >= -10.0);
    CHECK(x <= 10.0);
  }
  // wrong input dimension is rejected
  CHECK_THROWS_WITH_AS(recognize(t, cs, cs, fs, params.recog),
                       doctest::Contains("dimension mismatch"),
                       std::runtime_error);
}

TEST_CASE("prior samples look standard normal") {
  Rng rng(7);
  const int n = 50000, d = 4;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n / d; ++i) {
    auto z = sample_prior(rng, d);
    REQUIRE(z.size() == d);
    for (double x : z) {
      sum += x;
      sumsq += x * x;
    }
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("linear kl anneal schedule") {
  AnnealSchedule s{1000};
  CHECK(anneal_weight(0, s) == 0.0);
  CHECK(anneal_weight(500, s) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(anneal_weight(1000, s) == 1.0);
  CHECK(anneal_weight(5000, s) == 1.0);
  CHECK_THROWS_AS(anneal_weight(-1, s), std::runtime_error);
  CHECK_THROWS_AS(anneal_weight(1, AnnealSchedule{0}), std::runtime_error);
}

TEST_CASE("elbo combines reconstruction and weighted kl") {
  Tape t;
  Tensor recon = Tensor::from({1}, {2.0});
  Tensor kl = Tensor::from({1}, {3.0});
  CHECK(elbo_loss(t, recon, kl, 0.0).item() == doctest::Approx(2.0));
  CHECK(elbo_loss(t, recon, kl, 0.5).item() == doctest::Approx(3.5));
  CHECK(elbo_loss(t, recon, kl, 1.0).item() == doctest::Approx(5.0));
}
