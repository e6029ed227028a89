#ifndef KGRG_ATTENTION_HPP
#define KGRG_ATTENTION_HPP

#include <optional>
#include <string>

#include "kgrg/autodiff.hpp"

namespace kgrg::attn {

using ad::Tape;
using ad::Tensor;

enum class Variant { kBaseline, kContextOnly, kParallel, kContextGuided };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

// One additive-scorer parameter set: v (d), w1/w2 (d,d), b scalar.
struct ScorerParams {
  Tensor v;
  Tensor w1;
  Tensor w2;
  Tensor b;
};

struct AttentionOutput {
  Tensor context_vector;                // (d)
  std::optional<Tensor> fact_vector;    // (d)
  Tensor alpha;                         // distribution over N
  std::optional<Tensor> beta;           // distribution over M
  std::optional<Tensor> beta_hat;       // step-wise fact distribution
  std::optional<Tensor> beta_prior;     // context-derived fact prior
};

// v . tanh(w1 q + w2 k) + b for a single query/key pair.
Tensor additive_score(Tape& t, const Tensor& query, const Tensor& key,
                      const ScorerParams& p);

// Fused scores of one query against every row of keys (L,d) -> (L).
Tensor additive_scores_seq(Tape& t, const Tensor& query, const Tensor& keys,
                           const ScorerParams& p);

// Fused pairwise score matrix (N,M) between rows of a (N,d) and b (M,d).
Tensor pairwise_additive_scores(Tape& t, const Tensor& a, const Tensor& b,
                                const ScorerParams& p);

AttentionOutput context_only(Tape& t, const Tensor& o_prev, const Tensor& h_c,
                             const ScorerParams& pc);

AttentionOutput parallel(Tape& t, const Tensor& o_prev, const Tensor& h_c,
                         const Tensor& h_f, const ScorerParams& pc,
                         const ScorerParams& pf);

// Query-independent fact prior: softmax over column sums of the pairwise
// context/fact score matrix. Computed once per example.
Tensor fact_prior(Tape& t, const Tensor& h_c, const Tensor& h_f,
                  const ScorerParams& pg);

// Step-wise fact distribution averaged with the prior; alpha and the context
// vector follow the context-only path.
AttentionOutput context_guided(Tape& t, const Tensor& o_prev,
                               const Tensor& h_c, const Tensor& h_f,
                               const Tensor& beta_prior,
                               const ScorerParams& pc, const ScorerParams& po);

}  // namespace kgrg::attn

#endif  // KGRG_ATTENTION_HPP
