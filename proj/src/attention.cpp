#include "kgrg/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kgrg::attn {

namespace {

// pre[i] = w (d,d) times row i of x (L,d); returns L*d values.
std::vector<double> matvec_rows(const Tensor& w, const Tensor& x) {
  const int L = x.rows(), d = x.cols();
  std::vector<double> out(static_cast<std::size_t>(L) * d, 0.0);
  const double* wv = w.values().data();
  const double* xv = x.values().data();
  for (int l = 0; l < L; ++l) {
    const double* xr = xv + l * d;
    double* orow = out.data() + l * d;
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      const double* wr = wv + i * d;
      for (int j = 0; j < d; ++j) s += wr[j] * xr[j];
      orow[i] = s;
    }
  }
  return out;
}

void check_scorer(const ScorerParams& p, int d) {
  if (p.v.numel() != d || p.w1.rows() != d || p.w1.cols() != d ||
      p.w2.rows() != d || p.w2.cols() != d || p.b.numel() != 1)
    throw std::runtime_error("additive scorer parameter shapes do not match dim " +
                             std::to_string(d));
}

}  // namespace

Variant variant_from_string(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "context-only") return Variant::kContextOnly;
  if (name == "parallel") return Variant::kParallel;
  if (name == "context-guided") return Variant::kContextGuided;
  throw std::runtime_error("unknown attention variant: " + name);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kContextOnly: return "context-only";
    case Variant::kParallel: return "parallel";
    case Variant::kContextGuided: return "context-guided";
  }
  throw std::runtime_error("bad variant");
}

Tensor additive_score(Tape& t, const Tensor& query, const Tensor& key,
                      const ScorerParams& p) {
  const int d = query.numel();
  check_scorer(p, d);
  Tensor pre = ad::add(t, ad::matmul(t, p.w1, query), ad::matmul(t, p.w2, key));
  return ad::add(t, ad::dot(t, p.v, ad::tanh_(t, pre)), p.b);
}

Tensor additive_scores_seq(Tape& t, const Tensor& query, const Tensor& keys,
                           const ScorerParams& p) {
  const int d = query.numel();
  if (keys.shape().size() != 2 || keys.cols() != d)
    throw std::runtime_error("additive_scores_seq: key matrix shape mismatch");
  check_scorer(p, d);
  const int L = keys.rows();

  std::vector<double> wq(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += p.w1.values()[i * d + j] * query.values()[j];
    wq[i] = s;
  }
  std::vector<double> wk = matvec_rows(p.w2, keys);
  std::vector<double> th(static_cast<std::size_t>(L) * d);
  std::vector<double> scores(L);
  for (int l = 0; l < L; ++l) {
    double e = p.b.values()[0];
    for (int i = 0; i < d; ++i) {
      const double x = std::tanh(wq[i] + wk[l * d + i]);
      th[l * d + i] = x;
      e += p.v.values()[i] * x;
    }
    scores[l] = e;
  }

  return ad::custom_op(
      t, "additive_scores_seq", {L}, std::move(scores),
      {query, keys, p.v, p.w1, p.w2, p.b},
      [L, d, th = std::move(th)](ad::Node& n) {
        const double* g = n.grad.data();
        const double* qv = n.inputs[0]->value.data();
        const double* kv = n.inputs[1]->value.data();
        const double* vv = n.inputs[2]->value.data();
        const double* w1 = n.inputs[3]->value.data();
        const double* w2 = n.inputs[4]->value.data();
        double* gq = n.inputs[0]->grad.data();
        double* gk = n.inputs[1]->grad.data();
        double* gv = n.inputs[2]->grad.data();
        double* gw1 = n.inputs[3]->grad.data();
        double* gw2 = n.inputs[4]->grad.data();
        double* gb = n.inputs[5]->grad.data();
        std::vector<double> usum(d, 0.0);  // sum over l of u_l
        for (int l = 0; l < L; ++l) {
          const double gl = g[l];
          if (gl == 0.0) continue;
          *gb += gl;
          const double* tl = th.data() + l * d;
          for (int i = 0; i < d; ++i) {
            gv[i] += gl * tl[i];
            const double u = gl * (1.0 - tl[i] * tl[i]) * vv[i];
            usum[i] += u;
            // key gradient through w2, plus dw2 row update
            const double* krow = kv + l * d;
            const double* w2r = w2 + i * d;
            double* gw2r = gw2 + i * d;
            for (int j = 0; j < d; ++j) {
              gk[l * d + j] += u * w2r[j];
              gw2r[j] += u * krow[j];
            }
          }
        }
        for (int i = 0; i < d; ++i) {
          const double u = usum[i];
          if (u == 0.0) continue;
          const double* w1r = w1 + i * d;
          double* gw1r = gw1 + i * d;
          for (int j = 0; j < d; ++j) {
            gq[j] += u * w1r[j];
            gw1r[j] += u * qv[j];
          }
        }
      });
}

Tensor pairwise_additive_scores(Tape& t, const Tensor& a, const Tensor& b,
                                const ScorerParams& p) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols())
    throw std::runtime_error("pairwise_additive_scores: shape mismatch");
  const int d = a.cols(), N = a.rows(), M = b.rows();
  check_scorer(p, d);

  std::vector<double> pa = matvec_rows(p.w1, a);
  std::vector<double> pb = matvec_rows(p.w2, b);
  std::vector<double> scores(static_cast<std::size_t>(N) * M);
  const double bias = p.b.values()[0];
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j) {
      double e = bias;
      for (int k = 0; k < d; ++k)
        e += p.v.values()[k] * std::tanh(pa[i * d + k] + pb[j * d + k]);
      scores[i * M + j] = e;
    }

  return ad::custom_op(
      t, "pairwise_additive_scores", {N, M}, std::move(scores),
      {a, b, p.v, p.w1, p.w2, p.b},
      [N, M, d, pa = std::move(pa), pb = std::move(pb)](ad::Node& n) {
        const double* g = n.grad.data();
        const double* av = n.inputs[0]->value.data();
        const double* bv = n.inputs[1]->value.data();
        const double* vv = n.inputs[2]->value.data();
        const double* w1 = n.inputs[3]->value.data();
        const double* w2 = n.inputs[4]->value.data();
        double* ga = n.inputs[0]->grad.data();
        double* gb = n.inputs[1]->grad.data();
        double* gv = n.inputs[2]->grad.data();
        double* gw1 = n.inputs[3]->grad.data();
        double* gw2 = n.inputs[4]->grad.data();
        double* gbias = n.inputs[5]->grad.data();
        // ua[i*d+k] / ub[j*d+k]: accumulated u per context/fact row.
        std::vector<double> ua(static_cast<std::size_t>(N) * d, 0.0);
        std::vector<double> ub(static_cast<std::size_t>(M) * d, 0.0);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < M; ++j) {
            const double gij = g[i * M + j];
            if (gij == 0.0) continue;
            *gbias += gij;
            for (int k = 0; k < d; ++k) {
              const double th = std::tanh(pa[i * d + k] + pb[j * d + k]);
              gv[k] += gij * th;
              const double u = gij * (1.0 - th * th) * vv[k];
              ua[i * d + k] += u;
              ub[j * d + k] += u;
            }
          }
        for (int i = 0; i < N; ++i)
          for (int k = 0; k < d; ++k) {
            const double u = ua[i * d + k];
            if (u == 0.0) continue;
            const double* w1r = w1 + k * d;
            double* gw1r = gw1 + k * d;
            for (int j = 0; j < d; ++j) {
              ga[i * d + j] += u * w1r[j];
              gw1r[j] += u * av[i * d + j];
            }
          }
        for (int m = 0; m < M; ++m)
          for (int k = 0; k < d; ++k) {
            const double u = ub[m * d + k];
            if (u == 0.0) continue;
            const double* w2r = w2 + k * d;
            double* gw2r = gw2 + k * d;
            for (int j = 0; j < d; ++j) {
              gb[m * d + j] += u * w2r[j];
              gw2r[j] += u * bv[m * d + j];
            }
          }
      });
}

AttentionOutput context_only(Tape& t, const Tensor& o_prev, const Tensor& h_c,
                             const ScorerParams& pc) {
  AttentionOutput out;
  out.alpha = ad::softmax(t, additive_scores_seq(t, o_prev, h_c, pc));
  out.context_vector = ad::vecmat(t, out.alpha, h_c);
  return out;
}

AttentionOutput parallel(Tape& t, const Tensor& o_prev, const Tensor& h_c,
                         const Tensor& h_f, const ScorerParams& pc,
                         const ScorerParams& pf) {
  AttentionOutput out = context_only(t, o_prev, h_c, pc);
  out.beta = ad::softmax(t, additive_scores_seq(t, o_prev, h_f, pf));
  out.fact_vector = ad::vecmat(t, *out.beta, h_f);
  return out;
}

Tensor fact_prior(Tape& t, const Tensor& h_c, const Tensor& h_f,
                  const ScorerParams& pg) {
  Tensor m = pairwise_additive_scores(t, h_c, h_f, pg);
  Tensor ones = Tensor::from({h_c.rows()}, std::vector<double>(h_c.rows(), 1.0));
  Tensor col_sums = ad::vecmat(t, ones, m);
  return ad::softmax(t, col_sums);
}

AttentionOutput context_guided(Tape& t, const Tensor& o_prev,
                               const Tensor& h_c, const Tensor& h_f,
                               const Tensor& beta_prior,
                               const ScorerParams& pc, const ScorerParams& po) {
  if (beta_prior.numel() != h_f.rows())
    throw std::runtime_error("context_guided: prior is not a fact distribution");
  AttentionOutput out = context_only(t, o_prev, h_c, pc);
  // The step-wise scores go against the fact states: the averaged result must
  // be a distribution over the M facts, so scoring context states here would
  // be shape-inconsistent.
  out.beta_hat = ad::softmax(t, additive_scores_seq(t, o_prev, h_f, po));
  out.beta_prior = beta_prior;
  out.beta = ad::scale(t, ad::add(t, *out.beta_hat, beta_prior), 0.5);
  out.fact_vector = ad::vecmat(t, *out.beta, h_f);
  return out;
}

}  // namespace kgrg::attn
