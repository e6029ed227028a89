#include "kgrg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace kgrg::metrics {

namespace {

using Counts = std::map<std::string, long>;

std::string join_gram(const std::vector<std::string>& toks, std::size_t start,
                      int n) {
  std::string g = toks[start];
  for (int k = 1; k < n; ++k) {
    g.push_back('\x1f');
    g += toks[start + k];
  }
  return g;
}

Counts ngram_counts(const std::vector<std::string>& toks, int n) {
  Counts c;
  if (static_cast<int>(toks.size()) >= n)
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
      ++c[join_gram(toks, i, n)];
  return c;
}

void check_n(int max_n) {
  if (max_n < 1 || max_n > 4) throw std::runtime_error("max_n must be in 1..4");
}

}  // namespace

double bleu(const std::vector<EvalPair>& pairs, int max_n, bool smooth) {
  check_n(max_n);
  std::vector<double> matches(max_n + 1, 0.0), totals(max_n + 1, 0.0);
  long hyp_len = 0, ref_len = 0;
  for (const EvalPair& p : pairs) {
    if (p.references.empty())
      throw std::runtime_error("evaluation pair without references");
    hyp_len += static_cast<long>(p.hypothesis.size());
    // Closest reference length; ties favor the shorter reference.
    long best = static_cast<long>(p.references[0].size());
    for (const auto& r : p.references) {
      const long rl = static_cast<long>(r.size());
      const long c = static_cast<long>(p.hypothesis.size());
      if (std::llabs(rl - c) < std::llabs(best - c) ||
          (std::llabs(rl - c) == std::llabs(best - c) && rl < best))
        best = rl;
    }
    ref_len += best;
    for (int n = 1; n <= max_n; ++n) {
      Counts hyp = ngram_counts(p.hypothesis, n);
      Counts cap;
      for (const auto& r : p.references) {
        Counts rc = ngram_counts(r, n);
        for (const auto& [g, c] : rc) cap[g] = std::max(cap[g], c);
      }
      for (const auto& [g, c] : hyp) {
        totals[n] += c;
        auto it = cap.find(g);
        if (it != cap.end()) matches[n] += std::min(c, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_prec = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double m = matches[n];
    if (m == 0.0) {
      if (!smooth) return 0.0;
      m = 1e-9;
    }
    if (totals[n] == 0.0) return 0.0;
    log_prec += std::log(m / totals[n]) / max_n;
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / hyp_len));
  return bp * std::exp(log_prec);
}

double nist(const std::vector<EvalPair>& pairs, int max_n) {
  check_n(max_n);
  // Reference n-gram statistics pooled over every reference sentence.
  std::vector<Counts> ref_counts(max_n + 1);
  long ref_words = 0;
  for (const EvalPair& p : pairs)
    for (const auto& r : p.references) {
      ref_words += static_cast<long>(r.size());
      for (int n = 1; n <= max_n; ++n) {
        Counts c = ngram_counts(r, n);
        for (const auto& [g, k] : c) ref_counts[n][g] += k;
      }
    }
  auto info = [&](const std::string& gram, int n) {
    auto it = ref_counts[n].find(gram);
    if (it == ref_counts[n].end() || it->second == 0) return 0.0;
    double prefix;
    if (n == 1) {
      prefix = static_cast<double>(ref_words);
    } else {
      const auto cut = gram.rfind('\x1f');
      auto pit = ref_counts[n - 1].find(gram.substr(0, cut));
      prefix = pit == ref_counts[n - 1].end() ? 0.0
                                              : static_cast<double>(pit->second);
    }
    if (prefix <= 0.0) return 0.0;
    return std::log2(prefix / it->second);
  };

  double score = 0.0;
  long hyp_len = 0;
  double mean_ref_len = 0.0;
  std::vector<double> info_sums(max_n + 1, 0.0);
  std::vector<double> hyp_totals(max_n + 1, 0.0);
  for (const EvalPair& p : pairs) {
    hyp_len += static_cast<long>(p.hypothesis.size());
    double mr = 0.0;
    for (const auto& r : p.references) mr += static_cast<double>(r.size());
    mean_ref_len += mr / p.references.size();
    for (int n = 1; n <= max_n; ++n) {
      Counts hyp = ngram_counts(p.hypothesis, n);
      Counts cap;
      for (const auto& r : p.references) {
        Counts rc = ngram_counts(r, n);
        for (const auto& [g, c] : rc) cap[g] = std::max(cap[g], c);
      }
      for (const auto& [g, c] : hyp) {
        hyp_totals[n] += c;
        auto it = cap.find(g);
        if (it != cap.end())
          info_sums[n] += std::min(c, it->second) * info(g, n);
      }
    }
  }
  for (int n = 1; n <= max_n; ++n)
    if (hyp_totals[n] > 0.0) score += info_sums[n] / hyp_totals[n];

  double brevity = 1.0;
  if (mean_ref_len > 0.0 && hyp_len < mean_ref_len) {
    if (hyp_len == 0) return 0.0;
    // beta chosen so the factor is 1/2 when the hypothesis is 2/3 the
    // average reference length.
    const double beta = std::log(0.5) / std::pow(std::log(2.0 / 3.0), 2.0);
    const double lr = std::log(static_cast<double>(hyp_len) / mean_ref_len);
    brevity = std::exp(beta * lr * lr);
  }
  return score * brevity;
}

double distinct(const std::vector<std::vector<std::string>>& hypotheses,
                int n) {
  if (n < 1 || n > 2) throw std::runtime_error("distinct order must be 1 or 2");
  Counts pooled;
  long total = 0;
  for (const auto& h : hypotheses) {
    Counts c = ngram_counts(h, n);
    for (const auto& [g, k] : c) {
      pooled[g] += k;
      total += k;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(pooled.size()) / static_cast<double>(total);
}

double entropy(const std::vector<std::vector<std::string>>& hypotheses, int n) {
  check_n(n);
  Counts pooled;
  long total = 0;
  for (const auto& h : hypotheses) {
    Counts c = ngram_counts(h, n);
    for (const auto& [g, k] : c) {
      pooled[g] += k;
      total += k;
    }
  }
  if (total == 0) return 0.0;
  double ent = 0.0;
  for (const auto& [g, k] : pooled) {
    const double p = static_cast<double>(k) / static_cast<double>(total);
    ent -= p * std::log(p);
  }
  return ent;
}

std::vector<std::pair<std::string, double>> full_report(
    const std::vector<EvalPair>& pairs) {
  std::vector<std::vector<std::string>> hyps;
  for (const EvalPair& p : pairs) hyps.push_back(p.hypothesis);
  std::vector<std::pair<std::string, double>> rows;
  for (int n = 1; n <= 4; ++n)
    rows.emplace_back("bleu-" + std::to_string(n), 100.0 * bleu(pairs, n));
  for (int n = 1; n <= 4; ++n)
    rows.emplace_back("nist-" + std::to_string(n), nist(pairs, n));
  for (int n = 1; n <= 2; ++n)
    rows.emplace_back("distinct-" + std::to_string(n), distinct(hyps, n));
  for (int n = 1; n <= 4; ++n)
    rows.emplace_back("entropy-" + std::to_string(n), entropy(hyps, n));
  return rows;
}

}  // namespace kgrg::metrics
