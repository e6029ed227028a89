#ifndef KGRG_METRICS_HPP
#define KGRG_METRICS_HPP

#include <string>
#include <vector>

namespace kgrg::metrics {

struct EvalPair {
  std::vector<std::string> hypothesis;
  std::vector<std::vector<std::string>> references;  // at least one
};

// Corpus-level BLEU-max_n in [0,1]: clipped modified n-gram precision with
// uniform 1/max_n weights and brevity penalty exp(min(0, 1 - r/c)).
// r uses the closest reference length per segment (shorter wins ties).
// smooth adds 1e-9 to zero match counts so the geometric mean stays defined.
double bleu(const std::vector<EvalPair>& pairs, int max_n, bool smooth = true);

// NIST-max_n >= 0 with information weights from pooled reference statistics:
// info(w1..wn) = log2(count(w1..w{n-1}) / count(w1..wn)).
double nist(const std::vector<EvalPair>& pairs, int max_n);

// Unique n-grams over total n-grams, pooled across hypotheses.
double distinct(const std::vector<std::vector<std::string>>& hypotheses, int n);

// Natural-log entropy of the pooled empirical n-gram distribution.
double entropy(const std::vector<std::vector<std::string>>& hypotheses, int n);

// Table rows (metric name, value) for BLEU-1..4 (x100), NIST-1..4,
// distinct-1/2 and entropy-1..4.
std::vector<std::pair<std::string, double>> full_report(
    const std::vector<EvalPair>& pairs);

}  // namespace kgrg::metrics

#endif  // KGRG_METRICS_HPP
