#include "kgrg/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kgrg {

TfIdfIndex TfIdfIndex::build(const std::vector<std::vector<std::string>>& facts) {
  if (facts.empty()) throw std::runtime_error("tf-idf index needs at least one fact");
  TfIdfIndex idx;
  idx.doc_count_ = static_cast<int>(facts.size());
  for (const auto& fact : facts) {
    std::map<std::string, int> tf;
    for (const std::string& t : fact) ++tf[t];
    for (const auto& [t, c] : tf) ++idx.df_[t];
    idx.fact_vectors_.emplace_back();
    for (const auto& [t, c] : tf) idx.fact_vectors_.back()[t] = c;  // idf later
  }
  for (auto& vec : idx.fact_vectors_) {
    double norm2 = 0.0;
    for (auto& [t, w] : vec) {
      w *= idx.idf(t);
      norm2 += w * w;
    }
    idx.fact_norms_.push_back(std::sqrt(norm2));
  }
  return idx;
}

double TfIdfIndex::idf(const std::string& token) const {
  auto it = df_.find(token);
  const int df = it == df_.end() ? 0 : it->second;
  return std::log((1.0 + doc_count_) / (1.0 + df)) + 1.0;
}

std::vector<std::pair<int, double>> TfIdfIndex::rank(
    const std::vector<std::string>& query) const {
  std::map<std::string, int> qtf;
  for (const std::string& t : query) ++qtf[t];
  std::map<std::string, double> qvec;
  double qnorm2 = 0.0;
  for (const auto& [t, c] : qtf) {
    const double w = c * idf(t);
    qvec[t] = w;
    qnorm2 += w * w;
  }
  const double qnorm = std::sqrt(qnorm2);

  std::vector<std::pair<int, double>> scored;
  for (int i = 0; i < fact_count(); ++i) {
    double dot = 0.0;
    for (const auto& [t, w] : qvec) {
      auto it = fact_vectors_[i].find(t);
      if (it != fact_vectors_[i].end()) dot += w * it->second;
    }
    const double denom = qnorm * fact_norms_[i];
    scored.emplace_back(i, denom > 0.0 ? dot / denom : 0.0);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return scored;
}

}  // namespace kgrg
