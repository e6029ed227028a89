#ifndef KGRG_RETRIEVAL_HPP
#define KGRG_RETRIEVAL_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kgrg {

// TF-IDF ranker over one conversation's candidate facts.
// tf = raw count, idf = ln((1+D)/(1+df)) + 1, score = cosine similarity.
class TfIdfIndex {
 public:
  static TfIdfIndex build(const std::vector<std::vector<std::string>>& facts);

  double idf(const std::string& token) const;
  int fact_count() const { return static_cast<int>(fact_vectors_.size()); }

  // (fact_index, cosine score) sorted by score descending, ties by lower
  // fact index. All-zero query yields all-zero scores in fact order.
  std::vector<std::pair<int, double>> rank(
      const std::vector<std::string>& query) const;

  int top1(const std::vector<std::string>& query) const {
    return rank(query).front().first;
  }

 private:
  int doc_count_ = 0;
  std::map<std::string, int> df_;
  // Per fact: token -> tf*idf weight, plus the vector norm.
  std::vector<std::map<std::string, double>> fact_vectors_;
  std::vector<double> fact_norms_;
};

}  // namespace kgrg

#endif  // KGRG_RETRIEVAL_HPP
