#ifndef KGRG_VOCAB_HPP
#define KGRG_VOCAB_HPP

#include <string>
#include <unordered_map>
#include <vector>

namespace kgrg {

// Token table with fixed reserved ids 0..4.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSep = 4;
  static constexpr int kNumReserved = 5;

  Vocabulary();

  // Tokens with frequency >= min_count, ids by descending frequency,
  // ties lexicographic. Reserved tokens always present.
  static Vocabulary build(const std::vector<std::string>& stream,
                          int min_count);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  void add(const std::string& token);
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace kgrg

#endif  // KGRG_VOCAB_HPP
