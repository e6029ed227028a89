#include "kgrg/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace kgrg {

namespace {
const char* kReserved[] = {"<pad>", "<unk>", "<bos>", "<eos>", "<sep>"};
}

Vocabulary::Vocabulary() {
  for (const char* r : kReserved) add(r);
}

void Vocabulary::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& stream,
                             int min_count) {
  if (min_count < 1) throw std::runtime_error("min_count must be >= 1");
  std::map<std::string, long> counts;  // ordered map fixes the tie order
  for (const std::string& tok : stream) ++counts[tok];
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= min_count) kept.emplace_back(tok, c);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, c] : kept)
    if (!v.contains(tok)) v.add(tok);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::runtime_error("vocabulary id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const std::string& t : id_to_token_) f << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int idx = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (idx < kNumReserved) {
      if (line != kReserved[idx])
        throw std::runtime_error("vocabulary file has wrong reserved token at id " +
                                 std::to_string(idx));
    } else {
      v.add(line);
    }
    ++idx;
  }
  return v;
}

}  // namespace kgrg
