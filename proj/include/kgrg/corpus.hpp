#ifndef KGRG_CORPUS_HPP
#define KGRG_CORPUS_HPP

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kgrg/vocab.hpp"

namespace kgrg {

constexpr int kMaxContextTokens = 100;
constexpr int kMaxFactTokens = 500;
constexpr int kMaxResponseTokens = 20;

struct Utterance {
  std::string id;
  std::optional<std::string> parent_id;
  std::vector<std::string> tokens;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
};

struct FactSet {
  std::string conversation_id;
  std::vector<std::vector<std::string>> facts;
};

struct ProcessedExample {
  std::vector<int> context;   // SEP-joined ancestor chain, last 100 tokens
  std::vector<int> fact;      // top-1 fact, first 500 tokens
  std::vector<int> response;  // <= 20 tokens
};

std::vector<std::string> tokenize(const std::string& text);

// Join utterances with <sep>, keep the last kMaxContextTokens ids.
std::vector<int> flatten_context(const std::vector<Utterance>& path,
                                 const Vocabulary& vocab);

std::vector<int> truncate_fact(const std::vector<std::string>& fact_tokens,
                               const Vocabulary& vocab);

// Keep iff response and fact share a content word (stopwords and
// punctuation-only tokens removed from both sides first).
bool knowledge_filter(const std::vector<std::string>& response_tokens,
                      const std::vector<std::string>& fact_tokens,
                      const std::set<std::string>& stopwords);

// Keep iff 1 <= |response| <= kMaxResponseTokens.
bool length_filter(const std::vector<std::string>& response_tokens);

// Picks the top-1 fact for a context query; wired to the tf-idf ranker.
using TopFactFn = std::function<int(
    const std::vector<std::vector<std::string>>& facts,
    const std::vector<std::string>& query)>;

// Every non-root utterance is a response candidate; its context is the full
// ancestor chain. Emits examples in conversation then utterance order.
std::vector<ProcessedExample> prepare_dataset(
    const std::vector<Conversation>& conversations,
    const std::vector<FactSet>& factsets, const Vocabulary& vocab,
    const TopFactFn& top_fact, const std::set<std::string>& stopwords);

// --- file formats -----------------------------------------------------------
// conversations: conv_id \t utt_id \t parent_id_or_dash \t space-joined tokens
// facts:         conv_id \t space-joined fact tokens (one fact per line)
// examples:      context_ids \t fact_ids \t response_ids (space-joined)

std::vector<Conversation> load_conversations(const std::string& path);
std::vector<FactSet> load_facts(const std::string& path);
void save_examples(const std::string& path,
                   const std::vector<ProcessedExample>& examples);
std::vector<ProcessedExample> load_examples(const std::string& path);
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace kgrg

#endif  // KGRG_CORPUS_HPP
