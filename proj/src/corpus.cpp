#include "kgrg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace kgrg {

namespace {

bool punctuation_only(const std::string& tok) {
  for (unsigned char c : tok)
    if (std::isalnum(c)) return false;
  return true;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> flatten_context(const std::vector<Utterance>& path,
                                 const Vocabulary& vocab) {
  if (path.empty()) throw std::runtime_error("empty context");
  std::vector<int> ids;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) ids.push_back(Vocabulary::kSep);
    for (const std::string& tok : path[i].tokens) ids.push_back(vocab.id(tok));
  }
  if (static_cast<int>(ids.size()) > kMaxContextTokens)
    ids.erase(ids.begin(), ids.end() - kMaxContextTokens);
  return ids;
}

std::vector<int> truncate_fact(const std::vector<std::string>& fact_tokens,
                               const Vocabulary& vocab) {
  std::vector<int> ids;
  const std::size_t n =
      std::min<std::size_t>(fact_tokens.size(), kMaxFactTokens);
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(vocab.id(fact_tokens[i]));
  return ids;
}

bool knowledge_filter(const std::vector<std::string>& response_tokens,
                      const std::vector<std::string>& fact_tokens,
                      const std::set<std::string>& stopwords) {
  std::unordered_set<std::string> resp_content;
  for (const std::string& t : response_tokens)
    if (!stopwords.count(t) && !punctuation_only(t)) resp_content.insert(t);
  for (const std::string& t : fact_tokens)
    if (resp_content.count(t) && !stopwords.count(t) && !punctuation_only(t))
      return true;
  return false;
}

bool length_filter(const std::vector<std::string>& response_tokens) {
  return !response_tokens.empty() &&
         static_cast<int>(response_tokens.size()) <= kMaxResponseTokens;
}

std::vector<ProcessedExample> prepare_dataset(
    const std::vector<Conversation>& conversations,
    const std::vector<FactSet>& factsets, const Vocabulary& vocab,
    const TopFactFn& top_fact, const std::set<std::string>& stopwords) {
  std::unordered_map<std::string, const FactSet*> facts_by_conv;
  for (const FactSet& fs : factsets) facts_by_conv[fs.conversation_id] = &fs;

  std::vector<ProcessedExample> out;
  for (const Conversation& conv : conversations) {
    auto fit = facts_by_conv.find(conv.id);
    if (fit == facts_by_conv.end())
      throw std::runtime_error("no fact set for conversation " + conv.id);
    const FactSet& fs = *fit->second;

    std::unordered_map<std::string, const Utterance*> by_id;
    for (const Utterance& u : conv.utterances) by_id[u.id] = &u;

    for (const Utterance& u : conv.utterances) {
      if (!u.parent_id) continue;  // roots have no response to model

      // Ancestor chain, root first.
      std::vector<Utterance> path;
      std::unordered_set<std::string> seen;
      const Utterance* cur = &u;
      while (cur->parent_id) {
        auto pit = by_id.find(*cur->parent_id);
        if (pit == by_id.end())
          throw std::runtime_error("dangling parent id " + *cur->parent_id +
                                   " in conversation " + conv.id);
        if (!seen.insert(pit->first).second)
          throw std::runtime_error("parent cycle in conversation " + conv.id);
        cur = pit->second;
        path.push_back(*cur);
      }
      std::reverse(path.begin(), path.end());

      std::vector<std::string> query;
      for (const Utterance& p : path)
        query.insert(query.end(), p.tokens.begin(), p.tokens.end());
      const int fact_idx = top_fact(fs.facts, query);
      const std::vector<std::string>& fact = fs.facts.at(fact_idx);

      if (!length_filter(u.tokens)) continue;
      if (!knowledge_filter(u.tokens, fact, stopwords)) continue;

      ProcessedExample ex;
      ex.context = flatten_context(path, vocab);
      ex.fact = truncate_fact(fact, vocab);
      ex.response = vocab.encode(u.tokens);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

// --- file formats -----------------------------------------------------------

std::vector<Conversation> load_conversations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read conversations file: " + path);
  std::vector<Conversation> convs;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 4)
      throw std::runtime_error("conversations file line " +
                               std::to_string(lineno) + ": expected 4 fields");
    Utterance u;
    u.id = fields[1];
    if (fields[2] != "-") u.parent_id = fields[2];
    u.tokens = tokenize(fields[3]);
    if (u.tokens.empty())
      throw std::runtime_error("conversations file line " +
                               std::to_string(lineno) + ": empty utterance");
    auto [it, fresh] = index.emplace(fields[0], convs.size());
    if (fresh) convs.push_back(Conversation{fields[0], {}});
    convs[it->second].utterances.push_back(std::move(u));
  }
  return convs;
}

std::vector<FactSet> load_facts(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read facts file: " + path);
  std::vector<FactSet> sets;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 2)
      throw std::runtime_error("facts file line " + std::to_string(lineno) +
                               ": expected 2 fields");
    auto tokens = tokenize(fields[1]);
    if (tokens.empty())
      throw std::runtime_error("facts file line " + std::to_string(lineno) +
                               ": empty fact");
    auto [it, fresh] = index.emplace(fields[0], sets.size());
    if (fresh) sets.push_back(FactSet{fields[0], {}});
    sets[it->second].facts.push_back(std::move(tokens));
  }
  return sets;
}

namespace {
void write_ids(std::ostream& os, const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    os << (i ? " " : "") << ids[i];
}

std::vector<int> parse_ids(const std::string& field) {
  std::vector<int> out;
  std::istringstream is(field);
  int v;
  while (is >> v) out.push_back(v);
  return out;
}
}  // namespace

void save_examples(const std::string& path,
                   const std::vector<ProcessedExample>& examples) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write examples file: " + path);
  for (const ProcessedExample& ex : examples) {
    write_ids(f, ex.context);
    f << "\t";
    write_ids(f, ex.fact);
    f << "\t";
    write_ids(f, ex.response);
    f << "\n";
  }
}

std::vector<ProcessedExample> load_examples(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read examples file: " + path);
  std::vector<ProcessedExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 3)
      throw std::runtime_error("examples file line " + std::to_string(lineno) +
                               ": expected 3 fields");
    out.push_back(ProcessedExample{parse_ids(fields[0]), parse_ids(fields[1]),
                                   parse_ids(fields[2])});
  }
  return out;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read stopwords file: " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    auto toks = tokenize(line);
    for (auto& t : toks) out.insert(t);
  }
  return out;
}

}  // namespace kgrg
