// Command-line surface for the knowledge-grounded response generator:
// preprocess -> train -> generate -> evaluate, plus an interactive chat loop.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kgrg/config.hpp"
#include "kgrg/corpus.hpp"
#include "kgrg/cvae.hpp"
#include "kgrg/metrics.hpp"
#include "kgrg/model.hpp"
#include "kgrg/retrieval.hpp"
#include "kgrg/training.hpp"

namespace {

using namespace kgrg;

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* v = std::getenv("KGRG_LOG");
  if (!v) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "quiet") return LogLevel::kQuiet;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << msg << "\n";
}

// Shared config/override plumbing: defaults < --config file < explicit flags.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;  // raw key=value overrides
  std::string attention;
  bool cvae = false;
  int beam_size = -1;
  long seed = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", sets,
                    "extra config override, key=value (repeatable); keys: "
                    "attention cvae latent_dim kl_ramp_steps z_injection "
                    "hidden_size embed_size beam_width max_context_tokens "
                    "max_fact_tokens max_response_tokens seed learning_rate "
                    "batch_size train_steps checkpoint_every min_count "
                    "grad_clip_norm length_normalize freeze_embeddings");
    cmd->add_option("--attention", attention,
                    "baseline|context-only|parallel|context-guided");
    cmd->add_flag("--cvae", cvae, "enable the variational latent path");
    cmd->add_option("--beam-size", beam_size, "beam width (default 8)");
    cmd->add_option("--seed", seed, "master random seed");
  }

  Config resolve(const CLI::App* cmd) const {
    Config cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("--set expects key=value, got: " + kv);
      apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (cmd->count("--attention")) apply_config_entry(cfg, "attention", attention);
    if (cmd->count("--cvae")) cfg.cvae = true;
    if (cmd->count("--beam-size")) cfg.beam_width = beam_size;
    if (cmd->count("--seed")) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.validate();
    log_info("config: " + cfg.fingerprint() + " seed=" +
             std::to_string(cfg.seed) + " beam=" + std::to_string(cfg.beam_width));
    return cfg;
  }
};

std::vector<std::vector<std::string>> read_sentence_file(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read file: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(f, line)) out.push_back(tokenize(line));
  return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s.push_back(' ');
    s += toks[i];
  }
  return s;
}

int run_preprocess(const Config& cfg, const std::string& conversations_path,
                   const std::string& facts_path,
                   const std::string& stopwords_path,
                   const std::string& out_examples,
                   const std::string& out_vocab) {
  auto conversations = load_conversations(conversations_path);
  auto factsets = load_facts(facts_path);
  auto stopwords = load_stopwords(stopwords_path);

  std::vector<std::string> stream;
  for (const auto& c : conversations)
    for (const auto& u : c.utterances)
      stream.insert(stream.end(), u.tokens.begin(), u.tokens.end());
  for (const auto& fs : factsets)
    for (const auto& fact : fs.facts)
      stream.insert(stream.end(), fact.begin(), fact.end());
  Vocabulary vocab = Vocabulary::build(stream, cfg.min_count);

  auto top_fact = [](const std::vector<std::vector<std::string>>& facts,
                     const std::vector<std::string>& query) {
    return TfIdfIndex::build(facts).top1(query);
  };
  auto examples =
      prepare_dataset(conversations, factsets, vocab, top_fact, stopwords);

  vocab.save(out_vocab);
  save_examples(out_examples, examples);
  log_info("preprocess: " + std::to_string(examples.size()) + " examples, vocab " +
           std::to_string(vocab.size()));
  return 0;
}

int run_train(const Config& cfg, const std::string& examples_path,
              const std::string& vocab_path, const std::string& checkpoint_path,
              bool resume) {
  auto examples = load_examples(examples_path);
  Vocabulary vocab = Vocabulary::load(vocab_path);

  Rng init_rng = Rng::stream(cfg.seed, "init");
  model::ModelParameters params = model::init_params(cfg, vocab.size(), init_rng);
  train::Trainer trainer(params, cfg);
  int steps = cfg.train_steps;
  if (resume) {
    train::Checkpoint ck = train::load_checkpoint(checkpoint_path, cfg);
    params = std::move(ck.params);
    train::Trainer resumed(params, cfg);
    resumed.restore(std::move(ck.adam), ck.step, ck.rng_state);
    steps = cfg.train_steps - static_cast<int>(ck.step);
    if (steps <= 0) {
      log_info("train: checkpoint already at step " + std::to_string(ck.step));
      return 0;
    }
    resumed.run(examples, steps, checkpoint_path,
                log_level() >= LogLevel::kInfo ? &std::cerr : nullptr);
    return 0;
  }
  trainer.run(examples, steps, checkpoint_path,
              log_level() >= LogLevel::kInfo ? &std::cerr : nullptr);
  return 0;
}

int run_generate(const Config& cfg, const std::string& examples_path,
                 const std::string& vocab_path,
                 const std::string& checkpoint_path,
                 const std::string& out_path) {
  auto examples = load_examples(examples_path);
  Vocabulary vocab = Vocabulary::load(vocab_path);
  train::Checkpoint ck = train::load_checkpoint(checkpoint_path, cfg);
  Rng sample_rng = Rng::stream(cfg.seed, "sample");

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write hypotheses file: " + out_path);
  for (const ProcessedExample& ex : examples) {
    std::optional<std::vector<double>> z;
    if (cfg.cvae) z = cvae::sample_prior(sample_rng, cfg.latent_dim);
    auto ids = model::generate_response(ex.context, ex.fact, ck.params,
                                        std::move(z), cfg.beam_width,
                                        cfg.max_response_tokens,
                                        cfg.length_normalize);
    out << join_tokens(vocab.decode(ids)) << "\n";
  }
  log_info("generate: wrote " + std::to_string(examples.size()) +
           " hypotheses to " + out_path);
  return 0;
}

int run_evaluate(const std::string& hyp_path,
                 const std::vector<std::string>& ref_paths,
                 const std::string& out_path) {
  auto hyps = read_sentence_file(hyp_path);
  std::vector<std::vector<std::vector<std::string>>> refs;
  for (const std::string& rp : ref_paths) {
    refs.push_back(read_sentence_file(rp));
    if (refs.back().size() != hyps.size())
      throw std::runtime_error("reference file " + rp + " has " +
                               std::to_string(refs.back().size()) +
                               " lines, hypotheses have " +
                               std::to_string(hyps.size()));
  }
  std::vector<metrics::EvalPair> pairs;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    metrics::EvalPair p;
    p.hypothesis = hyps[i];
    for (const auto& r : refs) p.references.push_back(r[i]);
    pairs.push_back(std::move(p));
  }
  std::ostringstream table;
  table << std::setprecision(6) << std::fixed;
  for (const auto& [name, value] : metrics::full_report(pairs))
    table << name << "\t" << value << "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << table.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write metrics file: " + out_path);
    out << table.str();
  }
  return 0;
}

void print_attention_summary(const model::ModelParameters& params,
                             const model::EncodedExample& enc) {
  ad::Tape tape;
  tape.set_enabled(false);
  auto summarize = [](const char* name, const ad::Tensor& dist) {
    int best = 0;
    for (int i = 1; i < dist.numel(); ++i)
      if (dist.values()[i] > dist.values()[best]) best = i;
    std::cout << "  " << name << ": peak position " << best << " (weight "
              << std::setprecision(3) << dist.values()[best] << ")\n";
  };
  ad::Tape t2;
  t2.set_enabled(false);
  model::DecoderState s0 = model::init_decoder_state(t2, enc.h_c, params);
  switch (params.config.attention) {
    case attn::Variant::kBaseline:
      std::cout << "  (baseline model attends to nothing)\n";
      break;
    case attn::Variant::kContextOnly: {
      auto out = attn::context_only(t2, s0.top(), enc.h_c, params.attn_c);
      summarize("alpha", out.alpha);
      break;
    }
    case attn::Variant::kParallel: {
      auto out = attn::parallel(t2, s0.top(), enc.h_c, *enc.h_f, params.attn_c,
                                params.attn_f);
      summarize("alpha", out.alpha);
      summarize("beta", *out.beta);
      break;
    }
    case attn::Variant::kContextGuided: {
      auto out = attn::context_guided(t2, s0.top(), enc.h_c, *enc.h_f,
                                      *enc.beta_prior, params.attn_c,
                                      params.attn_o);
      summarize("alpha", out.alpha);
      summarize("beta", *out.beta);
      summarize("beta_prior", *out.beta_prior);
      break;
    }
  }
}

int run_chat(const Config& cfg, const std::string& vocab_path,
             const std::string& checkpoint_path, const std::string& facts_path) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  train::Checkpoint ck = train::load_checkpoint(checkpoint_path, cfg);
  auto factsets = load_facts(facts_path);
  std::vector<std::vector<std::string>> pool;
  for (const auto& fs : factsets)
    pool.insert(pool.end(), fs.facts.begin(), fs.facts.end());
  if (pool.empty()) throw std::runtime_error("facts file has no facts");
  TfIdfIndex index = TfIdfIndex::build(pool);
  Rng sample_rng = Rng::stream(cfg.seed, "sample");

  std::cout << "enter a context line (empty line or EOF quits)\n";
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    auto query = tokenize(line);
    if (query.empty()) break;
    const int best = index.top1(query);
    std::cout << "fact: " << join_tokens(pool[best]) << "\n";

    std::vector<int> context_ids = vocab.encode(query);
    if (static_cast<int>(context_ids.size()) > cfg.max_context_tokens)
      context_ids.erase(context_ids.begin(),
                        context_ids.end() - cfg.max_context_tokens);
    std::vector<int> fact_ids = vocab.encode(pool[best]);
    if (static_cast<int>(fact_ids.size()) > cfg.max_fact_tokens)
      fact_ids.resize(cfg.max_fact_tokens);

    std::optional<std::vector<double>> z;
    if (cfg.cvae) z = cvae::sample_prior(sample_rng, cfg.latent_dim);
    auto ids = model::generate_response(context_ids, fact_ids, ck.params,
                                        std::move(z), cfg.beam_width,
                                        cfg.max_response_tokens,
                                        cfg.length_normalize);
    std::cout << "response: " << join_tokens(vocab.decode(ids)) << "\n";
    ad::Tape tape;
    tape.set_enabled(false);
    model::EncodedExample enc =
        model::encode_example(tape, context_ids, fact_ids, ck.params);
    print_attention_summary(ck.params, enc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-grounded dialogue response generator"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand(
      "preprocess", "build vocabulary and model-ready examples from raw files");
  ConfigArgs pre_cfg;
  pre_cfg.attach(pre);
  std::string conversations_path, facts_path, out_examples, out_vocab;
  std::string stopwords_path = "data/stopwords.txt";
  pre->add_option("--conversations", conversations_path,
                  "conversations file (conv_id\\tutt_id\\tparent\\ttokens)")
      ->required();
  pre->add_option("--facts", facts_path, "facts file (conv_id\\ttokens)")
      ->required();
  pre->add_option("--stopwords", stopwords_path, "stopword list, one per line");
  pre->add_option("--out-examples", out_examples, "output examples file")
      ->required();
  pre->add_option("--out-vocab", out_vocab, "output vocabulary file")
      ->required();

  // train
  auto* tr = app.add_subcommand("train", "teacher-forced training with adam");
  ConfigArgs tr_cfg;
  tr_cfg.attach(tr);
  std::string examples_path, vocab_path, checkpoint_path;
  bool resume = false;
  tr->add_option("--examples", examples_path, "training examples file")
      ->required();
  tr->add_option("--vocab", vocab_path, "vocabulary file")->required();
  tr->add_option("--checkpoint", checkpoint_path, "checkpoint path (written)")
      ->required();
  tr->add_flag("--resume", resume, "resume from the checkpoint if present");

  // generate
  auto* gen = app.add_subcommand("generate",
                                 "batch beam-search decoding of a test file");
  ConfigArgs gen_cfg;
  gen_cfg.attach(gen);
  std::string gen_examples, gen_vocab, gen_checkpoint, gen_out;
  gen->add_option("--examples", gen_examples, "test examples file")->required();
  gen->add_option("--vocab", gen_vocab, "vocabulary file")->required();
  gen->add_option("--checkpoint", gen_checkpoint, "trained checkpoint")
      ->required();
  gen->add_option("--out", gen_out, "hypotheses output file")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate",
                                "corpus metrics over hypothesis/reference files");
  std::string hyp_path, metrics_out;
  std::vector<std::string> ref_paths;
  ev->add_option("--hyp", hyp_path, "hypotheses, one sentence per line")
      ->required();
  ev->add_option("--ref", ref_paths,
                 "reference file (repeat for multiple references)")
      ->required();
  ev->add_option("--out", metrics_out, "metric table output (default stdout)");

  // chat
  auto* ch = app.add_subcommand("chat", "interactive console loop");
  ConfigArgs ch_cfg;
  ch_cfg.attach(ch);
  std::string ch_vocab, ch_checkpoint, ch_facts;
  ch->add_option("--vocab", ch_vocab, "vocabulary file")->required();
  ch->add_option("--checkpoint", ch_checkpoint, "trained checkpoint")
      ->required();
  ch->add_option("--facts", ch_facts, "facts file to retrieve from")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed())
      return run_preprocess(pre_cfg.resolve(pre), conversations_path,
                            facts_path, stopwords_path, out_examples,
                            out_vocab);
    if (tr->parsed())
      return run_train(tr_cfg.resolve(tr), examples_path, vocab_path,
                       checkpoint_path, resume);
    if (gen->parsed())
      return run_generate(gen_cfg.resolve(gen), gen_examples, gen_vocab,
                          gen_checkpoint, gen_out);
    if (ev->parsed()) return run_evaluate(hyp_path, ref_paths, metrics_out);
    if (ch->parsed())
      return run_chat(ch_cfg.resolve(ch), ch_vocab, ch_checkpoint, ch_facts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
