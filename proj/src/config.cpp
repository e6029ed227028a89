#include "kgrg/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgrg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void entry_error(const std::string& key, int lineno,
                              const std::string& what) {
  std::ostringstream os;
  os << "config key '" << key << "'";
  if (lineno >= 0) os << " (line " << lineno << ")";
  os << ": " << what;
  throw std::runtime_error(os.str());
}

long parse_int(const std::string& key, const std::string& v, int lineno) {
  try {
    std::size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    entry_error(key, lineno, "not an integer: '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v, int lineno) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    entry_error(key, lineno, "not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v, int lineno) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  entry_error(key, lineno, "not a boolean: '" + v + "'");
}

}  // namespace

void Config::validate() const {
  if (hidden_size != 128) throw std::runtime_error("hidden_size is fixed at 128");
  if (embed_size != 100) throw std::runtime_error("embed_size is fixed at 100");
  if (max_context_tokens != 100 || max_fact_tokens != 500 ||
      max_response_tokens != 20)
    throw std::runtime_error("sequence caps are fixed at 100/500/20");
  if (latent_dim < 1) throw std::runtime_error("latent_dim must be positive");
  if (kl_ramp_steps < 1) throw std::runtime_error("kl_ramp_steps must be >= 1");
  if (beam_width < 1) throw std::runtime_error("beam_width must be >= 1");
  if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (learning_rate <= 0) throw std::runtime_error("learning_rate must be > 0");
  if (min_count < 1) throw std::runtime_error("min_count must be >= 1");
}

std::string Config::fingerprint() const {
  std::ostringstream os;
  os << "attention=" << attn::to_string(attention) << " cvae=" << cvae
     << " latent_dim=" << latent_dim << " kl_ramp_steps=" << kl_ramp_steps
     << " z_injection="
     << (z_injection == ZInjection::kPerStep ? "per-step" : "init-only")
     << " hidden=" << hidden_size << " embed=" << embed_size
     << " lr=" << learning_rate << " batch=" << batch_size
     << " clip=" << grad_clip_norm << " freeze_emb=" << freeze_embeddings;
  return os.str();
}

void apply_config_entry(Config& cfg, const std::string& key,
                        const std::string& value, int lineno) {
  if (key == "attention") {
    try {
      cfg.attention = attn::variant_from_string(value);
    } catch (const std::exception& e) {
      entry_error(key, lineno, e.what());
    }
  } else if (key == "cvae") {
    cfg.cvae = parse_bool(key, value, lineno);
  } else if (key == "latent_dim") {
    cfg.latent_dim = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "kl_ramp_steps") {
    cfg.kl_ramp_steps = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "z_injection") {
    if (value == "per-step") cfg.z_injection = ZInjection::kPerStep;
    else if (value == "init-only") cfg.z_injection = ZInjection::kInitOnly;
    else entry_error(key, lineno, "expected per-step or init-only");
  } else if (key == "hidden_size") {
    cfg.hidden_size = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "embed_size") {
    cfg.embed_size = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "beam_width") {
    cfg.beam_width = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "max_context_tokens") {
    cfg.max_context_tokens = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "max_fact_tokens") {
    cfg.max_fact_tokens = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "max_response_tokens") {
    cfg.max_response_tokens = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value, lineno));
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_double(key, value, lineno);
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "train_steps") {
    cfg.train_steps = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "checkpoint_every") {
    cfg.checkpoint_every = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "min_count") {
    cfg.min_count = static_cast<int>(parse_int(key, value, lineno));
  } else if (key == "grad_clip_norm") {
    cfg.grad_clip_norm = parse_double(key, value, lineno);
  } else if (key == "length_normalize") {
    cfg.length_normalize = parse_bool(key, value, lineno);
  } else if (key == "freeze_embeddings") {
    cfg.freeze_embeddings = parse_bool(key, value, lineno);
  } else {
    entry_error(key, lineno, "unknown key");
  }
}

Config parse_config_file(const std::string& path, Config base) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    apply_config_entry(base, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)), lineno);
  }
  return base;
}

}  // namespace kgrg
