#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kgrg/config.hpp"

using namespace kgrg;
namespace fs = std::filesystem;

namespace {

const std::string kBin = std::string(KGRG_BIN_DIR) + "/kgrg";
const std::string kDataDir = KGRG_DATA_DIR;
const fs::path kTmp = fs::path("cli_test_work");

int run(const std::string& args) {
  const std::string cmd = "KGRG_LOG=quiet " + kBin + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

struct Workspace {
  Workspace() {
    fs::remove_all(kTmp);
    fs::create_directories(kTmp);
  }
  fs::path operator/(const std::string& name) const { return kTmp / name; }
};

std::string common_inputs() {
  return " --conversations " + kDataDir + "/pipeline50/conversations.tsv" +
         " --facts " + kDataDir + "/pipeline50/facts.tsv" + " --stopwords " +
         kDataDir + "/stopwords.txt";
}

}  // namespace

TEST_CASE("config file parsing and overrides") {
  Workspace ws;
  const fs::path cfg_path = ws / "run.cfg";
  write_file(cfg_path,
             "# comment line\n"
             "attention = parallel\n"
             "beam_width = 3\n"
             "seed = 42\n"
             "\n"
             "learning_rate = 0.005\n");
  Config cfg = parse_config_file(cfg_path.string());
  CHECK(cfg.attention == attn::Variant::kParallel);
  CHECK(cfg.beam_width == 3);
  CHECK(cfg.seed == 42);
  CHECK(cfg.learning_rate == doctest::Approx(0.005));

  apply_config_entry(cfg, "beam_width", "5");
  CHECK(cfg.beam_width == 5);
  apply_config_entry(cfg, "cvae", "true");
  CHECK(cfg.cvae);
  apply_config_entry(cfg, "z_injection", "init-only");
  CHECK(cfg.z_injection == ZInjection::kInitOnly);

  CHECK_THROWS_WITH_AS(apply_config_entry(cfg, "no_such_key", "1"),
                       doctest::Contains("no_such_key"), std::runtime_error);
  CHECK_THROWS_AS(apply_config_entry(cfg, "beam_width", "banana"),
                  std::runtime_error);

  write_file(cfg_path, "attention = parallel\nbogus_key = 1\n");
  CHECK_THROWS_WITH_AS(parse_config_file(cfg_path.string()),
                       doctest::Contains("bogus_key"), std::runtime_error);

  Config bad;
  bad.hidden_size = 64;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = Config{};
  bad.embed_size = 50;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = Config{};
  bad.beam_width = 0;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
}

TEST_CASE("config fingerprint tracks the generation-relevant settings") {
  Config a, b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.attention = attn::Variant::kBaseline;
  CHECK(a.fingerprint() != b.fingerprint());
  b = Config{};
  b.cvae = true;
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("full pipeline runs and is byte-identical across reruns") {
  Workspace ws;
  const std::string train_opts =
      " --set train_steps=20 --set batch_size=4 --set checkpoint_every=20"
      " --attention baseline --seed 7";

  for (int round = 0; round < 2; ++round) {
    const std::string tag = std::to_string(round);
    REQUIRE(run("preprocess" + common_inputs() + " --out-examples " +
                (ws / ("ex" + tag + ".tsv")).string() + " --out-vocab " +
                (ws / ("vocab" + tag + ".txt")).string() + " --seed 7") == 0);
    REQUIRE(run("train --examples " + (ws / ("ex" + tag + ".tsv")).string() +
                " --vocab " + (ws / ("vocab" + tag + ".txt")).string() +
                " --checkpoint " + (ws / ("ckpt" + tag + ".txt")).string() +
                train_opts) == 0);
    REQUIRE(run("generate --examples " + (ws / ("ex" + tag + ".tsv")).string() +
                " --vocab " + (ws / ("vocab" + tag + ".txt")).string() +
                " --checkpoint " + (ws / ("ckpt" + tag + ".txt")).string() +
                " --out " + (ws / ("hyp" + tag + ".txt")).string() +
                " --set batch_size=4 --attention baseline --seed 7"
                " --beam-size 4") == 0);
  }

  // nonempty artifacts at every stage
  CHECK(fs::file_size(ws / "ex0.tsv") > 0);
  CHECK(fs::file_size(ws / "vocab0.txt") > 0);
  CHECK(fs::file_size(ws / "ckpt0.txt") > 0);
  CHECK(fs::file_size(ws / "hyp0.txt") > 0);

  // byte-identical between the two rounds
  CHECK(slurp(ws / "ex0.tsv") == slurp(ws / "ex1.tsv"));
  CHECK(slurp(ws / "vocab0.txt") == slurp(ws / "vocab1.txt"));
  CHECK(slurp(ws / "ckpt0.txt") == slurp(ws / "ckpt1.txt"));
  CHECK(slurp(ws / "hyp0.txt") == slurp(ws / "hyp1.txt"));

  // evaluate the hypotheses against the fixture references (themselves)
  REQUIRE(run("evaluate --hyp " + (ws / "hyp0.txt").string() + " --ref " +
              (ws / "hyp0.txt").string() + " --out " +
              (ws / "metrics.txt").string()) == 0);
  const std::string table = slurp(ws / "metrics.txt");
  CHECK(table.find("bleu-1\t") != std::string::npos);
  CHECK(table.find("nist-4\t") != std::string::npos);
  CHECK(table.find("entropy-4\t") != std::string::npos);
  fs::remove_all(kTmp);
}

TEST_CASE("evaluate scores identical files at bleu 100") {
  Workspace ws;
  write_file(ws / "h.txt", "the cat sat on the mat\nbirds sing loud at dawn\n");
  write_file(ws / "r.txt", "the cat sat on the mat\nbirds sing loud at dawn\n");
  REQUIRE(run("evaluate --hyp " + (ws / "h.txt").string() + " --ref " +
              (ws / "r.txt").string() + " --out " + (ws / "m.txt").string()) ==
          0);
  const std::string table = slurp(ws / "m.txt");
  CHECK(table.find("bleu-1\t100.000000") != std::string::npos);
  CHECK(table.find("bleu-4\t100.000000") != std::string::npos);

  // mismatched line counts are an error
  write_file(ws / "r2.txt", "only one line\n");
  CHECK(run("evaluate --hyp " + (ws / "h.txt").string() + " --ref " +
            (ws / "r2.txt").string()) != 0);
  fs::remove_all(kTmp);
}

TEST_CASE("bad inputs exit nonzero") {
  Workspace ws;
  CHECK(run("preprocess --conversations missing.tsv --facts missing.tsv"
            " --out-examples x --out-vocab y") != 0);
  CHECK(run("train --examples missing.tsv --vocab missing.txt --checkpoint c") !=
        0);
  CHECK(run("generate --examples missing.tsv --vocab missing.txt"
            " --checkpoint missing.ckpt --out h.txt") != 0);
  CHECK(run("nonsense-subcommand") != 0);
  CHECK(run("preprocess" + common_inputs() + " --out-examples " +
            (ws / "e.tsv").string() + " --out-vocab " +
            (ws / "v.txt").string() + " --set hidden_size=64") != 0);
  fs::remove_all(kTmp);
}
