#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kgrg/metrics.hpp"

using namespace kgrg::metrics;

namespace {

std::vector<std::string> toks(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

EvalPair pair(const std::string& hyp, std::vector<std::string> refs) {
  EvalPair p;
  p.hypothesis = toks(hyp);
  for (const auto& r : refs) p.references.push_back(toks(r));
  return p;
}

// Frozen 10-pair fixture; the expected numbers below were computed offline
// with an independent high-precision implementation of the same formulas.
std::vector<EvalPair> fixture() {
  return {
      pair("the cat sat on the mat", {"the cat sat on the mat"}),
      pair("a quick brown fox jumps high",
           {"the quick brown fox jumps over the dog",
            "a quick brown fox leaps high"}),
      pair("he plays the guitar very well",
           {"he plays the guitar well", "he is playing the guitar very well"}),
      pair("rain falls on the green valley", {"rain falls on the valley floor"}),
      pair("she reads a book every night", {"she reads a good book every night"}),
      pair("the old bridge spans the river",
           {"the old bridge spans the wide river",
            "an old bridge crosses the river"}),
      pair("birds sing in the morning light",
           {"birds sing in the early morning light"}),
      pair("we walked along the sandy shore", {"we walked along the rocky shore"}),
      pair("the engine roared to life again", {"the engine roared back to life"}),
      pair("children laughed at the funny clown",
           {"the children laughed at the clown",
            "children laughed at the silly clown"}),
  };
}

std::vector<std::vector<std::string>> fixture_hyps() {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : fixture()) out.push_back(p.hypothesis);
  return out;
}

}  // namespace

TEST_CASE("frozen fixture values") {
  auto pairs = fixture();
  CHECK(bleu(pairs, 1) == doctest::Approx(0.91790669023350966).epsilon(1e-9));
  CHECK(bleu(pairs, 2) == doctest::Approx(0.83912652273116734).epsilon(1e-9));
  CHECK(bleu(pairs, 3) == doctest::Approx(0.75642444889769772).epsilon(1e-9));
  CHECK(bleu(pairs, 4) == doctest::Approx(0.65534521412222912).epsilon(1e-9));
  CHECK(nist(pairs, 1) == doctest::Approx(5.0254478590244532).epsilon(1e-9));
  CHECK(nist(pairs, 2) == doctest::Approx(5.5779097610986822).epsilon(1e-9));
  CHECK(nist(pairs, 3) == doctest::Approx(5.6765636721833660).epsilon(1e-9));
  CHECK(nist(pairs, 4) == doctest::Approx(5.7094483092115939).epsilon(1e-9));
  auto hyps = fixture_hyps();
  CHECK(distinct(hyps, 1) == doctest::Approx(0.81666666666666667).epsilon(1e-9));
  CHECK(distinct(hyps, 2) == doctest::Approx(0.98).epsilon(1e-9));
  CHECK(entropy(hyps, 1) == doctest::Approx(3.6643705680190967).epsilon(1e-9));
  CHECK(entropy(hyps, 2) == doctest::Approx(3.8842971182057482).epsilon(1e-9));
  CHECK(entropy(hyps, 3) == doctest::Approx(3.6888794541139363).epsilon(1e-9));
  CHECK(entropy(hyps, 4) == doctest::Approx(3.4011973816621554).epsilon(1e-9));
}

TEST_CASE("bleu of a corpus against itself is 1") {
  auto pairs = fixture();
  for (auto& p : pairs) p.references = {p.hypothesis};
  for (int n = 1; n <= 4; ++n)
    CHECK(bleu(pairs, n) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bleu basics") {
  // brevity penalty: hyp shorter than its only ref
  std::vector<EvalPair> p = {pair("the cat", {"the cat sat"})};
  CHECK(bleu(p, 1) == doctest::Approx(std::exp(1.0 - 3.0 / 2.0)).epsilon(1e-12));
  // clipping: "the the the" vs "the cat" -> 1 clipped match of 3
  std::vector<EvalPair> q = {pair("the the the", {"the cat"})};
  CHECK(bleu(q, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // unsmoothed zero-match corpus scores 0
  std::vector<EvalPair> z = {pair("aa bb", {"cc dd"})};
  CHECK(bleu(z, 1, false) == 0.0);
  CHECK(bleu(z, 1, true) > 0.0);
  // closest reference length, ties toward the shorter reference: picking
  // r=2 gives no brevity penalty, picking r=4 would give exp(1 - 4/3)
  std::vector<EvalPair> t = {pair("a b c", {"a b", "a b c d"})};
  CHECK(bleu(t, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(bleu({EvalPair{toks("a"), {}}}, 1), std::runtime_error);
  CHECK_THROWS_AS(bleu(fixture(), 5), std::runtime_error);
}

TEST_CASE("nist hand case") {
  // one pair: hyp = ref = "a a b"; pooled refs: count(a)=2, count(b)=1, N=3
  // info(a) = log2(3/2), info(b) = log2(3/1)
  // unigram score = (2*log2(1.5) + log2(3)) / 3; no brevity (equal lengths)
  std::vector<EvalPair> p = {pair("a a b", {"a a b"})};
  const double expect = (2.0 * std::log2(1.5) + std::log2(3.0)) / 3.0;
  CHECK(nist(p, 1) == doctest::Approx(expect).epsilon(1e-12));

  // bigram info uses the prefix count: info(a,a) = info(a,b) =
  // log2(count(a) / count(pair)) = log2(2/1) = 1, two matched bigrams
  const double expect2 = expect + (1.0 + 1.0) / 2.0;
  CHECK(nist(p, 2) == doctest::Approx(expect2).epsilon(1e-12));
}

TEST_CASE("nist brevity factor") {
  // hyp is 2/3 of the mean reference length -> factor exactly 1/2
  std::vector<EvalPair> q = {pair("x y", {"x y z"})};
  // pooled: count(x)=count(y)=count(z)=1, N=3 -> info = log2(3) each
  // unigram score = 2*log2(3)/2 = log2(3); brevity = 1/2 at ratio 2/3
  CHECK(nist(q, 1) == doctest::Approx(0.5 * std::log2(3.0)).epsilon(1e-12));
}

TEST_CASE("distinct and entropy basics") {
  CHECK(distinct({{"a", "a", "b"}}, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(distinct({{"a", "b"}, {"a", "b"}}, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(distinct({{}}, 1) == 0.0);
  // two equiprobable unigrams -> ln 2
  CHECK(entropy({{"a", "b"}}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(entropy({{"a", "a", "a"}}, 1) == doctest::Approx(0.0).epsilon(1e-12));
  // entropy is bounded by ln(total n-gram count)
  auto hyps = fixture_hyps();
  long total = 0;
  for (const auto& h : hyps) total += static_cast<long>(h.size());
  CHECK(entropy(hyps, 1) <= std::log(static_cast<double>(total)) + 1e-12);
  CHECK(distinct(hyps, 1) <= 1.0);
}

TEST_CASE("metrics are invariant to corpus pairing order") {
  auto pairs = fixture();
  auto reversed = pairs;
  std::reverse(reversed.begin(), reversed.end());
  for (int n = 1; n <= 4; ++n) {
    CHECK(bleu(pairs, n) == doctest::Approx(bleu(reversed, n)).epsilon(1e-12));
    CHECK(nist(pairs, n) == doctest::Approx(nist(reversed, n)).epsilon(1e-12));
  }
}

TEST_CASE("full report layout") {
  auto rows = full_report(fixture());
  REQUIRE(rows.size() == 14);
  CHECK(rows[0].first == "bleu-1");
  CHECK(rows[0].second == doctest::Approx(91.790669023350966).epsilon(1e-9));
  CHECK(rows[4].first == "nist-1");
  CHECK(rows[8].first == "distinct-1");
  CHECK(rows[10].first == "entropy-1");
  CHECK(rows[13].first == "entropy-4");
}
