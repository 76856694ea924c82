#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "ensemblage/metrics.hpp"
#include "ensemblage/random.hpp"

using namespace ensemblage;
using namespace ensemblage::metrics;
using V = std::vector<std::string>;

namespace {

const std::string kFixture =
    std::string(ENSEMBLAGE_SOURCE_DIR) + "/tests/fixtures/diversity_fixture.jsonl";

std::vector<Corpus> fixture() {
  std::ifstream in(kFixture);
  REQUIRE(in);
  return read_jsonl(in);
}

Corpus pooled(const std::vector<Corpus>& parts) {
  Corpus c{"pooled", {}};
  for (const auto& p : parts) c.documents.insert(c.documents.end(), p.documents.begin(), p.documents.end());
  return c;
}

// Independent counter: joins each n-gram into one string and compares
// against every n-gram already seen.
double naive_ttr(const Corpus& c, int n) {
  std::vector<std::string> grams;
  for (const auto& d : c.documents) {
    auto t = tokenize(d);
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      std::string g;
      for (int k = 0; k < n; ++k) g += t[i + k] + '\x1f';
      grams.push_back(g);
    }
  }
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < grams.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i && !seen; ++j) seen = grams[j] == grams[i];
    if (!seen) ++distinct;
  }
  return double(distinct) / double(grams.size());
}

// Mean TTR of random 42-token samples drawn without replacement.
double monte_carlo_hdd(const Corpus& c, int samples, std::uint64_t seed, std::size_t s = 42) {
  std::vector<std::string> tokens;
  for (const auto& d : c.documents) {
    for (auto& t : tokenize(d)) tokens.push_back(std::move(t));
  }
  Rng rng(seed);
  double sum = 0;
  for (int k = 0; k < samples; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      std::swap(tokens[i], tokens[i + uniform_index(rng, tokens.size() - i)]);
    }
    std::set<std::string> distinct(tokens.begin(), tokens.begin() + s);
    sum += double(distinct.size()) / double(s);
  }
  return sum / samples;
}

Corpus words(const std::vector<std::string>& tokens) {
  std::string text;
  for (const auto& t : tokens) text += t + " ";
  return {"c", {text}};
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("The cat, the CAT!") == V{"the", "cat", "the", "cat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("well-known sites") == V{"well-known", "sites"});
  CHECK(tokenize("don't -stop- 'quoted' end-") == V{"don't", "stop", "quoted", "end"});
  CHECK(tokenize("a--b x''y") == V{"a", "b", "x", "y"});
  CHECK(tokenize("Café  naïve\tline\nbreak") == V{"café", "naïve", "line", "break"});
  CHECK(tokenize("$100, 3.5%") == V{"100", "3", "5"});
}

TEST_CASE("ttr") {
  CHECK(ttr(words({"a", "b", "a", "b"}), 1) == 0.5);
  CHECK(ttr(words({"a", "b", "c", "d"}), 1) == 1.0);
  CHECK(ttr(words({"a", "b", "a", "b"}), 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // n-grams never span documents.
  Corpus split{"s", {"a b", "c d"}};
  CHECK(ngram_counts(split, 2).size() == 2);
  CHECK_THROWS_AS(ttr(Corpus{"e", {}}, 1), Error);
  try {
    ttr(Corpus{"e", {"one"}}, 2);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCorpus);
  }

  auto corpora = fixture();
  auto all = pooled(corpora);
  for (int n = 1; n <= 5; ++n) {
    CHECK(ttr(all, n) == doctest::Approx(naive_ttr(all, n)).epsilon(1e-15));
    for (const auto& c : corpora) CHECK(ttr(c, n) == doctest::Approx(naive_ttr(c, n)).epsilon(1e-15));
  }
}

TEST_CASE("hdd closed forms") {
  std::vector<std::string> distinct;
  for (int i = 0; i < 100; ++i) distinct.push_back("w" + std::to_string(i));
  CHECK(hdd(words(distinct)) == 1.0);

  CHECK(hdd(words(std::vector<std::string>(60, "same"))) == 1.0 / 42.0);
  CHECK(hdd(words(std::vector<std::string>(42, "same"))) == 1.0 / 42.0);

  try {
    hdd(words(std::vector<std::string>(41, "x")));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorpusTooSmall);
  }
}

TEST_CASE("hdd against Monte Carlo") {
  auto all = pooled(fixture());
  auto h = hdd(all);
  INFO("closed form " << h);
  CHECK(std::abs(h - monte_carlo_hdd(all, 100000, 1)) <= 0.005);

  Rng rng(77);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<std::string> tokens;
    auto n = 42 + uniform_index(rng, 200);
    auto types = 1 + uniform_index(rng, 80);
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(uniform_index(rng, types)));
    auto c = words(tokens);
    CHECK(std::abs(hdd(c) - monte_carlo_hdd(c, 20000, trial)) <= 0.005);
    CHECK(hdd(c) > 0.0);
    CHECK(hdd(c) <= 1.0);
  }
}

TEST_CASE("bag-of-words properties") {
  auto all = pooled(fixture());
  auto reversed = all;
  std::reverse(reversed.documents.begin(), reversed.documents.end());
  CHECK(hdd(reversed) == doctest::Approx(hdd(all)).epsilon(1e-15));

  auto doubled = all;
  doubled.documents.insert(doubled.documents.end(), all.documents.begin(), all.documents.end());
  CHECK(ttr(doubled, 1) < ttr(all, 1));
  CHECK(std::abs(hdd(doubled) - monte_carlo_hdd(doubled, 20000, 5)) <= 0.005);

  for (int n = 1; n <= 5; ++n) {
    CHECK(ttr(all, n) > 0.0);
    CHECK(ttr(all, n) <= 1.0);
  }
}

TEST_CASE("reports and comparison") {
  auto corpora = fixture();
  REQUIRE(corpora.size() == 2);
  CHECK(corpora[0].label == "anes");
  CHECK(corpora[0].documents.size() == 10);

  std::vector<DiversityReport> reports{report(corpora[0]), report(corpora[1])};
  CHECK(reports[0].token_count == 150);
  auto rows = compare(reports);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].metric == "ttr_1");
  CHECK(rows[5].metric == "hdd");

  SUBCASE("narrower vocabulary with repetition scores lower") {
    Corpus wide{"wide", {"a b c d e f g h"}};
    Corpus narrow{"narrow", {"a b a b c d c d a b c d a b a b"}};
    std::vector<DiversityReport> rs{report(narrow, 4), report(wide, 4)};
    auto r = compare(rs);
    CHECK(r[0].higher == "wide");
    CHECK(naive_ttr(wide, 1) > naive_ttr(narrow, 1));
  }
  SUBCASE("identical corpora tie") {
    std::vector<DiversityReport> same{report(corpora[0]), report(corpora[0])};
    for (const auto& row : compare(same)) CHECK_FALSE(row.higher);
  }
  SUBCASE("renderings") {
    auto j = to_json(reports, rows);
    CHECK(j["comparison"].size() == 6);
    CHECK(j["reports"][0]["tokenizer_version"] == kTokenizerVersion);
    auto table = comparison_table(reports, rows);
    CHECK(table.starts_with("metric"));
    CHECK(std::count(table.begin(), table.end(), '\n') == 7);
  }
  CHECK_THROWS_AS(compare(std::span(reports).first(1)), Error);

  std::istringstream bad("{\"label\": \"x\", \"text\": \"ok\"}\nnot json\n");
  try {
    read_jsonl(bad);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
