#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ensemblage/error.hpp"

namespace ensemblage::metrics {

/// Scores are only comparable between runs with the same tokenizer version.
inline constexpr int kTokenizerVersion = 1;
inline constexpr int kDefaultSampleSize = 42;
inline constexpr int kMaxNgram = 5;

/// Lowercase (ASCII), split on whitespace and punctuation. Apostrophes and
/// hyphens survive only between word characters. Bytes >= 0x80 count as word
/// characters, so UTF-8 letters stay inside their words.
std::vector<std::string> tokenize(std::string_view text);

struct Corpus {
  std::string label;
  std::vector<std::string> documents;
};

/// n-grams are formed inside each document and then pooled; type counts.
std::map<std::vector<std::string>, std::size_t> ngram_counts(const Corpus& corpus, int n);

/// Distinct n-grams over total n-grams. Throws Error(EmptyCorpus).
double ttr(const Corpus& corpus, int n = 1);

/// Expected TTR of a without-replacement sample of `sample_size` n-grams,
/// summed per type from the hypergeometric absence probability. Throws
/// Error(CorpusTooSmall) when the corpus has fewer n-grams than the sample,
/// Error(EmptyCorpus) when it has none.
double hdd(const Corpus& corpus, int sample_size = kDefaultSampleSize, int n = 1);

struct DiversityReport {
  std::string label;
  int tokenizer_version = kTokenizerVersion;
  int sample_size = kDefaultSampleSize;
  std::size_t documents = 0;
  std::size_t token_count = 0;
  std::map<int, std::size_t> total_counts;  // n -> n-gram tokens
  std::map<int, std::size_t> type_counts;   // n -> distinct n-grams
  std::map<int, double> ttr;                // n = 1..5, absent when no n-grams
  std::optional<double> hdd;                // absent when the corpus is too small
};

DiversityReport report(const Corpus& corpus, int sample_size = kDefaultSampleSize);

struct ComparisonRow {
  std::string metric;  // ttr_1 .. ttr_5, hdd
  std::vector<std::optional<double>> scores;  // one per report, in order
  std::optional<std::string> higher;  // label of the top scorer; absent on a tie
};

/// One row per metric. Throws Error(InvalidConfig) for fewer than two reports.
std::vector<ComparisonRow> compare(std::span<const DiversityReport> reports);

nlohmann::json to_json(const DiversityReport& report);
nlohmann::json to_json(std::span<const DiversityReport> reports,
                       const std::vector<ComparisonRow>& rows);
std::string comparison_table(std::span<const DiversityReport> reports,
                             const std::vector<ComparisonRow>& rows);

/// {"label": ..., "text": ...} per line, grouped by label in first-seen
/// order. Throws Error(Parse) naming the line.
std::vector<Corpus> read_jsonl(std::istream& in);

}  // namespace ensemblage::metrics
