#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <sstream>

#include "ensemblage/metrics.hpp"

namespace ensemblage::metrics {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr double kTieTolerance = 1e-12;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (word_byte(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if ((c == '\'' || c == '-') && !current.empty() && i + 1 < text.size() &&
               word_byte(static_cast<unsigned char>(text[i + 1]))) {
      current += static_cast<char>(c);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Corpus& corpus, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "n-gram order must be at least 1");
  std::map<std::vector<std::string>, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    auto tokens = tokenize(doc);
    if (tokens.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    }
  }
  return counts;
}

double ttr(const Corpus& corpus, int n) {
  auto counts = ngram_counts(corpus, n);
  std::size_t total = 0;
  for (const auto& [g, k] : counts) total += k;
  if (total == 0) {
    throw Error(ErrorCode::EmptyCorpus,
                "corpus '" + corpus.label + "' has no " + std::to_string(n) + "-grams");
  }
  return static_cast<double>(counts.size()) / static_cast<double>(total);
}

double hdd(const Corpus& corpus, int sample_size, int n) {
  if (sample_size < 1) throw Error(ErrorCode::InvalidConfig, "sample size must be at least 1");
  auto counts = ngram_counts(corpus, n);
  std::size_t total = 0;
  std::map<std::size_t, std::size_t> types_with_freq;
  for (const auto& [g, k] : counts) {
    total += k;
    ++types_with_freq[k];
  }
  if (total == 0) throw Error(ErrorCode::EmptyCorpus, "corpus '" + corpus.label + "' is empty");
  const auto s = static_cast<std::size_t>(sample_size);
  if (total < s) {
    throw Error(ErrorCode::CorpusTooSmall, "corpus '" + corpus.label + "' has " +
                                               std::to_string(total) + " tokens, fewer than " +
                                               std::to_string(s));
  }
  // C(N-f, s) / C(N, s) = prod_{i<f} (N-s-i) / (N-i); every factor lies in
  // [0, 1], so the product cannot overflow.
  long double sum = 0;
  const long double N = static_cast<long double>(total);
  for (const auto& [f, types] : types_with_freq) {
    long double absent = 1;
    if (total - f < s) {
      absent = 0;
    } else {
      for (std::size_t i = 0; i < f && absent > 0; ++i) {
        absent *= (N - static_cast<long double>(s) - i) / (N - i);
      }
    }
    sum += static_cast<long double>(types) * (1 - absent) / static_cast<long double>(s);
  }
  return static_cast<double>(sum);
}

DiversityReport report(const Corpus& corpus, int sample_size) {
  DiversityReport r;
  r.label = corpus.label;
  r.sample_size = sample_size;
  r.documents = corpus.documents.size();
  for (int n = 1; n <= kMaxNgram; ++n) {
    auto counts = ngram_counts(corpus, n);
    std::size_t total = 0;
    for (const auto& [g, k] : counts) total += k;
    r.total_counts[n] = total;
    r.type_counts[n] = counts.size();
    if (total > 0) r.ttr[n] = static_cast<double>(counts.size()) / static_cast<double>(total);
  }
  r.token_count = r.total_counts[1];
  if (r.token_count >= static_cast<std::size_t>(sample_size)) r.hdd = hdd(corpus, sample_size);
  return r;
}

std::vector<ComparisonRow> compare(std::span<const DiversityReport> reports) {
  if (reports.size() < 2) throw Error(ErrorCode::InvalidConfig, "compare needs at least two reports");
  std::vector<ComparisonRow> rows;
  for (int m = 1; m <= kMaxNgram + 1; ++m) {
    ComparisonRow row;
    row.metric = m <= kMaxNgram ? "ttr_" + std::to_string(m) : "hdd";
    for (const auto& r : reports) {
      if (m <= kMaxNgram) {
        auto it = r.ttr.find(m);
        row.scores.push_back(it == r.ttr.end() ? std::nullopt : std::optional<double>(it->second));
      } else {
        row.scores.push_back(r.hdd);
      }
    }
    std::optional<std::size_t> best;
    bool tie = false;
    for (std::size_t i = 0; i < row.scores.size(); ++i) {
      if (!row.scores[i]) continue;
      if (!best || *row.scores[i] > *row.scores[*best] + kTieTolerance) {
        best = i;
        tie = false;
      } else if (std::abs(*row.scores[i] - *row.scores[*best]) <= kTieTolerance) {
        tie = true;
      }
    }
    if (best && !tie) row.higher = reports[*best].label;
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const DiversityReport& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["tokenizer_version"] = r.tokenizer_version;
  j["documents"] = r.documents;
  j["token_count"] = r.token_count;
  j["sample_size"] = r.sample_size;
  for (int n = 1; n <= kMaxNgram; ++n) {
    auto key = "ttr_" + std::to_string(n);
    auto it = r.ttr.find(n);
    j[key] = it == r.ttr.end() ? nlohmann::json() : nlohmann::json(it->second);
    j["type_counts"][std::to_string(n)] = r.type_counts.at(n);
    j["total_counts"][std::to_string(n)] = r.total_counts.at(n);
  }
  j["hdd"] = r.hdd ? nlohmann::json(*r.hdd) : nlohmann::json();
  return j;
}

nlohmann::json to_json(std::span<const DiversityReport> reports, const std::vector<ComparisonRow>& rows) {
  nlohmann::json j;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  j["comparison"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      scores[reports[i].label] = row.scores[i] ? nlohmann::json(*row.scores[i]) : nlohmann::json();
    }
    j["comparison"].push_back({{"metric", row.metric},
                               {"scores", scores},
                               {"higher", row.higher ? nlohmann::json(*row.higher) : nlohmann::json("tie")}});
  }
  return j;
}

std::string comparison_table(std::span<const DiversityReport> reports,
                             const std::vector<ComparisonRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"metric"};
  for (const auto& r : reports) header.push_back(r.label);
  header.push_back("higher");
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line{row.metric};
    for (const auto& s : row.scores) {
      std::ostringstream v;
      if (s) v << std::fixed << std::setprecision(4) << *s;
      else v << "n/a";
      line.push_back(v.str());
    }
    line.push_back(row.higher.value_or("tie"));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream out;
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      out << line[i];
      if (i + 1 < line.size()) out << std::string(width[i] - line[i].size() + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

std::vector<Corpus> read_jsonl(std::istream& in) {
  std::vector<Corpus> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("label") || !j["label"].is_string() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(lineno) + ": expected {\"label\": string, \"text\": string}");
    }
    auto label = j["label"].get<std::string>();
    auto [it, fresh] = index.emplace(label, out.size());
    if (fresh) out.push_back({label, {}});
    out[it->second].documents.push_back(j["text"].get<std::string>());
  }
  return out;
}

}  // namespace ensemblage::metrics
