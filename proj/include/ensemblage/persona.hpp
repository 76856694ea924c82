#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ensemblage/error.hpp"
#include "ensemblage/random.hpp"

namespace ensemblage::persona {

struct CodebookEntry {
  std::string column;
  std::string human_label;
  /// raw value -> phrase substituted into the sentence. Unlisted values are
  /// substituted as-is.
  std::map<std::string, std::string> value_labels;
  /// Contains "${value}" exactly once.
  std::string sentence_template;
};

struct Codebook {
  std::string source_label;
  std::string weight_column;
  std::optional<std::string> ideology_column;
  /// Lower-case label ("liberal") -> raw values of the ideology column.
  std::map<std::string, std::vector<std::string>> ideology_labels;
  /// Rendering order.
  std::vector<CodebookEntry> entries;

  const CodebookEntry* find(std::string_view column) const;
};

/// Parses the codebook JSON document. Throws Error(Schema) on a malformed
/// document or a sentence template without exactly one "${value}".
Codebook parse_codebook(std::string_view json_text);

struct PersonaRecord {
  /// Present values only; missing cells are absent. Excludes the weight.
  std::map<std::string, std::string> values;
  double weight = 1.0;

  bool operator==(const PersonaRecord&) const = default;
};

enum class ColumnKind { Numeric, Categorical };

/// Immutable, validated survey sample.
class PersonaDataset {
 public:
  /// Validates weights (finite, > 0), a shared column set, and codebook
  /// coverage. `columns` excludes the weight column.
  PersonaDataset(std::vector<std::string> columns, std::vector<PersonaRecord> rows,
                 Codebook codebook);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<PersonaRecord>& rows() const noexcept { return rows_; }
  const Codebook& codebook() const noexcept { return codebook_; }
  const std::string& weight_column() const noexcept { return codebook_.weight_column; }
  const std::string& source_label() const noexcept { return codebook_.source_label; }

  bool has_column(std::string_view column) const;
  /// Throws Error(UnknownColumn).
  ColumnKind kind(std::string_view column) const;

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  /// Same schema and codebook, different rows.
  PersonaDataset with_rows(std::vector<PersonaRecord> rows) const;

 private:
  PersonaDataset() = default;

  std::vector<std::string> columns_;
  std::map<std::string, ColumnKind, std::less<>> kinds_;
  std::vector<PersonaRecord> rows_;
  Codebook codebook_;
};

/// RFC 4180 style: comma separated, double-quoted fields with "" escapes,
/// LF or CRLF line ends. Throws Error(Schema) on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

PersonaDataset load_dataset_text(std::string_view csv_text, std::string_view codebook_json);
PersonaDataset load_dataset(const std::filesystem::path& csv_path,
                            const std::filesystem::path& codebook_path);

// ---------------------------------------------------------------------------
// Queries

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge, In };

using Literal = std::variant<double, std::string>;

struct Clause {
  std::string column;
  CompareOp op = CompareOp::Eq;
  /// Exactly one literal unless op is In.
  std::vector<Literal> literals;
};

/// Conjunction of clauses; empty means "every row".
struct PersonaQuery {
  std::vector<Clause> clauses;
};

/// Textual form: `col OP literal [AND col OP literal ...]`, where OP is one of
/// == != < <= > >= in, literals are numbers or single/double-quoted strings,
/// `in` takes a bracketed list, and AND may also be written `&` or `&&`.
/// Throws Error(QuerySyntax).
PersonaQuery parse_query(std::string_view text);

/// Throws Error(UnknownColumn) or Error(TypeMismatch).
void validate_query(const PersonaDataset& dataset, const PersonaQuery& query);

/// Rows where every clause holds. A missing cell satisfies no clause.
PersonaDataset filter(const PersonaDataset& dataset, const PersonaQuery& query);

// ---------------------------------------------------------------------------
// Sampling and rendering

/// Inverse-CDF sampler over a fixed weight vector.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights);

  /// Index i with probability weights[i] / sum(weights).
  std::size_t draw(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

/// Throws Error(EmptyDataset).
const PersonaRecord& sample_weighted(const PersonaDataset& dataset, Rng& rng);

/// "random" samples the whole dataset; other labels are matched
/// case-insensitively against the codebook's ideology labels. Throws
/// Error(UnknownLabel) or Error(EmptyDataset).
const PersonaRecord& ideology_shortcut(const PersonaDataset& dataset,
                                       std::string_view label, Rng& rng);

inline constexpr std::string_view kPersonaHeader =
    "You are a person with the following characteristics.";

/// Header line, then one sentence per codebook entry (codebook order) whose
/// column is present in the record, newline separated. Throws
/// Error(CodebookMismatch) if the record has a column the codebook lacks.
std::string render_persona(const PersonaRecord& record, const Codebook& codebook);

/// One line per codebook entry: column, human label, allowed values.
std::string describe_variables(const PersonaDataset& dataset);

}  // namespace ensemblage::persona
