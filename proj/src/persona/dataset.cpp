#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ensemblage/persona.hpp"

namespace ensemblage::persona {

namespace {

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Schema, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const CodebookEntry* Codebook::find(std::string_view column) const {
  for (const auto& e : entries) {
    if (e.column == column) return &e;
  }
  return nullptr;
}

Codebook parse_codebook(std::string_view json_text) {
  using nlohmann::json;
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::Schema, "codebook is not a JSON object");
  }
  Codebook cb;
  try {
    cb.source_label = doc.value("source_label", "");
    cb.weight_column = doc.at("weight_column").get<std::string>();
    if (doc.contains("ideology_column") && !doc["ideology_column"].is_null()) {
      cb.ideology_column = doc["ideology_column"].get<std::string>();
    }
    if (doc.contains("ideology_labels")) {
      for (const auto& [label, values] : doc["ideology_labels"].items()) {
        std::string key;
        for (char c : label) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        cb.ideology_labels[key] = values.get<std::vector<std::string>>();
      }
    }
    std::set<std::string> seen;
    for (const auto& e : doc.at("entries")) {
      CodebookEntry entry;
      entry.column = e.at("column").get<std::string>();
      entry.human_label = e.value("human_label", entry.column);
      if (e.contains("value_labels")) {
        entry.value_labels = e["value_labels"].get<std::map<std::string, std::string>>();
      }
      entry.sentence_template = e.at("sentence_template").get<std::string>();
      if (count_occurrences(entry.sentence_template, "${value}") != 1) {
        throw Error(ErrorCode::Schema, "codebook entry '" + entry.column +
                                           "': sentence_template must contain ${value} exactly once");
      }
      if (!seen.insert(entry.column).second) {
        throw Error(ErrorCode::Schema, "codebook lists column '" + entry.column + "' twice");
      }
      cb.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("codebook: ") + e.what());
  }
  return cb;
}

PersonaDataset::PersonaDataset(std::vector<std::string> columns,
                               std::vector<PersonaRecord> rows, Codebook codebook)
    : columns_(std::move(columns)), rows_(std::move(rows)), codebook_(std::move(codebook)) {
  std::set<std::string, std::less<>> column_set(columns_.begin(), columns_.end());
  if (column_set.size() != columns_.size()) {
    throw Error(ErrorCode::Schema, "duplicate column names");
  }
  if (column_set.count(codebook_.weight_column)) {
    throw Error(ErrorCode::Schema, "weight column must not be a persona column");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& row = rows_[i];
    if (!std::isfinite(row.weight) || row.weight <= 0.0) {
      throw Error(ErrorCode::Schema, "row " + std::to_string(i + 1) +
                                         ": weight must be finite and > 0");
    }
    for (const auto& [col, value] : row.values) {
      if (!column_set.count(col)) {
        throw Error(ErrorCode::Schema, "row " + std::to_string(i + 1) +
                                           ": unexpected column '" + col + "'");
      }
    }
  }
  for (const auto& col : columns_) {
    if (!codebook_.find(col)) {
      throw Error(ErrorCode::CodebookMismatch, "codebook has no entry for column '" + col + "'");
    }
  }
  for (const auto& entry : codebook_.entries) {
    if (!column_set.count(entry.column)) {
      throw Error(ErrorCode::CodebookMismatch,
                  "codebook entry '" + entry.column + "' names no dataset column");
    }
  }
  if (codebook_.ideology_column && !column_set.count(*codebook_.ideology_column)) {
    throw Error(ErrorCode::CodebookMismatch,
                "ideology column '" + *codebook_.ideology_column + "' not in dataset");
  }

  for (const auto& col : columns_) {
    bool any = false, numeric = true;
    for (const auto& row : rows_) {
      auto it = row.values.find(col);
      if (it == row.values.end()) continue;
      any = true;
      if (!parse_number(it->second)) {
        numeric = false;
        break;
      }
    }
    kinds_[col] = (any && numeric) ? ColumnKind::Numeric : ColumnKind::Categorical;
  }
}

bool PersonaDataset::has_column(std::string_view column) const {
  return kinds_.find(column) != kinds_.end();
}

ColumnKind PersonaDataset::kind(std::string_view column) const {
  auto it = kinds_.find(column);
  if (it == kinds_.end()) {
    throw Error(ErrorCode::UnknownColumn, "unknown column '" + std::string(column) + "'");
  }
  return it->second;
}

PersonaDataset PersonaDataset::with_rows(std::vector<PersonaRecord> rows) const {
  PersonaDataset out;
  out.columns_ = columns_;
  out.kinds_ = kinds_;
  out.codebook_ = codebook_;
  out.rows_ = std::move(rows);
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::Schema, "CSV: unterminated quoted field");
  if (!field.empty() || field_started || !record.empty()) end_record();
  return records;
}

PersonaDataset load_dataset_text(std::string_view csv_text, std::string_view codebook_json) {
  Codebook codebook = parse_codebook(codebook_json);
  auto table = parse_csv(csv_text);
  if (table.empty()) throw Error(ErrorCode::Schema, "CSV has no header row");

  const auto& header = table.front();
  std::optional<std::size_t> weight_index;
  std::vector<std::string> columns;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == codebook.weight_column) {
      weight_index = i;
    } else {
      columns.push_back(header[i]);
    }
  }
  if (!weight_index) {
    throw Error(ErrorCode::Schema, "weight column '" + codebook.weight_column + "' missing");
  }

  std::vector<PersonaRecord> rows;
  rows.reserve(table.size() - 1);
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& cells = table[r];
    const std::string where = "row " + std::to_string(r);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Schema, where + ": expected " + std::to_string(header.size()) +
                                         " fields, found " + std::to_string(cells.size()));
    }
    PersonaRecord record;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == *weight_index) {
        auto w = parse_number(cells[i]);
        if (!w) throw Error(ErrorCode::Schema, where + ": missing or non-numeric weight");
        record.weight = *w;
      } else if (!cells[i].empty()) {
        record.values.emplace(header[i], cells[i]);
      }
    }
    rows.push_back(std::move(record));
  }
  return PersonaDataset(std::move(columns), std::move(rows), std::move(codebook));
}

PersonaDataset load_dataset(const std::filesystem::path& csv_path,
                            const std::filesystem::path& codebook_path) {
  return load_dataset_text(read_file(csv_path), read_file(codebook_path));
}

std::string describe_variables(const PersonaDataset& dataset) {
  std::ostringstream out;
  for (const auto& entry : dataset.codebook().entries) {
    out << entry.column << ": " << entry.human_label << "; values: ";
    if (dataset.kind(entry.column) == ColumnKind::Numeric) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& row : dataset.rows()) {
        if (auto it = row.values.find(entry.column); it != row.values.end()) {
          double v = *parse_number(it->second);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      out << "numeric";
      if (lo <= hi) out << ", " << lo << " to " << hi;
    } else {
      std::set<std::string> values;
      for (const auto& [raw, phrase] : entry.value_labels) values.insert(raw);
      for (const auto& row : dataset.rows()) {
        if (auto it = row.values.find(entry.column); it != row.values.end()) {
          values.insert(it->second);
        }
      }
      bool first = true;
      for (const auto& v : values) {
        out << (first ? "" : " | ") << v;
        first = false;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ensemblage::persona
