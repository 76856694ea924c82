#include <cctype>
#include <charconv>

#include "ensemblage/persona.hpp"

namespace ensemblage::persona {

namespace {

class QueryLexer {
 public:
  explicit QueryLexer(std::string_view text) : text_(text) {}

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::QuerySyntax,
                "query: " + what + " at offset " + std::to_string(pos_) + " in '" +
                    std::string(text_) + "'");
  }

  std::string identifier() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
            text_[pos_] == '.')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a column name");
    return std::string(text_.substr(start, pos_ - start));
  }

  CompareOp op() {
    skip_space();
    static constexpr std::pair<std::string_view, CompareOp> kOps[] = {
        {"==", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<=", CompareOp::Le},
        {">=", CompareOp::Ge}, {"<", CompareOp::Lt},  {">", CompareOp::Gt},
        {"=", CompareOp::Eq},
    };
    for (auto [token, op] : kOps) {
      if (text_.substr(pos_, token.size()) == token) {
        pos_ += token.size();
        return op;
      }
    }
    if (keyword("in")) return CompareOp::In;
    fail("expected a comparison operator");
  }

  Literal literal() {
    skip_space();
    if (pos_ >= text_.size()) fail("expected a literal");
    char q = text_[pos_];
    if (q == '\'' || q == '"') {
      std::string out;
      for (++pos_; pos_ < text_.size() && text_[pos_] != q; ++pos_) {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        out += text_[pos_];
      }
      if (pos_ >= text_.size()) fail("unterminated string literal");
      ++pos_;
      return out;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc{}) fail("expected a number or quoted string");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  std::vector<Literal> literal_list() {
    skip_space();
    char open = pos_ < text_.size() ? text_[pos_] : '\0';
    char close = open == '[' ? ']' : open == '(' ? ')' : '\0';
    if (!close) fail("expected '[' after 'in'");
    ++pos_;
    std::vector<Literal> out;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == close) fail("empty 'in' list");
    while (true) {
      out.push_back(literal());
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < text_.size() && text_[pos_] == close) {
        ++pos_;
        return out;
      }
      fail("expected ',' or closing bracket");
    }
  }

  bool conjunction() {
    skip_space();
    if (text_.substr(pos_, 2) == "&&") {
      pos_ += 2;
      return true;
    }
    if (text_.substr(pos_, 1) == "&") {
      ++pos_;
      return true;
    }
    return keyword("and");
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool keyword(std::string_view word) {
    if (pos_ + word.size() > text_.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(text_[pos_ + i])) != word[i]) return false;
    }
    std::size_t after = pos_ + word.size();
    if (after < text_.size() &&
        (std::isalnum(static_cast<unsigned char>(text_[after])) || text_[after] == '_')) {
      return false;
    }
    pos_ = after;
    return true;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::optional<double> as_number(const std::string& s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool compare(CompareOp op, const std::string& cell, const Literal& lit, ColumnKind kind) {
  if (kind == ColumnKind::Numeric) {
    double lhs = *as_number(cell);
    double rhs = std::get<double>(lit);
    switch (op) {
      case CompareOp::Eq: case CompareOp::In: return lhs == rhs;
      case CompareOp::Ne: return lhs != rhs;
      case CompareOp::Lt: return lhs < rhs;
      case CompareOp::Le: return lhs <= rhs;
      case CompareOp::Gt: return lhs > rhs;
      case CompareOp::Ge: return lhs >= rhs;
    }
  }
  const auto& rhs = std::get<std::string>(lit);
  return op == CompareOp::Ne ? cell != rhs : cell == rhs;
}

bool clause_holds(const Clause& clause, const PersonaRecord& row, ColumnKind kind) {
  auto it = row.values.find(clause.column);
  if (it == row.values.end()) return false;
  if (clause.op == CompareOp::In) {
    for (const auto& lit : clause.literals) {
      if (compare(CompareOp::Eq, it->second, lit, kind)) return true;
    }
    return false;
  }
  return compare(clause.op, it->second, clause.literals.front(), kind);
}

}  // namespace

PersonaQuery parse_query(std::string_view text) {
  PersonaQuery query;
  QueryLexer lex(text);
  if (lex.at_end()) return query;
  while (true) {
    Clause clause;
    clause.column = lex.identifier();
    clause.op = lex.op();
    if (clause.op == CompareOp::In) {
      clause.literals = lex.literal_list();
    } else {
      clause.literals.push_back(lex.literal());
    }
    query.clauses.push_back(std::move(clause));
    if (lex.at_end()) return query;
    if (!lex.conjunction()) lex.fail("expected AND");
  }
}

void validate_query(const PersonaDataset& dataset, const PersonaQuery& query) {
  for (const auto& clause : query.clauses) {
    ColumnKind kind = dataset.kind(clause.column);  // throws UnknownColumn
    if (clause.literals.empty() || (clause.op != CompareOp::In && clause.literals.size() != 1)) {
      throw Error(ErrorCode::QuerySyntax, "clause on '" + clause.column + "' has wrong arity");
    }
    for (const auto& lit : clause.literals) {
      bool numeric_literal = std::holds_alternative<double>(lit);
      if (numeric_literal != (kind == ColumnKind::Numeric)) {
        throw Error(ErrorCode::TypeMismatch,
                    "column '" + clause.column + "' is " +
                        (kind == ColumnKind::Numeric ? "numeric" : "categorical") +
                        " but the literal is " + (numeric_literal ? "numeric" : "a string"));
      }
    }
    bool ordering = clause.op == CompareOp::Lt || clause.op == CompareOp::Le ||
                    clause.op == CompareOp::Gt || clause.op == CompareOp::Ge;
    if (ordering && kind != ColumnKind::Numeric) {
      throw Error(ErrorCode::TypeMismatch,
                  "ordering comparison on categorical column '" + clause.column + "'");
    }
  }
}

PersonaDataset filter(const PersonaDataset& dataset, const PersonaQuery& query) {
  validate_query(dataset, query);
  std::vector<ColumnKind> kinds;
  for (const auto& clause : query.clauses) kinds.push_back(dataset.kind(clause.column));

  std::vector<PersonaRecord> kept;
  for (const auto& row : dataset.rows()) {
    bool all = true;
    for (std::size_t i = 0; i < query.clauses.size() && all; ++i) {
      all = clause_holds(query.clauses[i], row, kinds[i]);
    }
    if (all) kept.push_back(row);
  }
  return dataset.with_rows(std::move(kept));
}

}  // namespace ensemblage::persona
