#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "ensemblage/persona.hpp"

namespace ensemblage::persona {

WeightedSampler::WeightedSampler(const std::vector<double>& weights) {
  if (weights.empty()) throw Error(ErrorCode::EmptyDataset, "no weights to sample from");
  cumulative_.reserve(weights.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::Schema, "weights must be finite and > 0");
    }
    total += w;
    cumulative_.push_back(total);
  }
}

std::size_t WeightedSampler::draw(Rng& rng) const {
  const double target = uniform_unit(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  // target < total always, but rounding in the product can land on it
  if (it == cumulative_.end()) --it;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

const PersonaRecord& sample_weighted(const PersonaDataset& dataset, Rng& rng) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "cannot sample from an empty dataset");
  std::vector<double> weights;
  weights.reserve(dataset.size());
  for (const auto& row : dataset.rows()) weights.push_back(row.weight);
  return dataset.rows()[WeightedSampler(weights).draw(rng)];
}

const PersonaRecord& ideology_shortcut(const PersonaDataset& dataset, std::string_view label,
                                       Rng& rng) {
  std::string key;
  for (char c : label) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key == "random") return sample_weighted(dataset, rng);

  const auto& cb = dataset.codebook();
  if (!cb.ideology_column) {
    throw Error(ErrorCode::UnknownLabel, "dataset has no ideology column configured");
  }
  std::vector<std::string> raw_values;
  if (auto it = cb.ideology_labels.find(key); it != cb.ideology_labels.end()) {
    raw_values = it->second;
  } else if (cb.ideology_labels.empty()) {
    std::set<std::string> seen;
    for (const auto& row : dataset.rows()) {
      if (auto v = row.values.find(*cb.ideology_column); v != row.values.end()) {
        std::string lower;
        for (char c : v->second) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower == key && seen.insert(v->second).second) raw_values.push_back(v->second);
      }
    }
  }
  if (raw_values.empty()) {
    throw Error(ErrorCode::UnknownLabel, "unknown ideology label '" + std::string(label) + "'");
  }

  // Index into the parent dataset so the returned reference outlives the
  // filtered view.
  std::vector<std::size_t> matches;
  std::vector<double> weights;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& row = dataset.rows()[i];
    auto v = row.values.find(*cb.ideology_column);
    if (v != row.values.end() &&
        std::find(raw_values.begin(), raw_values.end(), v->second) != raw_values.end()) {
      matches.push_back(i);
      weights.push_back(row.weight);
    }
  }
  if (matches.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no rows with ideology '" + std::string(label) + "'");
  }
  return dataset.rows()[matches[WeightedSampler(weights).draw(rng)]];
}

std::string render_persona(const PersonaRecord& record, const Codebook& codebook) {
  for (const auto& [column, value] : record.values) {
    if (!codebook.find(column)) {
      throw Error(ErrorCode::CodebookMismatch, "codebook has no entry for column '" + column + "'");
    }
  }
  std::string out(kPersonaHeader);
  for (const auto& entry : codebook.entries) {
    auto it = record.values.find(entry.column);
    if (it == record.values.end()) continue;
    auto label = entry.value_labels.find(it->second);
    const std::string& phrase = label != entry.value_labels.end() ? label->second : it->second;
    std::string sentence = entry.sentence_template;
    sentence.replace(sentence.find("${value}"), 8, phrase);
    out += '\n';
    out += sentence;
  }
  return out;
}

}  // namespace ensemblage::persona
