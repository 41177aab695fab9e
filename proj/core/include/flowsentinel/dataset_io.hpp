#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowsentinel/tensor.hpp"

namespace flowsentinel {

struct Dataset {
  Tensor features;  // (samples x F)
  std::vector<std::string> raw_labels;
  std::string source;
  std::vector<std::string> feature_names;

  std::size_t samples() const { return raw_labels.size(); }
  std::size_t feature_count() const { return feature_names.size(); }
};

// Reads a comma-separated file with a header row. `label_column` is kept as
// a string; every other column must parse as a finite decimal float.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column = "label");

// Writes features followed by a label column named `label_column`. Values use
// the shortest representation that parses back to the identical double.
void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               std::string_view label_column = "label");

enum class Task { kBinary, kCategory, kMulticlass };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

enum class MatchKind { kExact, kPrefix, kContains };

struct TaxonomyRule {
  MatchKind kind = MatchKind::kExact;
  std::string pattern;
  std::string category;

  bool matches(std::string_view label) const;
  friend bool operator==(const TaxonomyRule&, const TaxonomyRule&) = default;
};

// Ordered first-match rules mapping raw labels to attack categories.
struct Taxonomy {
  std::vector<TaxonomyRule> rules;
  // Category that the binary task reports as "Benign"; all others are "Attack".
  std::string benign_category = "Benign";

  // Benign, DDoS, DoS, MQTT, Recon and Spoofing by label prefix.
  static Taxonomy default_rules();

  std::optional<std::string> try_category(std::string_view raw_label) const;
  // Throws TaxonomyError when no rule matches.
  std::string category_of(std::string_view raw_label) const;

  friend bool operator==(const Taxonomy&, const Taxonomy&) = default;
};

// `kind,pattern,category` per line, kind in {exact, prefix, contains}; blank
// lines and lines starting with '#' are skipped.
Taxonomy parse_taxonomy(std::string_view text);
Taxonomy load_taxonomy(const std::filesystem::path& path);
std::string_view match_kind_name(MatchKind kind);

// Task-level labels. Every raw label must be covered; all unmatched labels
// are listed in the TaxonomyError message.
std::vector<std::string> map_labels(const std::vector<std::string>& raw_labels,
                                    const Taxonomy& taxonomy, Task task);

// Keeps at most `per_class_cap` rows of each raw class, chosen by a seeded
// shuffle. Retained rows stay in their original relative order.
Dataset subsample_stratified(const Dataset& dataset, std::size_t per_class_cap,
                             std::uint64_t seed);

}  // namespace flowsentinel
