#include "flowsentinel/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "flowsentinel/error.hpp"
#include "flowsentinel/random.hpp"

namespace flowsentinel {

namespace {

constexpr std::size_t kMaxReportedBadCells = 10;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& value) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InternalError("failed to format double");
  return std::string(buf, ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_fields(line);
  std::size_t label_pos = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_pos = i;
      break;
    }
  }
  if (label_pos == header.size()) {
    throw SchemaError("'" + path.string() + "' has no label column '" + std::string(label_column) + "'");
  }

  Dataset ds;
  ds.source = path.string();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != label_pos) ds.feature_names.emplace_back(header[i]);
  }
  const std::size_t f = ds.feature_names.size();

  std::vector<double> values;
  std::vector<std::string> bad;
  std::size_t bad_count = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    bool row_ok = true;
    std::size_t col = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_pos) continue;
      double v = 0.0;
      if (!parse_double(fields[i], v) || !std::isfinite(v)) {
        row_ok = false;
        if (++bad_count <= kMaxReportedBadCells) {
          bad.push_back("row " + std::to_string(row) + ", column " + ds.feature_names[col] + " ('" +
                        std::string(fields[i]) + "')");
        }
      }
      values.push_back(v);
      ++col;
    }
    if (row_ok) ds.raw_labels.emplace_back(fields[label_pos]);
  }

  if (bad_count > 0) {
    std::ostringstream msg;
    msg << "'" << path.string() << "': " << bad_count << " non-numeric or non-finite cell(s): ";
    for (std::size_t i = 0; i < bad.size(); ++i) msg << (i ? "; " : "") << bad[i];
    if (bad_count > bad.size()) msg << "; ...";
    throw DataError(msg.str());
  }
  ds.features = Tensor(Shape{row, f}, std::move(values));
  return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset, std::string_view label_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& name : dataset.feature_names) out << name << ',';
  out << label_column << '\n';
  const std::size_t f = dataset.feature_count();
  for (std::size_t i = 0; i < dataset.samples(); ++i) {
    for (std::size_t j = 0; j < f; ++j) out << format_double(dataset.features.at(i, j)) << ',';
    out << dataset.raw_labels[i] << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kBinary: return "binary";
    case Task::kCategory: return "category";
    case Task::kMulticlass: return "multiclass";
  }
  return "multiclass";
}

Task parse_task(std::string_view name) {
  if (name == "binary") return Task::kBinary;
  if (name == "category") return Task::kCategory;
  if (name == "multiclass") return Task::kMulticlass;
  throw ValidationError("unknown task '" + std::string(name) + "' (expected binary, category or multiclass)");
}

std::string_view match_kind_name(MatchKind kind) {
  switch (kind) {
    case MatchKind::kExact: return "exact";
    case MatchKind::kPrefix: return "prefix";
    case MatchKind::kContains: return "contains";
  }
  return "exact";
}

bool TaxonomyRule::matches(std::string_view label) const {
  switch (kind) {
    case MatchKind::kExact: return label == pattern;
    case MatchKind::kPrefix: return label.starts_with(pattern);
    case MatchKind::kContains: return label.find(pattern) != std::string_view::npos;
  }
  return false;
}

Taxonomy Taxonomy::default_rules() {
  Taxonomy t;
  t.rules = {
      {MatchKind::kExact, "Benign", "Benign"},
      {MatchKind::kPrefix, "DDoS", "DDoS"},
      {MatchKind::kPrefix, "DoS", "DoS"},
      {MatchKind::kPrefix, "MQTT", "MQTT"},
      {MatchKind::kPrefix, "Recon", "Recon"},
      {MatchKind::kPrefix, "ARP", "Spoofing"},
      {MatchKind::kContains, "Spoofing", "Spoofing"},
  };
  return t;
}

std::optional<std::string> Taxonomy::try_category(std::string_view raw_label) const {
  for (const auto& rule : rules) {
    if (rule.matches(raw_label)) return rule.category;
  }
  return std::nullopt;
}

std::string Taxonomy::category_of(std::string_view raw_label) const {
  if (auto c = try_category(raw_label)) return *c;
  throw TaxonomyError("no taxonomy rule matches label '" + std::string(raw_label) + "'");
}

Taxonomy parse_taxonomy(std::string_view text) {
  Taxonomy t;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3 || fields[1].empty() || fields[2].empty()) {
      throw TaxonomyError("taxonomy line " + std::to_string(line_no) + ": expected kind,pattern,category");
    }
    TaxonomyRule rule;
    if (fields[0] == "exact") {
      rule.kind = MatchKind::kExact;
    } else if (fields[0] == "prefix") {
      rule.kind = MatchKind::kPrefix;
    } else if (fields[0] == "contains") {
      rule.kind = MatchKind::kContains;
    } else {
      throw TaxonomyError("taxonomy line " + std::to_string(line_no) + ": unknown match kind '" +
                          std::string(fields[0]) + "'");
    }
    rule.pattern = fields[1];
    rule.category = fields[2];
    t.rules.push_back(std::move(rule));
  }
  if (t.rules.empty()) throw TaxonomyError("taxonomy has no rules");
  return t;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open taxonomy '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_taxonomy(buf.str());
}

std::vector<std::string> map_labels(const std::vector<std::string>& raw_labels, const Taxonomy& taxonomy,
                                    Task task) {
  std::vector<std::string> out;
  out.reserve(raw_labels.size());
  std::set<std::string> unmatched;
  for (const auto& raw : raw_labels) {
    auto category = taxonomy.try_category(raw);
    if (!category) {
      unmatched.insert(raw);
      continue;
    }
    switch (task) {
      case Task::kMulticlass: out.push_back(raw); break;
      case Task::kCategory: out.push_back(*category); break;
      case Task::kBinary: out.push_back(*category == taxonomy.benign_category ? "Benign" : "Attack"); break;
    }
  }
  if (!unmatched.empty()) {
    std::string msg = "labels not covered by the taxonomy:";
    for (const auto& u : unmatched) msg += " '" + u + "'";
    throw TaxonomyError(msg);
  }
  return out;
}

Dataset subsample_stratified(const Dataset& dataset, std::size_t per_class_cap, std::uint64_t seed) {
  if (per_class_cap == 0) throw ValidationError("subsample_stratified: cap must be at least 1");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.samples(); ++i) by_class[dataset.raw_labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [label, rows] : by_class) {
    if (rows.size() <= per_class_cap) {
      keep.insert(keep.end(), rows.begin(), rows.end());
      continue;
    }
    rng.shuffle(rows);
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_class_cap));
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.source = dataset.source;
  out.feature_names = dataset.feature_names;
  const std::size_t f = dataset.feature_count();
  std::vector<double> values;
  values.reserve(keep.size() * f);
  for (std::size_t r : keep) {
    for (std::size_t j = 0; j < f; ++j) values.push_back(dataset.features.at(r, j));
    out.raw_labels.push_back(dataset.raw_labels[r]);
  }
  out.features = Tensor(Shape{keep.size(), f}, std::move(values));
  return out;
}

}  // namespace flowsentinel
