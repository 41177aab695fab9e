#include "flowsentinel/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "flowsentinel/error.hpp"

namespace flowsentinel {

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix m(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows.size()) {
      throw ValidationError("confusion matrix must be square: row " + std::to_string(t) + " has " +
                            std::to_string(rows[t].size()) + " entries, expected " +
                            std::to_string(rows.size()));
    }
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (rows[t][p] < 0) throw ValidationError("confusion matrix entries must be non-negative");
      m.at(t, p) = rows[t][p];
    }
  }
  return m;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(c, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::int64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, c);
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t c = 0; c < n_; ++c) s += at(c, c);
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                                 std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw ValidationError("confusion_matrix: " + std::to_string(truth.size()) + " true labels vs " +
                          std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw ValidationError("confusion_matrix: class index out of range at sample " + std::to_string(i));
    }
    ++m.at(truth[i], predicted[i]);
  }
  return m;
}

namespace {

double ratio(std::int64_t num, std::int64_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalReport classification_report(const ConfusionMatrix& confusion, const std::vector<std::string>& class_names) {
  const std::size_t n = confusion.num_classes();
  if (class_names.size() != n) {
    throw ValidationError("classification_report: " + std::to_string(class_names.size()) +
                          " class names for a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  }
  EvalReport r;
  r.confusion = confusion;
  r.class_names = class_names;
  const std::int64_t total = confusion.total();
  bool unused = false;
  r.accuracy = ratio(confusion.trace(), total, unused);

  r.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    ClassMetrics& m = r.per_class[c];
    const std::int64_t tp = confusion.at(c, c);
    m.support = confusion.row_sum(c);
    m.precision = ratio(tp, confusion.col_sum(c), m.undefined);
    m.recall = ratio(tp, m.support, m.undefined);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;

    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    const double w = static_cast<double>(m.support);
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  if (n > 0) {
    const double k = static_cast<double>(n);
    r.macro.precision /= k;
    r.macro.recall /= k;
    r.macro.f1 /= k;
  }
  if (total > 0) {
    const double k = static_cast<double>(total);
    r.weighted.precision /= k;
    r.weighted.recall /= k;
    r.weighted.f1 /= k;
  }
  return r;
}

std::string format_report_text(const EvalReport& r) {
  std::size_t name_w = std::string("weighted avg").size();
  for (const auto& name : r.class_names) name_w = std::max(name_w, name.size());

  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10s %10s\n", static_cast<int>(name_w), "class", "precision",
                "recall", "f1-score", "support");
  out << buf;
  bool any_undefined = false;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    any_undefined = any_undefined || m.undefined;
    std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.4f %10.4f %10lld%s\n", static_cast<int>(name_w),
                  r.class_names[c].c_str(), m.precision, m.recall, m.f1, static_cast<long long>(m.support),
                  m.undefined ? " *" : "");
    out << buf;
  }
  out << '\n';
  const long long total = static_cast<long long>(r.confusion.total());
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10.4f %10lld\n", static_cast<int>(name_w), "accuracy", "", "",
                r.accuracy, total);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.4f %10.4f %10lld\n", static_cast<int>(name_w), "macro avg",
                r.macro.precision, r.macro.recall, r.macro.f1, total);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.4f %10.4f %10lld\n", static_cast<int>(name_w), "weighted avg",
                r.weighted.precision, r.weighted.recall, r.weighted.f1, total);
  out << buf;
  if (any_undefined) out << "(* precision or recall undefined (0/0), reported as 0)\n";

  out << "\nconfusion matrix (rows = true, columns = predicted)\n";
  std::size_t cell_w = 1;
  for (auto v : r.confusion.counts()) cell_w = std::max(cell_w, std::to_string(v).size());
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    cell_w = std::max(cell_w, std::to_string(c).size());
  }
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), "");
  out << buf;
  for (std::size_t p = 0; p < r.confusion.num_classes(); ++p) {
    std::snprintf(buf, sizeof buf, " %*zu", static_cast<int>(cell_w), p);
    out << buf;
  }
  out << '\n';
  for (std::size_t t = 0; t < r.confusion.num_classes(); ++t) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), (std::to_string(t) + " " + r.class_names[t]).c_str());
    out << buf;
    for (std::size_t p = 0; p < r.confusion.num_classes(); ++p) {
      std::snprintf(buf, sizeof buf, " %*lld", static_cast<int>(cell_w), static_cast<long long>(r.confusion.at(t, p)));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string format_report_structured(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json doc;
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < r.confusion.num_classes(); ++t) {
    ordered_json row = ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.num_classes(); ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(row);
  }
  doc["class_names"] = r.class_names;
  doc["confusion"] = rows;
  doc["accuracy"] = r.accuracy;
  ordered_json per_class = ordered_json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class.push_back({{"class", r.class_names[c]},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support},
                         {"undefined", m.undefined}});
  }
  doc["per_class"] = per_class;
  doc["macro"] = {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}};
  doc["weighted"] = {{"precision", r.weighted.precision}, {"recall", r.weighted.recall}, {"f1", r.weighted.f1}};
  return doc.dump(2) + "\n";
}

}  // namespace flowsentinel
