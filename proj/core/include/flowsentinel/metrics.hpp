#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace flowsentinel {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}
  // Throws ValidationError for ragged, non-square or negative input.
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

  std::size_t num_classes() const { return n_; }
  std::int64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * n_ + predicted]; }
  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * n_ + predicted];
  }
  std::int64_t row_sum(std::size_t c) const;
  std::int64_t col_sum(std::size_t c) const;
  std::int64_t trace() const;
  std::int64_t total() const;
  const std::vector<std::int64_t>& counts() const { return counts_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& truth,
                                 const std::vector<std::size_t>& predicted,
                                 std::size_t num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  // Set when precision or recall was 0/0 and reported as 0.
  bool undefined = false;
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  AverageMetrics macro;
  // Support-weighted averages, reported alongside the macro headline.
  AverageMetrics weighted;
  std::vector<std::string> class_names;
};

EvalReport classification_report(const ConfusionMatrix& confusion,
                                  const std::vector<std::string>& class_names);

// Aligned plain-text table followed by the confusion grid.
std::string format_report_text(const EvalReport& report);
// JSON document mirroring EvalReport field by field.
std::string format_report_structured(const EvalReport& report);

}  // namespace flowsentinel
