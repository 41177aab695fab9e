#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowsentinel/tensor.hpp"

namespace flowsentinel {

inline constexpr double kDegenerateStdThreshold = 1e-12;

struct LabelEncoding {
  // Sorted distinct labels; position is the class id.
  std::vector<std::string> label_map;
  std::vector<std::size_t> class_indices;
};

LabelEncoding encode_labels(const std::vector<std::string>& raw_labels);

// Class ids of `labels` under an existing map. Unknown labels raise
// ValidationError.
std::vector<std::size_t> lookup_labels(const std::vector<std::string>& label_map,
                                       const std::vector<std::string>& labels);

Tensor one_hot(std::size_t class_index, std::size_t num_classes);

// (samples x classes) matrix of one-hot rows.
Tensor one_hot_matrix(const std::vector<std::size_t>& class_indices, std::size_t num_classes);

// Fitted per-feature z-score parameters plus the label map: everything
// needed to replay preprocessing at predict time.
struct PreprocState {
  std::vector<double> means;
  std::vector<double> stds;
  // True where the fitted population std fell below 1e-12 and was replaced by 1.
  std::vector<bool> degenerate;
  std::vector<std::string> label_map;

  std::size_t feature_count() const { return means.size(); }

  friend bool operator==(const PreprocState&, const PreprocState&) = default;
};

// Column means and population standard deviations of a (samples x F) matrix.
// Fills means/stds/degenerate only.
PreprocState fit_standardizer(const Tensor& features);

// (x - mean) / std per column, returned as (samples x F x 1).
Tensor apply_standardizer(const PreprocState& state, const Tensor& features);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

// Per class, round-half-up(val_fraction * n_c) samples go to validation,
// capped so that every class keeps at least one training sample. Both index
// lists are returned in ascending order.
SplitIndices stratified_split(const std::vector<std::size_t>& class_indices,
                              double val_fraction, std::uint64_t seed);

// Rows of a (samples x ...) tensor, in the given order.
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows);

}  // namespace flowsentinel
