#include "flowsentinel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "flowsentinel/error.hpp"
#include "flowsentinel/random.hpp"

namespace flowsentinel {

LabelEncoding encode_labels(const std::vector<std::string>& raw_labels) {
  if (raw_labels.empty()) throw ValidationError("encode_labels: no labels");
  LabelEncoding enc;
  enc.label_map = raw_labels;
  std::sort(enc.label_map.begin(), enc.label_map.end());
  enc.label_map.erase(std::unique(enc.label_map.begin(), enc.label_map.end()), enc.label_map.end());
  enc.class_indices = lookup_labels(enc.label_map, raw_labels);
  return enc;
}

std::vector<std::size_t> lookup_labels(const std::vector<std::string>& label_map,
                                       const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < label_map.size(); ++i) index.emplace(label_map[i], i);
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = index.find(label);
    if (it == index.end()) throw ValidationError("label '" + label + "' is not in the class map");
    out.push_back(it->second);
  }
  return out;
}

Tensor one_hot(std::size_t class_index, std::size_t num_classes) {
  if (class_index >= num_classes) {
    throw ValidationError("one_hot: class index " + std::to_string(class_index) + " out of range for " +
                          std::to_string(num_classes) + " classes");
  }
  Tensor t(Shape{num_classes});
  t[class_index] = 1.0;
  return t;
}

Tensor one_hot_matrix(const std::vector<std::size_t>& class_indices, std::size_t num_classes) {
  Tensor t(Shape{class_indices.size(), num_classes});
  for (std::size_t i = 0; i < class_indices.size(); ++i) {
    if (class_indices[i] >= num_classes) {
      throw ValidationError("one_hot: class index " + std::to_string(class_indices[i]) +
                            " out of range for " + std::to_string(num_classes) + " classes");
    }
    t.at(i, class_indices[i]) = 1.0;
  }
  return t;
}

PreprocState fit_standardizer(const Tensor& features) {
  if (features.rank() != 2) {
    throw DimensionError("fit_standardizer expects (samples, features), got " +
                         shape_to_string(features.shape()));
  }
  const std::size_t n = features.dim(0);
  const std::size_t f = features.dim(1);
  if (n == 0) throw ValidationError("fit_standardizer: no samples");

  PreprocState s;
  s.means.assign(f, 0.0);
  s.stds.assign(f, 0.0);
  s.degenerate.assign(f, false);
  for (std::size_t j = 0; j < f; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += features.at(i, j);
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = features.at(i, j) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    s.means[j] = mean;
    if (sd < kDegenerateStdThreshold) {
      s.stds[j] = 1.0;
      s.degenerate[j] = true;
    } else {
      s.stds[j] = sd;
    }
  }
  return s;
}

Tensor apply_standardizer(const PreprocState& state, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != state.feature_count()) {
    throw ValidationError("feature count mismatch: expected " + std::to_string(state.feature_count()) +
                          ", got " + (features.rank() == 2 ? std::to_string(features.dim(1))
                                                            : shape_to_string(features.shape())));
  }
  const std::size_t n = features.dim(0);
  const std::size_t f = features.dim(1);
  Tensor out(Shape{n, f, 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      out.at(i, j, 0) = (features.at(i, j) - state.means[j]) / state.stds[j];
    }
  }
  return out;
}

SplitIndices stratified_split(const std::vector<std::size_t>& class_indices, double val_fraction,
                              std::uint64_t seed) {
  if (class_indices.empty()) throw ValidationError("stratified_split: no samples");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("stratified_split: validation fraction must lie in (0, 1), got " +
                          std::to_string(val_fraction));
  }
  const std::size_t classes = *std::max_element(class_indices.begin(), class_indices.end()) + 1;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < class_indices.size(); ++i) members[class_indices[i]].push_back(i);

  Rng rng(seed);
  SplitIndices split;
  split.seed = seed;
  for (auto& idx : members) {
    if (idx.empty()) continue;
    const std::size_t n = idx.size();
    auto take = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n) + 0.5));
    take = std::min(take, n - 1);
    rng.shuffle(idx);
    split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  Shape shape = t.shape();
  const std::size_t stride = shape_size(Shape(shape.begin() + 1, shape.end()));
  shape[0] = rows.size();
  std::vector<double> data;
  data.reserve(rows.size() * stride);
  for (std::size_t r : rows) {
    if (r >= t.dim(0)) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range");
    auto first = t.values().begin() + static_cast<std::ptrdiff_t>(r * stride);
    data.insert(data.end(), first, first + static_cast<std::ptrdiff_t>(stride));
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace flowsentinel
