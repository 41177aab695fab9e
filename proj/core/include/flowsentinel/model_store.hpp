#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowsentinel/dataset_io.hpp"
#include "flowsentinel/pipeline.hpp"
#include "flowsentinel/trainer.hpp"

namespace flowsentinel {

inline constexpr std::string_view kModelMagic = "FLOWSNT1";
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kMaxHeaderBytes = 16u * 1024u * 1024u;

struct ModelMetadata {
  Task task = Task::kMulticlass;
  std::string label_column = "label";
  std::vector<std::string> feature_names;
  TrainConfig train_config;
  TrainHistory history;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct ModelBundle {
  Model model;
  PreprocState preproc;
  Taxonomy taxonomy;
  ModelMetadata metadata;
};

// Container layout: 8-byte magic, u32 little-endian header length, JSON
// header, then each parameter tensor as little-endian IEEE-754 doubles in
// header order.
std::vector<std::uint8_t> serialize_model(const ModelBundle& bundle);
ModelBundle deserialize_model(std::span<const std::uint8_t> bytes);

// Writes to a sibling temporary file and renames it into place.
void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace flowsentinel
