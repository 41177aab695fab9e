#include "flowsentinel/model_store.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <system_error>

#include <json.hpp>

#include "flowsentinel/error.hpp"

namespace flowsentinel {

namespace {

using nlohmann::ordered_json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return std::bit_cast<double>(v);
}

ordered_json architecture_json(const ArchitectureConfig& a) {
  return {{"feature_count", a.feature_count}, {"class_count", a.class_count},
          {"conv1_filters", a.conv1_filters}, {"conv2_filters", a.conv2_filters},
          {"kernel_size", a.kernel_size},     {"pool_size", a.pool_size},
          {"dense_units", a.dense_units}};
}

ordered_json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed},
          {"early_stop_patience", c.early_stop_patience},
          {"shuffle_each_epoch", c.shuffle_each_epoch},
          {"threads", c.threads}};
}

ordered_json history_json(const TrainHistory& h) {
  ordered_json epochs = ordered_json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}});
  }
  return {{"best_epoch", h.best_epoch}, {"stopped_early", h.stopped_early}, {"epochs", epochs}};
}

ordered_json build_header(const ModelBundle& b) {
  ordered_json h;
  h["format_version"] = kModelFormatVersion;
  h["architecture"] = architecture_json(b.model.arch);
  h["task"] = std::string(task_name(b.metadata.task));
  h["label_column"] = b.metadata.label_column;
  h["class_names"] = b.preproc.label_map;
  h["feature_names"] = b.metadata.feature_names;

  std::vector<bool> degenerate(b.preproc.degenerate.begin(), b.preproc.degenerate.end());
  h["preprocessing"] = {{"means", b.preproc.means}, {"stds", b.preproc.stds}, {"degenerate", degenerate}};

  ordered_json rules = ordered_json::array();
  for (const auto& r : b.taxonomy.rules) {
    rules.push_back({{"kind", std::string(match_kind_name(r.kind))}, {"pattern", r.pattern}, {"category", r.category}});
  }
  h["taxonomy"] = {{"benign_category", b.taxonomy.benign_category}, {"rules", rules}};
  h["train_config"] = train_config_json(b.metadata.train_config);
  h["history"] = history_json(b.metadata.history);

  ordered_json tensors = ordered_json::array();
  std::uint64_t offset = 0;
  const auto params = b.model.parameters();
  for (std::size_t i = 0; i < kParameterTensorCount; ++i) {
    const std::uint64_t bytes = params[i]->size() * sizeof(double);
    tensors.push_back({{"name", parameter_names()[i]}, {"shape", params[i]->shape()}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  h["tensors"] = tensors;
  h["payload_bytes"] = offset;
  return h;
}

template <typename T>
T field(const ordered_json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("model header is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model header field '") + key + "' is malformed: " + e.what());
  }
}

const ordered_json& object(const ordered_json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_object()) {
    throw FormatError(std::string("model header is missing object '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelBundle& bundle) {
  const std::string header = build_header(bundle).dump();
  if (header.size() > kMaxHeaderBytes) throw FormatError("model header exceeds 16 MiB");

  std::vector<std::uint8_t> out;
  out.reserve(kModelMagic.size() + 4 + header.size() + bundle.model.parameter_count() * sizeof(double));
  out.insert(out.end(), kModelMagic.begin(), kModelMagic.end());
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const Tensor* t : bundle.model.parameters()) {
    for (double v : t->data()) put_f64(out, v);
  }
  return out;
}

ModelBundle deserialize_model(std::span<const std::uint8_t> bytes) {
  const std::size_t prefix = kModelMagic.size() + 4;
  if (bytes.size() < kModelMagic.size() ||
      !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw FormatError("not a flowsentinel model file (bad magic)");
  }
  if (bytes.size() < prefix) throw FormatError("model file truncated inside the header length");
  const std::uint32_t header_len = get_u32(bytes.data() + kModelMagic.size());
  if (header_len > kMaxHeaderBytes) {
    throw FormatError("model header length " + std::to_string(header_len) + " exceeds the 16 MiB limit");
  }
  if (bytes.size() - prefix < header_len) {
    throw FormatError("model file truncated: header needs " + std::to_string(header_len) + " bytes, " +
                      std::to_string(bytes.size() - prefix) + " available");
  }

  ordered_json h;
  try {
    h = ordered_json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(prefix),
                            bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model header is not valid JSON: ") + e.what());
  }

  const auto version = field<std::uint64_t>(h, "format_version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }

  ModelBundle b;
  const ordered_json& a = object(h, "architecture");
  ArchitectureConfig arch;
  arch.feature_count = field<std::size_t>(a, "feature_count");
  arch.class_count = field<std::size_t>(a, "class_count");
  arch.conv1_filters = field<std::size_t>(a, "conv1_filters");
  arch.conv2_filters = field<std::size_t>(a, "conv2_filters");
  arch.kernel_size = field<std::size_t>(a, "kernel_size");
  arch.pool_size = field<std::size_t>(a, "pool_size");
  arch.dense_units = field<std::size_t>(a, "dense_units");
  try {
    b.model = make_model_shell(arch);
    b.metadata.task = parse_task(field<std::string>(h, "task"));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("invalid model header: ") + e.what());
  }

  b.metadata.label_column = field<std::string>(h, "label_column");
  b.preproc.label_map = field<std::vector<std::string>>(h, "class_names");
  b.metadata.feature_names = field<std::vector<std::string>>(h, "feature_names");
  if (b.preproc.label_map.size() != arch.class_count) {
    throw FormatError("header lists " + std::to_string(b.preproc.label_map.size()) + " class names for " +
                      std::to_string(arch.class_count) + " outputs");
  }
  if (std::set<std::string>(b.preproc.label_map.begin(), b.preproc.label_map.end()).size() !=
      b.preproc.label_map.size()) {
    throw FormatError("duplicate class names in model header");
  }

  const ordered_json& pre = object(h, "preprocessing");
  b.preproc.means = field<std::vector<double>>(pre, "means");
  b.preproc.stds = field<std::vector<double>>(pre, "stds");
  b.preproc.degenerate = field<std::vector<bool>>(pre, "degenerate");
  const std::size_t f = arch.feature_count;
  if (b.preproc.means.size() != f || b.preproc.stds.size() != f || b.preproc.degenerate.size() != f ||
      b.metadata.feature_names.size() != f) {
    throw FormatError("preprocessing state does not cover " + std::to_string(f) + " features");
  }
  for (double s : b.preproc.stds) {
    if (!(s > 0.0) || !std::isfinite(s)) throw FormatError("non-positive standard deviation in model header");
  }

  const ordered_json& tax = object(h, "taxonomy");
  b.taxonomy.benign_category = field<std::string>(tax, "benign_category");
  if (!tax.contains("rules") || !tax.at("rules").is_array()) throw FormatError("taxonomy rules missing");
  for (const auto& r : tax.at("rules")) {
    TaxonomyRule rule;
    const auto kind = field<std::string>(r, "kind");
    if (kind == "exact") {
      rule.kind = MatchKind::kExact;
    } else if (kind == "prefix") {
      rule.kind = MatchKind::kPrefix;
    } else if (kind == "contains") {
      rule.kind = MatchKind::kContains;
    } else {
      throw FormatError("unknown taxonomy match kind '" + kind + "'");
    }
    rule.pattern = field<std::string>(r, "pattern");
    rule.category = field<std::string>(r, "category");
    b.taxonomy.rules.push_back(std::move(rule));
  }

  const ordered_json& tc = object(h, "train_config");
  TrainConfig& cfg = b.metadata.train_config;
  cfg.epochs = field<std::size_t>(tc, "epochs");
  cfg.batch_size = field<std::size_t>(tc, "batch_size");
  cfg.learning_rate = field<double>(tc, "learning_rate");
  cfg.val_fraction = field<double>(tc, "val_fraction");
  cfg.seed = field<std::uint64_t>(tc, "seed");
  cfg.early_stop_patience = field<std::size_t>(tc, "early_stop_patience");
  cfg.shuffle_each_epoch = field<bool>(tc, "shuffle_each_epoch");
  cfg.threads = field<std::size_t>(tc, "threads");

  const ordered_json& hist = object(h, "history");
  b.metadata.history.best_epoch = field<std::size_t>(hist, "best_epoch");
  b.metadata.history.stopped_early = field<bool>(hist, "stopped_early");
  if (!hist.contains("epochs") || !hist.at("epochs").is_array()) throw FormatError("training history missing");
  for (const auto& e : hist.at("epochs")) {
    b.metadata.history.epochs.push_back({field<double>(e, "train_loss"), field<double>(e, "train_accuracy"),
                                         field<double>(e, "val_loss"), field<double>(e, "val_accuracy")});
  }

  if (!h.contains("tensors") || !h.at("tensors").is_array() || h.at("tensors").size() != kParameterTensorCount) {
    throw FormatError("model header must list exactly " + std::to_string(kParameterTensorCount) + " tensors");
  }
  const auto declared_payload = field<std::uint64_t>(h, "payload_bytes");
  const std::size_t available = bytes.size() - prefix - header_len;
  if (available < declared_payload) {
    throw FormatError("model payload truncated: expected " + std::to_string(declared_payload) + " bytes, found " +
                      std::to_string(available) + " (" + std::to_string(declared_payload - available) +
                      " bytes short)");
  }
  if (available > declared_payload) {
    throw FormatError("model payload has " + std::to_string(available - declared_payload) +
                      " unexpected trailing bytes");
  }

  const std::uint8_t* payload = bytes.data() + prefix + header_len;
  std::uint64_t expected_offset = 0;
  auto params = b.model.parameters();
  for (std::size_t i = 0; i < kParameterTensorCount; ++i) {
    const ordered_json& t = h.at("tensors")[i];
    const auto name = field<std::string>(t, "name");
    if (name != parameter_names()[i]) {
      throw FormatError("tensor " + std::to_string(i) + " is '" + name + "', expected '" + parameter_names()[i] + "'");
    }
    const auto shape = field<Shape>(t, "shape");
    if (shape != params[i]->shape()) {
      throw FormatError("tensor '" + name + "' has shape " + shape_to_string(shape) + ", architecture implies " +
                        shape_to_string(params[i]->shape()));
    }
    const auto offset = field<std::uint64_t>(t, "offset");
    const auto nbytes = field<std::uint64_t>(t, "bytes");
    if (offset != expected_offset || nbytes != params[i]->size() * sizeof(double)) {
      throw FormatError("tensor '" + name + "' has inconsistent offset/byte count");
    }
    for (std::size_t k = 0; k < params[i]->size(); ++k) {
      (*params[i])[k] = get_f64(payload + offset + k * sizeof(double));
    }
    if (!params[i]->all_finite()) throw FormatError("tensor '" + name + "' contains non-finite values");
    expected_offset += nbytes;
  }
  if (expected_offset != declared_payload) throw FormatError("payload size disagrees with tensor table");
  return b;
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(path, ec)) throw IoError("cannot write model: '" + path.string() + "' is a directory");

  const std::vector<std::uint8_t> bytes = serialize_model(bundle);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("failed while writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw IoError("cannot move model into place at '" + path.string() + "': " + ec.message());
  }
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) throw IoError("'" + path.string() + "' is a directory");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace flowsentinel
