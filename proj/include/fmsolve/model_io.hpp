#pragma once

#include "fmsolve/cfm.hpp"

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

namespace fmsolve::io {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

struct TrainingMeta {
  int epochs = 0;
  double final_loss = 0.0;
};

/// Everything persisted for a trained model.
struct ModelFile {
  cfm::FlowModel model;
  std::uint64_t seed = 0;
  TrainingMeta meta;
};

/// {format_version, config, seed, params: {name: {shape, data}}, normalization,
/// training_meta}. Floats are written in shortest round-trip form, so a
/// save/load cycle is bit-exact.
Json model_to_json(const ModelFile& file);
/// Throws ConfigError on schema violations (unknown or missing keys, bad shapes).
ModelFile model_from_json(const Json& doc);

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

/// Throws ConfigError if `obj` is not an object or has a key outside `allowed`.
void require_known_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context);

}  // namespace fmsolve::io
