#include "fmsolve/model_io.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace fmsolve::io {

void require_known_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context) {
  if (!obj.is_object()) {
    throw ConfigError(fmt::format("{}: expected a JSON object", context));
  }
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", context, item.key()));
    }
  }
}

namespace {

const Json& require(const Json& obj, const char* key, std::string_view context) {
  if (!obj.contains(key)) {
    throw ConfigError(fmt::format("{}: missing key '{}'", context, key));
  }
  return obj.at(key);
}

Json row_vector(const Eigen::RowVectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::RowVectorXd read_row_vector(const Json& j, Eigen::Index expected, std::string_view what) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    throw ConfigError(fmt::format("{}: expected {} entries, got {}", what, expected,
                                  values.size()));
  }
  return Eigen::Map<const Eigen::RowVectorXd>(values.data(), expected);
}

}  // namespace

Json model_to_json(const ModelFile& file) {
  const nn::MlpParams& p = file.model.params;
  Json params = Json::object();
  for (const nn::ConstTensorRef& t : nn::tensors(p)) {
    Json shape = t.is_vector ? Json::array({t.rows}) : Json::array({t.rows, t.cols});
    params[t.name] = {{"shape", shape},
                      {"data", std::vector<double>(t.data, t.data + t.size())}};
  }
  return Json{
      {"format_version", kModelFormatVersion},
      {"config",
       {{"data_dim", p.config.data_dim},
        {"hidden", p.config.hidden},
        {"n_blocks", p.config.n_blocks},
        {"time_embed_dim", p.config.time_embed_dim}}},
      {"seed", file.seed},
      {"params", params},
      {"normalization",
       {{"mean", row_vector(file.model.norm.mean)}, {"scale", row_vector(file.model.norm.scale)}}},
      {"training_meta", {{"epochs", file.meta.epochs}, {"final_loss", file.meta.final_loss}}},
  };
}

ModelFile model_from_json(const Json& doc) {
  try {
    require_known_keys(doc,
                       {"format_version", "config", "seed", "params", "normalization",
                        "training_meta"},
                       "model");
    const int version = require(doc, "format_version", "model").get<int>();
    if (version != kModelFormatVersion) {
      throw ConfigError(fmt::format("model: unsupported format_version {}", version));
    }
    const Json& cfg = require(doc, "config", "model");
    require_known_keys(cfg, {"data_dim", "hidden", "n_blocks", "time_embed_dim"}, "model.config");
    nn::MlpConfig config;
    config.data_dim = require(cfg, "data_dim", "model.config").get<int>();
    config.hidden = require(cfg, "hidden", "model.config").get<int>();
    config.n_blocks = require(cfg, "n_blocks", "model.config").get<int>();
    config.time_embed_dim = require(cfg, "time_embed_dim", "model.config").get<int>();

    ModelFile file;
    file.seed = require(doc, "seed", "model").get<std::uint64_t>();
    file.model.params = nn::MlpParams::zeros(config);

    const Json& params = require(doc, "params", "model");
    std::vector<nn::TensorRef> refs = nn::tensors(file.model.params);
    if (!params.is_object() || params.size() != refs.size()) {
      throw ConfigError(fmt::format("model.params: expected {} tensors", refs.size()));
    }
    for (nn::TensorRef& t : refs) {
      const std::string context = fmt::format("model.params.{}", t.name);
      const Json& entry = require(params, t.name.c_str(), "model.params");
      require_known_keys(entry, {"shape", "data"}, context);
      const auto shape = require(entry, "shape", context).get<std::vector<Eigen::Index>>();
      const std::vector<Eigen::Index> expected =
          t.is_vector ? std::vector<Eigen::Index>{t.rows} : std::vector<Eigen::Index>{t.rows, t.cols};
      if (shape != expected) {
        throw ConfigError(fmt::format("{}: shape does not match the config", context));
      }
      const auto data = require(entry, "data", context).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != t.size()) {
        throw ConfigError(fmt::format("{}: expected {} values, got {}", context, t.size(),
                                      data.size()));
      }
      std::copy(data.begin(), data.end(), t.data);
    }

    const Json& norm = require(doc, "normalization", "model");
    require_known_keys(norm, {"mean", "scale"}, "model.normalization");
    file.model.norm.mean =
        read_row_vector(require(norm, "mean", "model.normalization"), config.data_dim,
                        "model.normalization.mean");
    file.model.norm.scale =
        read_row_vector(require(norm, "scale", "model.normalization"), config.data_dim,
                        "model.normalization.scale");

    const Json& meta = require(doc, "training_meta", "model");
    require_known_keys(meta, {"epochs", "final_loss"}, "model.training_meta");
    file.meta.epochs = require(meta, "epochs", "model.training_meta").get<int>();
    file.meta.final_loss = require(meta, "final_loss", "model.training_meta").get<double>();
    return file;
  } catch (const Json::exception& e) {
    throw ConfigError(fmt::format("model: {}", e.what()));
  }
}

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out << model_to_json(file).dump() << '\n';
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot open model file '{}'", path.string()));
  }
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("model '{}': {}", path.string(), e.what()));
  }
  return model_from_json(doc);
}

}  // namespace fmsolve::io
