#include "diffpool/model_io.hpp"

#include <fstream>
#include <sstream>

#include "diffpool/errors.hpp"

namespace diffpool {
namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError("model file: missing field '" + path + key + "'");
  }
  return obj.at(key);
}

template <typename T>
T read_as(const json& value, const std::string& path) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ParseError("model file: field '" + path + "' has the wrong type");
  }
}

Vector read_vector(const json& value, const std::string& path) {
  if (!value.is_array()) throw ParseError("model file: field '" + path + "' is not an array");
  Vector out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw ParseError("model file: field '" + path + "[" + std::to_string(i) +
                       "]' is not a number");
    }
    out.push_back(value[i].get<double>());
  }
  return out;
}

Matrix read_matrix(const json& value, std::size_t rows, std::size_t cols,
                   const std::string& path) {
  if (!value.is_array() || value.size() != rows) {
    throw ParseError("model file: field '" + path + "' must have " + std::to_string(rows) +
                     " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    Vector row = read_vector(value[r], row_path);
    if (row.size() != cols) {
      throw ParseError("model file: field '" + row_path + "' must have " + std::to_string(cols) +
                       " entries");
    }
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

}  // namespace

json model_to_json(const Model& model) {
  json configs = json::array();
  for (const auto& c : model.configs()) {
    configs.push_back({{"kind", to_string(c.kind)},
                       {"in_dim", c.in_dim},
                       {"out_dim", c.out_dim},
                       {"pool_size", c.pool_size},
                       {"activation", to_string(c.activation)},
                       {"normalize", c.normalize}});
  }
  json groups = json::object();
  for (ParamGroup g : kAllParamGroups) {
    json per_layer = json::array();
    for (const auto& p : model.params()) {
      if (g == ParamGroup::weights) {
        per_layer.push_back(matrix_to_json(p.weights));
      } else {
        auto s = p.group(g);
        per_layer.push_back(json(std::vector<double>(s.begin(), s.end())));
      }
    }
    groups[std::string(to_string(g))] = std::move(per_layer);
  }
  json frozen = json::array();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (ParamGroup g : kAllParamGroups) {
      if (model.frozen(l, g)) frozen.push_back({{"layer", l}, {"group", to_string(g)}});
    }
  }
  const auto& meta = model.metadata();
  return {{"format_version", kModelFormatVersion},
          {"layer_configs", std::move(configs)},
          {"params_by_group", std::move(groups)},
          {"metadata",
           {{"seed", meta.seed},
            {"model_type", meta.model_type},
            {"history", meta.history},
            {"frozen", std::move(frozen)}}}};
}

Model model_from_json(const json& doc) {
  const int version = read_as<int>(require(doc, "format_version", ""), "format_version");
  if (version != kModelFormatVersion) {
    throw ParseError("model file: unsupported format_version " + std::to_string(version));
  }
  const json& jconfigs = require(doc, "layer_configs", "");
  if (!jconfigs.is_array() || jconfigs.empty()) {
    throw ParseError("model file: field 'layer_configs' must be a non-empty array");
  }
  std::vector<LayerConfig> configs;
  for (std::size_t l = 0; l < jconfigs.size(); ++l) {
    const std::string path = "layer_configs[" + std::to_string(l) + "].";
    const json& jc = jconfigs[l];
    LayerConfig c;
    try {
      c.kind = parse_layer_kind(read_as<std::string>(require(jc, "kind", path), path + "kind"));
      c.activation = parse_activation(
          read_as<std::string>(require(jc, "activation", path), path + "activation"));
    } catch (const ConfigError& e) {
      throw ParseError(std::string("model file: ") + e.what() + " in '" + path + "'");
    }
    c.in_dim = read_as<std::size_t>(require(jc, "in_dim", path), path + "in_dim");
    c.out_dim = read_as<std::size_t>(require(jc, "out_dim", path), path + "out_dim");
    c.pool_size = read_as<std::size_t>(require(jc, "pool_size", path), path + "pool_size");
    c.normalize = read_as<bool>(require(jc, "normalize", path), path + "normalize");
    configs.push_back(c);
  }
  try {
    validate_architecture(configs);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("model file: layer_configs: ") + e.what());
  }

  const json& jgroups = require(doc, "params_by_group", "");
  std::vector<LayerParams> params(configs.size());
  for (ParamGroup g : kAllParamGroups) {
    const std::string name(to_string(g));
    const json& per_layer = require(jgroups, name, "params_by_group.");
    if (!per_layer.is_array() || per_layer.size() != configs.size()) {
      throw ParseError("model file: field 'params_by_group." + name + "' must list " +
                       std::to_string(configs.size()) + " layers");
    }
    for (std::size_t l = 0; l < configs.size(); ++l) {
      const std::string path = "params_by_group." + name + "[" + std::to_string(l) + "]";
      if (g == ParamGroup::weights) {
        params[l].weights = read_matrix(per_layer[l], configs[l].in_dim, configs[l].out_dim, path);
      } else {
        Vector v = read_vector(per_layer[l], path);
        switch (g) {
          case ParamGroup::biases: params[l].biases = std::move(v); break;
          case ParamGroup::rho: params[l].rho = std::move(v); break;
          case ParamGroup::mu: params[l].mu = std::move(v); break;
          case ParamGroup::beta: params[l].beta = std::move(v); break;
          case ParamGroup::eta: params[l].eta = std::move(v); break;
          case ParamGroup::lhuc: params[l].lhuc = std::move(v); break;
          case ParamGroup::weights: break;
        }
      }
    }
  }

  const json& jmeta = require(doc, "metadata", "");
  ModelMetadata meta;
  meta.seed = read_as<std::uint64_t>(require(jmeta, "seed", "metadata."), "metadata.seed");
  meta.model_type =
      read_as<std::string>(require(jmeta, "model_type", "metadata."), "metadata.model_type");
  meta.history = require(jmeta, "history", "metadata.");

  Model model;
  try {
    model = Model(std::move(configs), std::move(params), std::move(meta));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("model file: params_by_group: ") + e.what());
  }
  if (jmeta.contains("frozen")) {
    for (const auto& f : jmeta.at("frozen")) {
      const auto l = read_as<std::size_t>(require(f, "layer", "metadata.frozen[]."),
                                          "metadata.frozen[].layer");
      if (l >= model.num_layers()) throw ParseError("model file: 'metadata.frozen' layer out of range");
      try {
        model.set_frozen(l, parse_param_group(read_as<std::string>(
                                require(f, "group", "metadata.frozen[]."), "metadata.frozen[].group")),
                         true);
      } catch (const ConfigError& e) {
        throw ParseError(std::string("model file: metadata.frozen: ") + e.what());
      }
    }
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file " + path.string());
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error("failed writing model file " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError("model file " + path.string() + ": malformed JSON (" + e.what() + ")");
  }
  return model_from_json(doc);
}

}  // namespace diffpool
