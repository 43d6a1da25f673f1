#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffpool/activation.hpp"
#include "diffpool/matrix.hpp"
#include "diffpool/pooling.hpp"
#include "diffpool/rng.hpp"

namespace diffpool {

enum class LayerKind { affine, lp_pool, gauss_pool };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// One layer of the stack. Every layer starts with an affine map
/// in_dim -> out_dim. Pooling layers then group those out_dim units into
/// out_dim / pool_size pools and apply LHUC scaling to the pooled outputs.
struct LayerConfig {
  LayerKind kind = LayerKind::affine;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t pool_size = 1;
  // Affine layers: output nonlinearity. Gauss pools: phi applied before pooling.
  ActivationKind activation = ActivationKind::sigmoid;
  bool normalize = false;

  bool is_pool() const { return kind != LayerKind::affine; }
  std::size_t num_pools() const { return is_pool() ? out_dim / pool_size : 0; }
  std::size_t output_dim() const { return is_pool() ? num_pools() : out_dim; }
  PoolSpec pool_spec() const { return {pool_size, num_pools(), normalize}; }

  bool operator==(const LayerConfig&) const = default;
};

/// Named parameter groups; the unit of freezing and adaptation.
enum class ParamGroup { weights, biases, rho, mu, beta, eta, lhuc };

inline constexpr std::array<ParamGroup, 7> kAllParamGroups = {
    ParamGroup::weights, ParamGroup::biases, ParamGroup::rho, ParamGroup::mu,
    ParamGroup::beta,    ParamGroup::eta,    ParamGroup::lhuc};

std::string_view to_string(ParamGroup group);
/// Accepts the group names plus "bias" and "p" as aliases.
ParamGroup parse_param_group(std::string_view name);

struct LayerParams {
  Matrix weights;  // in_dim x out_dim; column j feeds unit j
  Vector biases;
  Vector rho;
  Vector mu;
  Vector beta;
  Vector eta;
  Vector lhuc;

  std::span<double> group(ParamGroup g);
  std::span<const double> group(ParamGroup g) const;
  bool has(ParamGroup g) const { return !group(g).empty(); }

  /// Same shapes, all zeros.
  LayerParams zeros_like() const;

  bool operator==(const LayerParams&) const = default;
};

/// Per-layer gradients, shaped exactly like the model's LayerParams.
using Gradients = std::vector<LayerParams>;

struct InitSpec {
  double rho = 2.0;
  double mu_mean = 0.0;
  double mu_stddev = 1.0;
  double beta_mean = 1.0;
  double beta_stddev = 0.5;
  double eta = 1.0;
  double lhuc_r = 0.0;
};

struct ModelMetadata {
  std::uint64_t seed = 0;
  std::string model_type;  // "dnn", "lp" or "gauss"
  nlohmann::json history = nlohmann::json::array();

  bool operator==(const ModelMetadata&) const = default;
};

enum class PoolType { none, lp, gauss };

class Model {
 public:
  Model() = default;
  Model(std::vector<LayerConfig> configs, std::vector<LayerParams> params, ModelMetadata meta);

  std::size_t num_layers() const { return configs_.size(); }
  const std::vector<LayerConfig>& configs() const { return configs_; }
  const LayerConfig& config(std::size_t l) const { return configs_.at(l); }

  const std::vector<LayerParams>& params() const { return params_; }
  const LayerParams& params(std::size_t l) const { return params_.at(l); }
  /// Mutable access invalidates every trace taken from this model.
  LayerParams& mutable_params(std::size_t l);
  std::vector<LayerParams>& mutable_params();

  bool frozen(std::size_t l, ParamGroup g) const;
  void set_frozen(std::size_t l, ParamGroup g, bool frozen);
  void freeze_all();
  void unfreeze_all();

  /// Changes whenever parameters may have been modified; unique per process.
  std::uint64_t revision() const { return revision_; }

  std::size_t input_dim() const { return configs_.front().in_dim; }
  std::size_t num_classes() const { return configs_.back().out_dim; }
  PoolType pool_type() const;
  /// Indices of pooling layers, bottom first.
  std::vector<std::size_t> pool_layers() const;

  ModelMetadata& metadata() { return metadata_; }
  const ModelMetadata& metadata() const { return metadata_; }

  /// Parameters and configuration equal (metadata and freeze flags ignored).
  bool same_parameters(const Model& other) const;

 private:
  void touch();

  std::vector<LayerConfig> configs_;
  std::vector<LayerParams> params_;
  std::vector<std::array<bool, kAllParamGroups.size()>> frozen_;
  ModelMetadata metadata_;
  std::uint64_t revision_ = 0;
};

/// Checks dimension chaining, pool divisibility and the softmax-last rule.
void validate_architecture(const std::vector<LayerConfig>& configs);

Model build_model(std::vector<LayerConfig> configs, Rng& rng, const InitSpec& init = {});

/// Convenience stacks used by the CLI and experiments. `hidden` lists affine
/// widths; pooled models group each into pools of `pool_size`.
std::vector<LayerConfig> make_architecture(std::string_view model_type, std::size_t input_dim,
                                           std::span<const std::size_t> hidden,
                                           std::size_t pool_size, std::size_t num_classes,
                                           bool normalize = false);

struct LayerTrace {
  Matrix input;
  Matrix pre;     // affine output
  Matrix pooled;  // pooling layers: pool output before LHUC
  Matrix output;
  LpWorkspace lp;
  GaussWorkspace gauss;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix probs;
  std::uint64_t revision = 0;
};

struct ForwardResult {
  Matrix probs;
  ForwardTrace trace;
};

ForwardResult forward(const Model& model, const Matrix& x);

/// Class posteriors only.
Matrix predict(const Model& model, const Matrix& x);

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

/// Mean cross-entropy gradients for every group; frozen groups are zero.
/// Throws ContractViolation if the model changed since `trace` was taken.
BackwardResult backward(const Model& model, const ForwardTrace& trace,
                        std::span<const int> targets);

}  // namespace diffpool
