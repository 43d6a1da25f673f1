#include "diffpool/network.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "diffpool/errors.hpp"
#include "diffpool/loss.hpp"

namespace diffpool {
namespace {

std::atomic<std::uint64_t> g_next_revision{1};

std::size_t group_index(ParamGroup g) { return static_cast<std::size_t>(g); }

std::string layer_name(std::size_t l) { return "layer " + std::to_string(l); }

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::affine: return "affine";
    case LayerKind::lp_pool: return "lp_pool";
    case LayerKind::gauss_pool: return "gauss_pool";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "affine") return LayerKind::affine;
  if (name == "lp_pool") return LayerKind::lp_pool;
  if (name == "gauss_pool") return LayerKind::gauss_pool;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::weights: return "weights";
    case ParamGroup::biases: return "biases";
    case ParamGroup::rho: return "rho";
    case ParamGroup::mu: return "mu";
    case ParamGroup::beta: return "beta";
    case ParamGroup::eta: return "eta";
    case ParamGroup::lhuc: return "lhuc";
  }
  return "?";
}

ParamGroup parse_param_group(std::string_view name) {
  for (ParamGroup g : kAllParamGroups) {
    if (name == to_string(g)) return g;
  }
  if (name == "bias") return ParamGroup::biases;
  if (name == "p") return ParamGroup::rho;
  throw ConfigError("unknown parameter group '" + std::string(name) + "'");
}

std::span<double> LayerParams::group(ParamGroup g) {
  switch (g) {
    case ParamGroup::weights: return weights.data();
    case ParamGroup::biases: return biases;
    case ParamGroup::rho: return rho;
    case ParamGroup::mu: return mu;
    case ParamGroup::beta: return beta;
    case ParamGroup::eta: return eta;
    case ParamGroup::lhuc: return lhuc;
  }
  return {};
}

std::span<const double> LayerParams::group(ParamGroup g) const {
  return const_cast<LayerParams*>(this)->group(g);
}

LayerParams LayerParams::zeros_like() const {
  LayerParams z;
  z.weights = Matrix(weights.rows(), weights.cols());
  z.biases.assign(biases.size(), 0.0);
  z.rho.assign(rho.size(), 0.0);
  z.mu.assign(mu.size(), 0.0);
  z.beta.assign(beta.size(), 0.0);
  z.eta.assign(eta.size(), 0.0);
  z.lhuc.assign(lhuc.size(), 0.0);
  return z;
}

// ---------------------------------------------------------------------------

Model::Model(std::vector<LayerConfig> configs, std::vector<LayerParams> params, ModelMetadata meta)
    : configs_(std::move(configs)),
      params_(std::move(params)),
      frozen_(configs_.size()),
      metadata_(std::move(meta)) {
  validate_architecture(configs_);
  if (params_.size() != configs_.size()) {
    throw ConfigError("model has " + std::to_string(configs_.size()) + " layers but " +
                      std::to_string(params_.size()) + " parameter sets");
  }
  for (std::size_t l = 0; l < configs_.size(); ++l) {
    const auto& c = configs_[l];
    const auto& p = params_[l];
    const std::size_t pools = c.num_pools();
    auto expect = [&](ParamGroup g, std::size_t n) {
      if (p.group(g).size() != n) {
        throw ConfigError(layer_name(l) + ": group '" + std::string(to_string(g)) + "' has " +
                          std::to_string(p.group(g).size()) + " values, expected " +
                          std::to_string(n));
      }
    };
    if (p.weights.rows() != c.in_dim || p.weights.cols() != c.out_dim) {
      throw ConfigError(layer_name(l) + ": weight matrix shape does not match layer config");
    }
    expect(ParamGroup::biases, c.out_dim);
    expect(ParamGroup::rho, c.kind == LayerKind::lp_pool ? pools : 0);
    expect(ParamGroup::mu, c.kind == LayerKind::gauss_pool ? pools : 0);
    expect(ParamGroup::beta, c.kind == LayerKind::gauss_pool ? pools : 0);
    expect(ParamGroup::eta, c.kind == LayerKind::gauss_pool ? pools : 0);
    expect(ParamGroup::lhuc, pools);
    frozen_[l].fill(false);
  }
  touch();
}

void Model::touch() { revision_ = g_next_revision.fetch_add(1, std::memory_order_relaxed); }

LayerParams& Model::mutable_params(std::size_t l) {
  touch();
  return params_.at(l);
}

std::vector<LayerParams>& Model::mutable_params() {
  touch();
  return params_;
}

bool Model::frozen(std::size_t l, ParamGroup g) const { return frozen_.at(l)[group_index(g)]; }

void Model::set_frozen(std::size_t l, ParamGroup g, bool frozen) {
  frozen_.at(l)[group_index(g)] = frozen;
}

void Model::freeze_all() {
  for (auto& f : frozen_) f.fill(true);
}

void Model::unfreeze_all() {
  for (auto& f : frozen_) f.fill(false);
}

PoolType Model::pool_type() const {
  for (const auto& c : configs_) {
    if (c.kind == LayerKind::lp_pool) return PoolType::lp;
    if (c.kind == LayerKind::gauss_pool) return PoolType::gauss;
  }
  return PoolType::none;
}

std::vector<std::size_t> Model::pool_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < configs_.size(); ++l) {
    if (configs_[l].is_pool()) out.push_back(l);
  }
  return out;
}

bool Model::same_parameters(const Model& other) const {
  return configs_ == other.configs_ && params_ == other.params_;
}

// ---------------------------------------------------------------------------

void validate_architecture(const std::vector<LayerConfig>& configs) {
  if (configs.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t l = 0; l < configs.size(); ++l) {
    const auto& c = configs[l];
    const bool last = l + 1 == configs.size();
    if (c.in_dim == 0 || c.out_dim == 0) throw ConfigError(layer_name(l) + ": zero dimension");
    if (l > 0 && configs[l - 1].output_dim() != c.in_dim) {
      throw ConfigError(layer_name(l) + ": in_dim " + std::to_string(c.in_dim) +
                        " does not match previous output " +
                        std::to_string(configs[l - 1].output_dim()));
    }
    if (c.is_pool()) {
      if (c.pool_size == 0 || c.out_dim % c.pool_size != 0) {
        throw ConfigError(layer_name(l) + ": pool size " + std::to_string(c.pool_size) +
                          " does not divide layer width " + std::to_string(c.out_dim));
      }
      if (c.kind == LayerKind::gauss_pool && c.activation != ActivationKind::tanh &&
          c.activation != ActivationKind::sigmoid) {
        throw ConfigError(layer_name(l) + ": gauss pool needs tanh or sigmoid inputs");
      }
      if (last) throw ConfigError("final layer must be affine+softmax");
    } else {
      if (last && c.activation != ActivationKind::softmax) {
        throw ConfigError("final layer must be affine+softmax");
      }
      if (!last && c.activation == ActivationKind::softmax) {
        throw ConfigError(layer_name(l) + ": softmax is only allowed on the final layer");
      }
    }
  }
}

Model build_model(std::vector<LayerConfig> configs, Rng& rng, const InitSpec& init) {
  validate_architecture(configs);
  std::vector<LayerParams> params;
  params.reserve(configs.size());
  for (const auto& c : configs) {
    LayerParams p;
    const double limit = std::sqrt(6.0 / static_cast<double>(c.in_dim + c.out_dim));
    p.weights = Matrix(c.in_dim, c.out_dim);
    for (double& w : p.weights.data()) w = rng.uniform(-limit, limit);
    p.biases.assign(c.out_dim, 0.0);
    const std::size_t pools = c.num_pools();
    if (c.kind == LayerKind::lp_pool) p.rho.assign(pools, init.rho);
    if (c.kind == LayerKind::gauss_pool) {
      p.mu.resize(pools);
      p.beta.resize(pools);
      for (std::size_t k = 0; k < pools; ++k) {
        p.mu[k] = rng.normal(init.mu_mean, init.mu_stddev);
        p.beta[k] = rng.normal(init.beta_mean, init.beta_stddev);
      }
      p.eta.assign(pools, init.eta);
    }
    p.lhuc.assign(pools, init.lhuc_r);
    params.push_back(std::move(p));
  }
  ModelMetadata meta;
  meta.seed = rng.seed();
  meta.model_type = "dnn";
  for (const auto& c : configs) {
    if (c.kind == LayerKind::lp_pool) meta.model_type = "lp";
    if (c.kind == LayerKind::gauss_pool) meta.model_type = "gauss";
  }
  return Model(std::move(configs), std::move(params), std::move(meta));
}

std::vector<LayerConfig> make_architecture(std::string_view model_type, std::size_t input_dim,
                                           std::span<const std::size_t> hidden,
                                           std::size_t pool_size, std::size_t num_classes,
                                           bool normalize) {
  std::vector<LayerConfig> out;
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    LayerConfig c;
    c.in_dim = in;
    c.out_dim = width;
    if (model_type == "dnn") {
      c.kind = LayerKind::affine;
      c.activation = ActivationKind::sigmoid;
    } else if (model_type == "lp") {
      c.kind = LayerKind::lp_pool;
      c.pool_size = pool_size;
      c.activation = ActivationKind::identity;
      c.normalize = normalize;
    } else if (model_type == "gauss") {
      c.kind = LayerKind::gauss_pool;
      c.pool_size = pool_size;
      c.activation = ActivationKind::tanh;
    } else {
      throw ConfigError("unknown model type '" + std::string(model_type) +
                        "' (expected dnn, lp or gauss)");
    }
    out.push_back(c);
    in = c.output_dim();
  }
  out.push_back({LayerKind::affine, in, num_classes, 1, ActivationKind::softmax, false});
  validate_architecture(out);
  return out;
}

// ---------------------------------------------------------------------------

ForwardResult forward(const Model& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " features, model expects " + std::to_string(model.input_dim()));
  }
  ForwardResult r;
  r.trace.revision = model.revision();
  r.trace.layers.resize(model.num_layers());
  Matrix h = x;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& c = model.config(l);
    const auto& p = model.params(l);
    auto& t = r.trace.layers[l];
    t.pre = affine_forward(h, p.weights, p.biases);
    switch (c.kind) {
      case LayerKind::affine:
        t.output = activation_forward(t.pre, c.activation);
        break;
      case LayerKind::lp_pool: {
        auto lp = lp_forward(t.pre, c.pool_spec(), {p.rho});
        t.pooled = std::move(lp.out);
        t.lp = std::move(lp.ws);
        t.output = lhuc_apply(t.pooled, {p.lhuc});
        break;
      }
      case LayerKind::gauss_pool: {
        auto g = gauss_forward(t.pre, c.pool_spec(), {p.mu, p.beta, p.eta}, c.activation);
        t.pooled = std::move(g.out);
        t.gauss = std::move(g.ws);
        t.output = lhuc_apply(t.pooled, {p.lhuc});
        break;
      }
    }
    t.input = std::move(h);
    h = t.output;
  }
  r.probs = h;
  r.trace.probs = std::move(h);
  return r;
}

Matrix predict(const Model& model, const Matrix& x) { return forward(model, x).probs; }

BackwardResult backward(const Model& model, const ForwardTrace& trace,
                        std::span<const int> targets) {
  if (trace.revision != model.revision() || trace.layers.size() != model.num_layers()) {
    throw ContractViolation("backward: trace was recorded before the model last changed");
  }
  auto ce = cross_entropy(trace.probs, targets);
  BackwardResult r;
  r.loss = ce.loss;
  r.grads.resize(model.num_layers());

  Matrix grad = std::move(ce.grad_logits);  // dL/d(layer output)
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const auto& c = model.config(l);
    const auto& p = model.params(l);
    const auto& t = trace.layers[l];
    LayerParams g = p.zeros_like();
    Matrix grad_pre;
    switch (c.kind) {
      case LayerKind::affine:
        grad_pre = c.activation == ActivationKind::softmax
                       ? std::move(grad)
                       : activation_backward(t.output, grad, c.activation);
        break;
      case LayerKind::lp_pool: {
        auto lh = lhuc_backward(t.pooled, {p.lhuc}, grad);
        g.lhuc = std::move(lh.grad_r);
        auto lg = lp_backward(t.lp, lh.grad_pooled);
        g.rho = std::move(lg.grad_rho);
        grad_pre = std::move(lg.grad_a);
        break;
      }
      case LayerKind::gauss_pool: {
        auto lh = lhuc_backward(t.pooled, {p.lhuc}, grad);
        g.lhuc = std::move(lh.grad_r);
        auto gg = gauss_backward(t.gauss, lh.grad_pooled);
        g.mu = std::move(gg.grad_mu);
        g.beta = std::move(gg.grad_beta);
        g.eta = std::move(gg.grad_eta);
        grad_pre = std::move(gg.grad_a);
        break;
      }
    }
    auto ag = affine_backward(t.input, p.weights, grad_pre);
    g.weights = std::move(ag.grad_w);
    g.biases = std::move(ag.grad_b);
    grad = std::move(ag.grad_x);

    for (ParamGroup group : kAllParamGroups) {
      if (model.frozen(l, group)) {
        auto s = g.group(group);
        std::fill(s.begin(), s.end(), 0.0);
      }
    }
    r.grads[l] = std::move(g);
  }
  return r;
}

}  // namespace diffpool
