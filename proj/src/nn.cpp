#include "fmsolve/nn.hpp"

#include <cmath>

#include <fmt/format.h>

namespace fmsolve::nn {

void MlpConfig::validate() const {
  if (data_dim < 1 || hidden < 1 || n_blocks < 1) {
    throw ConfigError(fmt::format(
        "mlp config needs data_dim, hidden, n_blocks >= 1 (got {}, {}, {})", data_dim, hidden,
        n_blocks));
  }
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw ConfigError(
        fmt::format("time_embed_dim must be even and >= 2 (got {})", time_embed_dim));
  }
}

MlpParams MlpParams::zeros(const MlpConfig& config) {
  config.validate();
  MlpParams p;
  p.config = config;
  const int h = config.hidden;
  p.w_in = Matrix::Zero(h, config.input_dim());
  p.b_in = Vector::Zero(h);
  p.blocks.resize(static_cast<std::size_t>(config.n_blocks));
  for (Block& b : p.blocks) {
    b.w1 = Matrix::Zero(h, h);
    b.b1 = Vector::Zero(h);
    b.gamma = Vector::Zero(h);
    b.beta = Vector::Zero(h);
    b.w2 = Matrix::Zero(h, h);
    b.b2 = Vector::Zero(h);
  }
  p.w_out = Matrix::Zero(config.data_dim, h);
  p.b_out = Vector::Zero(config.data_dim);
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const ConstTensorRef& t : tensors(*this)) {
    n += static_cast<std::size_t>(t.size());
  }
  return n;
}

namespace {

template <typename Params, typename Ref>
std::vector<Ref> collect_tensors(Params& p) {
  std::vector<Ref> out;
  auto add_matrix = [&out](std::string name, auto& m) {
    out.push_back({std::move(name), m.data(), m.rows(), m.cols(), false});
  };
  auto add_vector = [&out](std::string name, auto& v) {
    out.push_back({std::move(name), v.data(), v.size(), 1, true});
  };
  add_matrix("input.weight", p.w_in);
  add_vector("input.bias", p.b_in);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = fmt::format("blocks.{}.", i);
    add_matrix(prefix + "linear1.weight", b.w1);
    add_vector(prefix + "linear1.bias", b.b1);
    add_vector(prefix + "norm.weight", b.gamma);
    add_vector(prefix + "norm.bias", b.beta);
    add_matrix(prefix + "linear2.weight", b.w2);
    add_vector(prefix + "linear2.bias", b.b2);
  }
  add_matrix("output.weight", p.w_out);
  add_vector("output.bias", p.b_out);
  return out;
}

}  // namespace

std::vector<TensorRef> tensors(MlpParams& p) { return collect_tensors<MlpParams, TensorRef>(p); }

std::vector<ConstTensorRef> tensors(const MlpParams& p) {
  return collect_tensors<const MlpParams, ConstTensorRef>(p);
}

void check_finite(const MlpParams& params) {
  for (const ConstTensorRef& t : tensors(params)) {
    if (!all_finite(t.span())) {
      throw NumericError(fmt::format("non-finite value in parameter tensor '{}'", t.name));
    }
  }
}

double time_frequency(int j, int dim) {
  const int half = dim / 2;
  if (half <= 1) {
    return 1.0;
  }
  return std::pow(1000.0, static_cast<double>(j) / (half - 1));
}

Vector time_embed(double t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw ConfigError(fmt::format("time embedding dimension must be even and >= 2 (got {})", dim));
  }
  Vector out(dim);
  for (int j = 0; j < dim / 2; ++j) {
    const double w = time_frequency(j, dim);
    out(2 * j) = std::sin(w * t);
    out(2 * j + 1) = std::cos(w * t);
  }
  return out;
}

MlpParams init_params(const MlpConfig& config, Rng& rng) {
  MlpParams p = MlpParams::zeros(config);
  auto fill_uniform = [&rng](double* data, Eigen::Index n, double bound) {
    for (Eigen::Index i = 0; i < n; ++i) {
      data[i] = rng.uniform(-bound, bound);
    }
  };
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(config.input_dim()));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  fill_uniform(p.w_in.data(), p.w_in.size(), in_bound);
  fill_uniform(p.b_in.data(), p.b_in.size(), in_bound);
  for (Block& b : p.blocks) {
    fill_uniform(b.w1.data(), b.w1.size(), hid_bound);
    fill_uniform(b.b1.data(), b.b1.size(), hid_bound);
    b.gamma.setOnes();
    b.beta.setZero();
    fill_uniform(b.w2.data(), b.w2.size(), hid_bound);
    fill_uniform(b.b2.data(), b.b2.size(), hid_bound);
  }
  return p;
}

namespace layers {

Matrix linear_forward(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  LinearGrads g;
  g.dx.noalias() = dy * w;
  g.dw.noalias() = dy.transpose() * x;
  g.db = dy.colwise().sum().transpose();
  return g;
}

Matrix layer_norm_forward(const Matrix& x, const Vector& gamma, const Vector& beta,
                          LayerNormCache* cache) {
  const auto width = static_cast<double>(x.cols());
  const Vector mean = x.rowwise().sum() / width;
  Matrix xhat = x.colwise() - mean;
  const Vector inv_std =
      ((xhat.array().square().rowwise().sum() / width) + kLayerNormEps).rsqrt().matrix();
  xhat.array().colwise() *= inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.transpose().array()).matrix();
  y.rowwise() += beta.transpose();
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return y;
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Vector& gamma,
                                   const Matrix& dy) {
  LayerNormGrads g;
  g.dbeta = dy.colwise().sum().transpose();
  g.dgamma = (dy.array() * cache.xhat.array()).colwise().sum().transpose();
  const Matrix dxhat = (dy.array().rowwise() * gamma.transpose().array()).matrix();
  const auto width = static_cast<double>(dy.cols());
  g.dx.resize(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / width;
    const double mean_dx = dxhat.row(i).dot(cache.xhat.row(i)) / width;
    g.dx.row(i) = cache.inv_std(i) *
                  (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx);
  }
  return g;
}

Matrix silu_forward(const Matrix& x) {
  return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

Matrix silu_backward(const Matrix& x, const Matrix& dy) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
  return (dy.array() * s * (1.0 + x.array() * (1.0 - s))).matrix();
}

}  // namespace layers

namespace {

struct BlockCache {
  Matrix h_in;
  Matrix pre;
  layers::LayerNormCache norm;
  Matrix normed;
  Matrix act;
};

struct ForwardCache {
  Matrix input;
  std::vector<BlockCache> blocks;
  Matrix h_last;
};

Matrix assemble_input(const MlpConfig& cfg, const PointBatch& x, const Vector& t) {
  if (x.cols() != cfg.data_dim) {
    throw ConfigError(fmt::format("input has {} columns, network expects {}", x.cols(),
                                  cfg.data_dim));
  }
  if (t.size() != x.rows()) {
    throw ConfigError(fmt::format("got {} times for {} rows", t.size(), x.rows()));
  }
  Matrix input(x.rows(), cfg.input_dim());
  input.leftCols(cfg.data_dim) = x;
  const int half = cfg.time_embed_dim / 2;
  for (int j = 0; j < half; ++j) {
    const double w = time_frequency(j, cfg.time_embed_dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      input(i, cfg.data_dim + 2 * j) = std::sin(w * t(i));
      input(i, cfg.data_dim + 2 * j + 1) = std::cos(w * t(i));
    }
  }
  return input;
}

PointBatch run_forward(const MlpParams& p, const PointBatch& x, const Vector& t,
                       ForwardCache* cache) {
  check_finite(p);
  Matrix input = assemble_input(p.config, x, t);
  Matrix h = layers::linear_forward(input, p.w_in, p.b_in);
  if (cache != nullptr) {
    cache->input = std::move(input);
    cache->blocks.resize(p.blocks.size());
  }
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const Block& b = p.blocks[i];
    Matrix pre = layers::linear_forward(h, b.w1, b.b1);
    layers::LayerNormCache norm;
    Matrix normed = layers::layer_norm_forward(pre, b.gamma, b.beta, cache ? &norm : nullptr);
    Matrix act = layers::silu_forward(normed);
    Matrix out = h + layers::linear_forward(act, b.w2, b.b2);
    if (cache != nullptr) {
      BlockCache& bc = cache->blocks[i];
      bc.h_in = std::move(h);
      bc.pre = std::move(pre);
      bc.norm = std::move(norm);
      bc.normed = std::move(normed);
      bc.act = std::move(act);
    }
    h = std::move(out);
  }
  PointBatch v = layers::linear_forward(h, p.w_out, p.b_out);
  if (cache != nullptr) {
    cache->h_last = std::move(h);
  }
  return v;
}

}  // namespace

PointBatch forward(const MlpParams& params, const PointBatch& x, const Vector& t) {
  return run_forward(params, x, t, nullptr);
}

LossAndGrad loss_and_grad(const MlpParams& params, const PointBatch& x_t, const Vector& t,
                          const PointBatch& u_t) {
  if (u_t.rows() != x_t.rows() || u_t.cols() != x_t.cols()) {
    throw ConfigError("loss_and_grad: target shape does not match input shape");
  }
  ForwardCache cache;
  const PointBatch v = run_forward(params, x_t, t, &cache);
  const Matrix residual = v - u_t;
  const auto n = static_cast<double>(x_t.rows());

  LossAndGrad out;
  out.loss = residual.squaredNorm() / n;
  out.grads = MlpParams::zeros(params.config);
  MlpParams& g = out.grads;

  const Matrix dv = (2.0 / n) * residual;
  layers::LinearGrads lg = layers::linear_backward(cache.h_last, params.w_out, dv);
  g.w_out = std::move(lg.dw);
  g.b_out = std::move(lg.db);
  Matrix dh = std::move(lg.dx);

  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const Block& b = params.blocks[i];
    const BlockCache& bc = cache.blocks[i];
    Block& gb = g.blocks[i];
    layers::LinearGrads l2 = layers::linear_backward(bc.act, b.w2, dh);
    gb.w2 = std::move(l2.dw);
    gb.b2 = std::move(l2.db);
    const Matrix dnormed = layers::silu_backward(bc.normed, l2.dx);
    layers::LayerNormGrads ng = layers::layer_norm_backward(bc.norm, b.gamma, dnormed);
    gb.gamma = std::move(ng.dgamma);
    gb.beta = std::move(ng.dbeta);
    layers::LinearGrads l1 = layers::linear_backward(bc.h_in, b.w1, ng.dx);
    gb.w1 = std::move(l1.dw);
    gb.b1 = std::move(l1.db);
    dh += l1.dx;  // residual path carries dh through unchanged
  }

  layers::LinearGrads li = layers::linear_backward(cache.input, params.w_in, dh);
  g.w_in = std::move(li.dw);
  g.b_in = std::move(li.db);
  return out;
}

AdamState AdamState::zeros_like(const MlpParams& params) {
  return AdamState{MlpParams::zeros(params.config), MlpParams::zeros(params.config), 0};
}

void adam_update(MlpParams& params, const MlpParams& grads, AdamState& state, double lr,
                 const AdamConfig& cfg) {
  if (!(grads.config == params.config) || !(state.m.config == params.config)) {
    throw ConfigError("adam_update: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<TensorRef> p = tensors(params);
  std::vector<ConstTensorRef> g = tensors(grads);
  std::vector<TensorRef> m = tensors(state.m);
  std::vector<TensorRef> v = tensors(state.v);
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (Eigen::Index i = 0; i < p[k].size(); ++i) {
      const double gi = g[k].data[i];
      double& mi = m[k].data[i];
      double& vi = v[k].data[i];
      mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
      vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      p[k].data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace fmsolve::nn
