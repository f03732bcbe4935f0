#pragma once

#include "fmsolve/numeric.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmsolve::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct MlpConfig {
  int data_dim = 2;
  int hidden = 256;
  int n_blocks = 4;
  int time_embed_dim = 64;

  void validate() const;
  [[nodiscard]] int input_dim() const { return data_dim + time_embed_dim; }
  bool operator==(const MlpConfig&) const = default;
};

/// One residual block: h <- h + W2 SiLU(LayerNorm(W1 h + b1)) + b2.
struct Block {
  Matrix w1;
  Vector b1;
  Vector gamma;
  Vector beta;
  Matrix w2;
  Vector b2;
};

/// All learnable tensors of the velocity network. Also used as the gradient
/// container and for Adam moments, which mirror the parameter shapes.
///
/// Network: h0 = W_in [x, embed(t)] + b_in, then n_blocks residual blocks,
/// then v = W_out h + b_out. Weights are stored (out, in).
struct MlpParams {
  MlpConfig config;
  Matrix w_in;
  Vector b_in;
  std::vector<Block> blocks;
  Matrix w_out;
  Vector b_out;

  /// Correctly shaped, all entries zero.
  static MlpParams zeros(const MlpConfig& config);
  [[nodiscard]] std::size_t parameter_count() const;
};

/// Named view of one tensor inside MlpParams. Vectors have cols == 1 and
/// is_vector set.
template <typename T>
struct BasicTensorRef {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool is_vector = false;

  [[nodiscard]] Eigen::Index size() const { return rows * cols; }
  [[nodiscard]] std::span<T> span() const { return {data, static_cast<std::size_t>(size())}; }
};
using TensorRef = BasicTensorRef<double>;
using ConstTensorRef = BasicTensorRef<const double>;

/// Tensors in a fixed canonical order (input, blocks in order, output).
std::vector<TensorRef> tensors(MlpParams& params);
std::vector<ConstTensorRef> tensors(const MlpParams& params);

/// Throws NumericError naming the first tensor with a non-finite entry.
void check_finite(const MlpParams& params);

/// Interleaved [sin(w_0 t), cos(w_0 t), sin(w_1 t), ...] with w_j spaced
/// geometrically from 1 to 1000 over j = 0 .. dim/2 - 1.
Vector time_embed(double t, int dim);
double time_frequency(int j, int dim);

/// Uniform(+-1/sqrt(fan_in)) for hidden linear layers, LayerNorm gamma = 1 and
/// beta = 0, and a zero output projection so the initial field is identically 0.
MlpParams init_params(const MlpConfig& config, Rng& rng);

/// Velocities for each row of x at the per-row times t.
PointBatch forward(const MlpParams& params, const PointBatch& x, const Vector& t);

struct LossAndGrad {
  double loss = 0.0;
  MlpParams grads;
};

/// Mean over rows of ||forward(x_t, t) - u_t||^2 and its gradient.
LossAndGrad loss_and_grad(const MlpParams& params, const PointBatch& x_t, const Vector& t,
                          const PointBatch& u_t);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::int64_t step = 0;

  static AdamState zeros_like(const MlpParams& params);
};

/// One bias-corrected Adam step applied in place.
void adam_update(MlpParams& params, const MlpParams& grads, AdamState& state, double lr,
                 const AdamConfig& cfg = {});

/// Building blocks of the network, exposed so each layer's gradient can be
/// checked in isolation.
namespace layers {

inline constexpr double kLayerNormEps = 1e-12;

Matrix linear_forward(const Matrix& x, const Matrix& w, const Vector& b);

struct LinearGrads {
  Matrix dx;
  Matrix dw;
  Vector db;
};
LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy);

struct LayerNormCache {
  Matrix xhat;
  Vector inv_std;
};
/// Row-wise normalization to zero mean and unit variance, then gamma * xhat + beta.
Matrix layer_norm_forward(const Matrix& x, const Vector& gamma, const Vector& beta,
                          LayerNormCache* cache = nullptr);

struct LayerNormGrads {
  Matrix dx;
  Vector dgamma;
  Vector dbeta;
};
LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Vector& gamma,
                                   const Matrix& dy);

Matrix silu_forward(const Matrix& x);
Matrix silu_backward(const Matrix& x, const Matrix& dy);

}  // namespace layers

}  // namespace fmsolve::nn
