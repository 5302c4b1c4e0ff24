#ifndef GMG_NET_HPP
#define GMG_NET_HPP

#include "gmg/common.hpp"
#include "gmg/rng.hpp"

#include <vector>

namespace gmg {

enum class Activation { Tanh, Relu };

inline const char* activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

struct MlpLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Feedforward map: affine-activation chain with a final affine layer.
struct MlpParams {
  std::vector<MlpLayer> layers;
  Activation activation = Activation::Tanh;

  Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.back().weight.rows(); }
};

/// Per-layer uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization.
inline MlpParams mlp_init(const std::vector<int>& dims, Activation activation, Rng& rng) {
  require(dims.size() >= 2, ErrorCode::DimensionMismatch,
          "mlp needs at least input and output dimensions");
  MlpParams params;
  params.activation = activation;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    double bound = std::sqrt(1.0 / static_cast<double>(dims[l]));
    layer.weight = Matrix::NullaryExpr(
        dims[l + 1], dims[l], [&]() { return rng.uniform(-bound, bound); });
    layer.bias = Vector::NullaryExpr(dims[l + 1],
                                     [&]() { return rng.uniform(-bound, bound); });
    params.layers.push_back(std::move(layer));
  }
  return params;
}

inline Matrix apply_activation(const Matrix& z, Activation activation) {
  if (activation == Activation::Tanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

inline Matrix activation_derivative(const Matrix& z, Activation activation) {
  if (activation == Activation::Tanh)
    return (1.0 - z.array().tanh().square()).matrix();
  return (z.array() > 0.0).cast<double>().matrix();
}

/// Rowwise forward pass: inputs is n x d_in, result n x d_out. Hidden layers
/// use the activation, the final layer is affine.
inline Matrix mlp_forward(const MlpParams& params, const Matrix& inputs) {
  require(inputs.cols() == params.input_dim(), ErrorCode::DimensionMismatch,
          "mlp_forward: input dimension mismatch");
  Matrix h = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const MlpLayer& layer = params.layers[l];
    Matrix z = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    h = (l + 1 == params.layers.size()) ? z : apply_activation(z, params.activation);
  }
  return h;
}

struct MlpGradients {
  std::vector<MlpLayer> layers;  // same shapes as the parameters
  Matrix inputs;                 // d <cotangent, forward(inputs)> / d inputs
};

/// Exact reverse-mode gradients of <cotangent, forward(inputs)> with respect
/// to all parameters and the inputs.
inline MlpGradients mlp_backward(const MlpParams& params, const Matrix& inputs,
                                 const Matrix& cotangent) {
  require(inputs.cols() == params.input_dim(), ErrorCode::DimensionMismatch,
          "mlp_backward: input dimension mismatch");
  require(cotangent.rows() == inputs.rows() &&
              cotangent.cols() == params.output_dim(),
          ErrorCode::DimensionMismatch, "mlp_backward: cotangent shape mismatch");

  const std::size_t depth = params.layers.size();
  std::vector<Matrix> activations(depth + 1);  // activations[l] feeds layer l
  std::vector<Matrix> pre(depth);
  activations[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = (activations[l] * params.layers[l].weight.transpose()).rowwise() +
             params.layers[l].bias.transpose();
    activations[l + 1] =
        (l + 1 == depth) ? pre[l] : apply_activation(pre[l], params.activation);
  }

  MlpGradients grads;
  grads.layers.resize(depth);
  Matrix delta = cotangent;  // d objective / d pre[l]
  for (std::size_t l = depth; l-- > 0;) {
    if (l + 1 != depth)
      delta = delta.cwiseProduct(activation_derivative(pre[l], params.activation));
    grads.layers[l].weight = delta.transpose() * activations[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    delta = (delta * params.layers[l].weight).eval();
  }
  grads.inputs = delta;
  return grads;
}

struct LossRecord {
  long step = 0;
  double fit_loss = 0.0;
  double reg_loss = 0.0;
};

struct TrainState {
  MlpParams params;
  std::vector<MlpLayer> first_moment;   // Adam m, shaped like params
  std::vector<MlpLayer> second_moment;  // Adam v
  long step = 0;
  std::uint64_t rng_seed = 0;
  std::vector<LossRecord> loss_trace;
};

inline TrainState make_train_state(MlpParams params, std::uint64_t seed) {
  TrainState state;
  state.rng_seed = seed;
  for (const MlpLayer& layer : params.layers) {
    MlpLayer zero{Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                  Vector::Zero(layer.bias.size())};
    state.first_moment.push_back(zero);
    state.second_moment.push_back(zero);
  }
  state.params = std::move(params);
  return state;
}

/// Standard bias-corrected Adam update; increments the step counter.
inline void adam_step(TrainState& state, const std::vector<MlpLayer>& gradients,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  require(gradients.size() == state.params.layers.size(), ErrorCode::DimensionMismatch,
          "adam_step: gradient count mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(beta1, t);
  const double correction2 = 1.0 - std::pow(beta2, t);
  auto update = [&](auto& m, auto& v, auto& param, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -=
        lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    update(state.first_moment[l].weight, state.second_moment[l].weight,
           state.params.layers[l].weight, gradients[l].weight);
    update(state.first_moment[l].bias, state.second_moment[l].bias,
           state.params.layers[l].bias, gradients[l].bias);
  }
}

/// Concatenates all parameter gradients into one vector (stability analysis
/// compares these across batches).
inline Vector flatten_gradients(const std::vector<MlpLayer>& layers) {
  Eigen::Index total = 0;
  for (const MlpLayer& l : layers) total += l.weight.size() + l.bias.size();
  Vector flat(total);
  Eigen::Index offset = 0;
  for (const MlpLayer& l : layers) {
    flat.segment(offset, l.weight.size()) =
        Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
    offset += l.weight.size();
    flat.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return flat;
}

}  // namespace gmg

#endif  // GMG_NET_HPP
