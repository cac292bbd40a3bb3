#pragma once

// Feed-forward policy network: tanh hidden layers, linear logits, softmax
// onto the simplex. Gradients are derived by hand and checked against
// central finite differences.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/linalg.hpp"
#include "dynalloc/weights.hpp"

namespace dynalloc::policy {

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Network parameters. Gradients use the same type.
struct MlpParams {
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_size() const { return layers.front().weight.cols(); }
  std::size_t output_size() const { return layers.back().weight.rows(); }
  std::size_t num_params() const;

  /// Layer by layer: weights row-major, then bias.
  Vector flatten() const;
  void assign_flat(std::span<const double> flat);
  MlpParams zeros_like() const;

  friend bool operator==(const MlpParams& a, const MlpParams& b) { return a.layers == b.layers; }
};

/// Intermediate values retained by forward() for backward().
struct ForwardCache {
  // activations[0] is the input; activations[l] is the tanh output of hidden
  // layer l. The last layer's output is stored in `logits`.
  std::vector<Vector> activations;
  Vector logits;
  Vector weights;  // softmax(logits); empty when only logits were requested
};

struct PolicyOutput {
  WeightVector weights;
  ForwardCache cache;
};

/// Glorot-uniform weights, zero biases.
MlpParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed);
inline MlpParams init_params(std::initializer_list<std::size_t> layer_sizes, std::uint64_t seed) {
  return init_params(std::span<const std::size_t>(layer_sizes.begin(), layer_sizes.size()), seed);
}

/// Max-subtracted softmax.
Vector softmax(std::span<const double> logits);
/// Vector-Jacobian product through softmax: g_i -> w_i (g_i - w.g).
Vector softmax_vjp(std::span<const double> weights, std::span<const double> grad_weights);

/// Raw network output (logits for the actor, a value for a critic).
Vector forward_logits(const MlpParams& params, std::span<const double> x,
                      ForwardCache* cache = nullptr);

PolicyOutput forward(const MlpParams& params, std::span<const double> x);

/// Accumulates dL/dtheta into `grad` given dL/dlogits. Returns dL/dx.
Vector backward_logits(const MlpParams& params, const ForwardCache& cache,
                       std::span<const double> grad_logits, MlpParams& grad);

/// dL/dtheta given dL/dw for the softmax output of a forward() call.
MlpParams backward(const MlpParams& params, const ForwardCache& cache,
                   std::span<const double> grad_weights);

/// Central differences of `loss` at every parameter.
MlpParams finite_diff_grad(const MlpParams& params,
                           const std::function<double(const MlpParams&)>& loss, double h = 1e-5);

/// Gradient of l1 * sum|W| + l2 * sum W^2 over weight matrices (biases are
/// not penalized); the L1 subgradient at zero is zero.
MlpParams penalty_grad(const MlpParams& params, double l1, double l2);
double penalty(const MlpParams& params, double l1, double l2);

void add_scaled(MlpParams& dst, const MlpParams& src, double scale);
double global_norm(const MlpParams& g);
/// Rescales `g` so its global norm is at most `max_norm`.
void clip_global_norm(MlpParams& g, double max_norm);

/// JSON checkpoint: {"format", "version", "layer_sizes", "seed", "params"}.
/// Doubles are written in shortest round-trip form.
std::string to_json(const MlpParams& params);
MlpParams from_json(std::string_view text);
void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dynalloc::policy
