#include "dynalloc/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/kernels.hpp"
#include "json.hpp"

namespace dynalloc::policy {

namespace {

constexpr int kCheckpointVersion = 1;

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError(std::string("non-finite ") + what);
  }
}

template <typename F>
void for_each_param(MlpParams& p, F&& f) {
  for (auto& layer : p.layers) {
    for (double& w : layer.weight.flat()) f(w);
    for (double& b : layer.bias) f(b);
  }
}

}  // namespace

std::vector<std::size_t> MlpParams::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().weight.cols());
  for (const auto& l : layers) sizes.push_back(l.weight.rows());
  return sizes;
}

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Vector MlpParams::flatten() const {
  Vector out;
  out.reserve(num_params());
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.flat().begin(), l.weight.flat().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void MlpParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != num_params()) throw Error("flat parameter length mismatch");
  std::size_t k = 0;
  for_each_param(*this, [&](double& v) { v = flat[k++]; });
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.seed = seed;
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
  }
  return z;
}

MlpParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw Error("need input and output sizes");
  if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw Error("layer sizes must be positive");
  }
  MlpParams p;
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    Layer layer{Matrix(out, in), Vector(out, 0.0)};
    for (double& w : layer.weight.flat()) w = dist(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Vector softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - mx);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

Vector softmax_vjp(std::span<const double> weights, std::span<const double> grad_weights) {
  const double inner = kernels::dot(weights, grad_weights);
  Vector g(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) g[i] = weights[i] * (grad_weights[i] - inner);
  return g;
}

Vector forward_logits(const MlpParams& params, std::span<const double> x, ForwardCache* cache) {
  if (params.layers.empty()) throw Error("network has no layers");
  if (x.size() != params.input_size()) {
    throw Error("input dimension " + std::to_string(x.size()) + " does not match network input " +
                std::to_string(params.input_size()));
  }
  const auto& k = kernels::active();
  Vector current(x.begin(), x.end());
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(current);
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    Vector next(layer.weight.rows());
    k.gemv(layer.weight.data(), layer.weight.rows(), layer.weight.cols(), current.data(),
           layer.bias.data(), next.data());
    const bool hidden = l + 1 < params.layers.size();
    if (hidden) {
      for (double& v : next) v = std::tanh(v);
      if (cache) cache->activations.push_back(next);
    }
    current = std::move(next);
  }
  require_finite(current, "network output");
  if (cache) {
    cache->logits = current;
    cache->weights.clear();
  }
  return current;
}

PolicyOutput forward(const MlpParams& params, std::span<const double> x) {
  ForwardCache cache;
  forward_logits(params, x, &cache);
  cache.weights = softmax(cache.logits);
  // Softmax of finite logits is on the simplex up to rounding; the
  // constructor check enforces it.
  WeightVector w(cache.weights);
  return {std::move(w), std::move(cache)};
}

Vector backward_logits(const MlpParams& params, const ForwardCache& cache,
                       std::span<const double> grad_logits, MlpParams& grad) {
  if (cache.activations.size() != params.layers.size() ||
      cache.logits.size() != params.output_size() || grad_logits.size() != params.output_size()) {
    throw Error("forward cache does not match network parameters");
  }
  if (grad.layers.size() != params.layers.size()) grad = params.zeros_like();
  const auto& k = kernels::active();

  Vector delta(grad_logits.begin(), grad_logits.end());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Layer& layer = params.layers[l];
    Layer& g = grad.layers[l];
    const Vector& input = cache.activations[l];
    if (input.size() != layer.weight.cols()) throw Error("forward cache does not match network parameters");
    k.outer_acc(g.weight.data(), layer.weight.rows(), layer.weight.cols(), delta.data(),
                input.data());
    k.axpy(g.bias.data(), 1.0, delta.data(), delta.size());
    Vector upstream(layer.weight.cols(), 0.0);
    k.gemv_t_acc(layer.weight.data(), layer.weight.rows(), layer.weight.cols(), delta.data(),
                 upstream.data());
    if (l > 0) {
      // input is tanh output of the previous layer
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= 1.0 - input[i] * input[i];
    }
    delta = std::move(upstream);
  }
  return delta;
}

MlpParams backward(const MlpParams& params, const ForwardCache& cache,
                   std::span<const double> grad_weights) {
  if (cache.weights.size() != params.output_size() || grad_weights.size() != cache.weights.size()) {
    throw Error("forward cache does not match network parameters");
  }
  const Vector grad_logits = softmax_vjp(cache.weights, grad_weights);
  MlpParams grad = params.zeros_like();
  backward_logits(params, cache, grad_logits, grad);
  return grad;
}

MlpParams finite_diff_grad(const MlpParams& params,
                           const std::function<double(const MlpParams&)>& loss, double h) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  MlpParams probe = params;
  MlpParams grad = params.zeros_like();
  Vector flat = params.flatten();
  Vector out(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    probe.assign_flat(flat);
    const double up = loss(probe);
    flat[i] = orig - h;
    probe.assign_flat(flat);
    const double down = loss(probe);
    flat[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("non-finite loss at perturbed parameter " + std::to_string(i));
    }
    out[i] = (up - down) / (2.0 * h);
  }
  grad.assign_flat(out);
  return grad;
}

MlpParams penalty_grad(const MlpParams& params, double l1, double l2) {
  MlpParams g = params.zeros_like();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto src = params.layers[l].weight.flat();
    auto dst = g.layers[l].weight.flat();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double sign = src[i] > 0.0 ? 1.0 : (src[i] < 0.0 ? -1.0 : 0.0);
      dst[i] = l1 * sign + 2.0 * l2 * src[i];
    }
  }
  return g;
}

double penalty(const MlpParams& params, double l1, double l2) {
  double s = 0.0;
  for (const auto& layer : params.layers) {
    for (double w : layer.weight.flat()) s += l1 * std::abs(w) + l2 * w * w;
  }
  return s;
}

void add_scaled(MlpParams& dst, const MlpParams& src, double scale) {
  if (dst.layers.size() != src.layers.size()) throw Error("parameter shape mismatch");
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    auto& d = dst.layers[l];
    const auto& s = src.layers[l];
    if (d.weight.rows() != s.weight.rows() || d.weight.cols() != s.weight.cols() ||
        d.bias.size() != s.bias.size()) {
      throw Error("parameter shape mismatch");
    }
    kernels::axpy(d.weight.flat(), scale, s.weight.flat());
    kernels::axpy(d.bias, scale, s.bias);
  }
}

double global_norm(const MlpParams& g) {
  double ss = 0.0;
  for (const auto& l : g.layers) {
    ss += kernels::dot(l.weight.flat(), l.weight.flat());
    ss += kernels::dot(l.bias, l.bias);
  }
  return std::sqrt(ss);
}

void clip_global_norm(MlpParams& g, double max_norm) {
  const double norm = global_norm(g);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for_each_param(g, [&](double& v) { v *= scale; });
  }
}

std::string to_json(const MlpParams& params) {
  nlohmann::ordered_json j;
  j["format"] = "dynalloc.mlp";
  j["version"] = kCheckpointVersion;
  j["layer_sizes"] = params.layer_sizes();
  j["seed"] = params.seed;
  j["params"] = params.flatten();
  return j.dump();
}

MlpParams from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "dynalloc.mlp") throw Error("not an mlp checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw Error("unsupported checkpoint version");
  const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  MlpParams p = init_params(sizes, 0);
  p.seed = j.at("seed").get<std::uint64_t>();
  const auto flat = j.at("params").get<std::vector<double>>();
  p.assign_flat(flat);
  for (const auto& l : p.layers) {
    require_finite(l.weight.flat(), "checkpoint parameter");
    require_finite(l.bias, "checkpoint parameter");
  }
  return p;
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << to_json(params) << '\n';
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace dynalloc::policy
