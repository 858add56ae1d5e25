#include "riskimit/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace riskimit {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

int count_params(const std::vector<int>& sizes) {
  int total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    total += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return total;
}

void apply_activation(Activation act, std::vector<double>& z) {
  switch (act) {
    case Activation::kIdentity:
      return;
    case Activation::kTanh:
      for (double& v : z) v = std::tanh(v);
      return;
    case Activation::kSigmoid:
      for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
      return;
    case Activation::kSoftmax: {
      const double peak = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (double& v : z) total += (v = std::exp(v - peak));
      for (double& v : z) v /= total;
      return;
    }
  }
}

// dz = dy * act'(z), expressed through the activation output y.
void pull_back_activation(Activation act, const std::vector<double>& y,
                          std::vector<double>& dy) {
  switch (act) {
    case Activation::kIdentity:
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= 1.0 - y[i] * y[i];
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= y[i] * (1.0 - y[i]);
      return;
    case Activation::kSoftmax: {
      double inner = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) inner += dy[i] * y[i];
      for (std::size_t i = 0; i < y.size(); ++i) dy[i] = y[i] * (dy[i] - inner);
      return;
    }
  }
}

// Tangent push-forward dy = act'(z) dz through the output y.
void push_forward_activation(Activation act, const std::vector<double>& y,
                             std::vector<double>& dz) {
  // For the activations used here the jacobian is symmetric in the softmax
  // case and diagonal otherwise, so push-forward and pull-back coincide.
  pull_back_activation(act, y, dz);
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations)
    : layer_sizes_(std::move(layer_sizes)),
      activations_(std::move(activations)) {
  if (layer_sizes_.size() < 2)
    throw std::invalid_argument("Mlp: need at least input and output layers");
  for (int s : layer_sizes_)
    if (s <= 0) throw std::invalid_argument("Mlp: non-positive layer size");
  if (activations_.size() != layer_sizes_.size() - 1)
    throw std::invalid_argument("Mlp: one activation per layer transition");
  for (std::size_t l = 0; l + 1 < activations_.size(); ++l)
    if (activations_[l] == Activation::kSoftmax)
      throw std::invalid_argument("Mlp: softmax only supported as the head");
  params_.assign(static_cast<std::size_t>(count_params(layer_sizes_)), 0.0);
}

Mlp Mlp::random_init(std::vector<int> layer_sizes,
                     std::vector<Activation> activations, RngStream& rng) {
  Mlp net(std::move(layer_sizes), std::move(activations));
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < net.layer_sizes_.size(); ++l) {
    const int fan_in = net.layer_sizes_[l];
    const int fan_out = net.layer_sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::size_t block =
        static_cast<std::size_t>(fan_out) * fan_in + fan_out;
    for (std::size_t i = 0; i < block; ++i)
      net.params_[offset + i] = rng.uniform(-bound, bound);
    offset += block;
  }
  return net;
}

void Mlp::set_params(std::span<const double> params) {
  if (params.size() != params_.size())
    throw std::invalid_argument("Mlp::set_params: size mismatch");
  std::copy(params.begin(), params.end(), params_.begin());
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  std::vector<double> y(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      const double* w = params_.data() + offset + static_cast<std::size_t>(r) * in;
      double acc = params_[offset + static_cast<std::size_t>(out) * in + r];
      for (int c = 0; c < in; ++c) acc += w[c] * y[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    apply_activation(activations_[l], z);
    y = std::move(z);
    offset += static_cast<std::size_t>(out) * in + out;
  }
  return y;
}

std::vector<double> Mlp::backprop(std::span<const double> input,
                                  std::span<const double> cotangent,
                                  bool through_head) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw std::invalid_argument("Mlp::backward: input dimension mismatch");
  if (static_cast<int>(cotangent.size()) != output_dim())
    throw std::invalid_argument("Mlp::backward: cotangent dimension mismatch");

  const std::size_t layers = layer_sizes_.size() - 1;
  std::vector<std::vector<double>> ys(layers + 1);
  std::vector<std::size_t> offsets(layers);
  ys[0].assign(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      const double* w = params_.data() + offset + static_cast<std::size_t>(r) * in;
      double acc = params_[offset + static_cast<std::size_t>(out) * in + r];
      for (int c = 0; c < in; ++c) acc += w[c] * ys[l][static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    apply_activation(activations_[l], z);
    ys[l + 1] = std::move(z);
    offset += static_cast<std::size_t>(out) * in + out;
  }

  std::vector<double> grad(params_.size(), 0.0);
  std::vector<double> dz(cotangent.begin(), cotangent.end());
  for (std::size_t l = layers; l-- > 0;) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    if (l + 1 != layers || through_head)
      pull_back_activation(activations_[l], ys[l + 1], dz);
    double* dw = grad.data() + offsets[l];
    double* db = dw + static_cast<std::size_t>(out) * in;
    std::vector<double> dy_prev(static_cast<std::size_t>(in), 0.0);
    for (int r = 0; r < out; ++r) {
      const double g = dz[static_cast<std::size_t>(r)];
      const double* w =
          params_.data() + offsets[l] + static_cast<std::size_t>(r) * in;
      double* dwr = dw + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) {
        dwr[c] = g * ys[l][static_cast<std::size_t>(c)];
        dy_prev[static_cast<std::size_t>(c)] += g * w[c];
      }
      db[r] = g;
    }
    dz = std::move(dy_prev);
  }
  return grad;
}

std::vector<double> Mlp::backward(std::span<const double> input,
                                  std::span<const double> cotangent) const {
  return backprop(input, cotangent, true);
}

std::vector<double> Mlp::backward_logits(std::span<const double> input,
                                         std::span<const double> cotangent) const {
  return backprop(input, cotangent, false);
}

std::vector<double> Mlp::logits_jvp(std::span<const double> input,
                                    std::span<const double> tangent) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw std::invalid_argument("Mlp::logits_jvp: input dimension mismatch");
  if (tangent.size() != params_.size())
    throw std::invalid_argument("Mlp::logits_jvp: tangent size mismatch");
  std::vector<double> y(input.begin(), input.end());
  std::vector<double> dy(y.size(), 0.0);
  std::size_t offset = 0;
  const std::size_t layers = layer_sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    std::vector<double> dz(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      const std::size_t row = offset + static_cast<std::size_t>(r) * in;
      const std::size_t bias = offset + static_cast<std::size_t>(out) * in + r;
      double acc = params_[bias];
      double dacc = tangent[bias];
      for (int c = 0; c < in; ++c) {
        acc += params_[row + static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
        dacc += tangent[row + static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)] +
                params_[row + static_cast<std::size_t>(c)] * dy[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] = acc;
      dz[static_cast<std::size_t>(r)] = dacc;
    }
    if (l + 1 == layers) return dz;  // stop at the final pre-activation
    apply_activation(activations_[l], z);
    push_forward_activation(activations_[l], z, dz);
    y = std::move(z);
    dy = std::move(dz);
    offset += static_cast<std::size_t>(out) * in + out;
  }
  throw std::logic_error("Mlp::logits_jvp: unreachable");
}

nlohmann::json Mlp::to_json() const {
  std::vector<std::string> acts;
  acts.reserve(activations_.size());
  for (Activation a : activations_) acts.push_back(activation_name(a));
  return {{"format_version", 1},
          {"layer_sizes", layer_sizes_},
          {"activations", acts},
          {"params", params_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint format_version " +
                             std::to_string(version));
  std::vector<Activation> acts;
  for (const auto& name : j.at("activations"))
    acts.push_back(activation_from_name(name.get<std::string>()));
  Mlp net(j.at("layer_sizes").get<std::vector<int>>(), std::move(acts));
  net.set_params(j.at("params").get<std::vector<double>>());
  return net;
}

std::string params_checksum(const Mlp& net) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (double value : net.params()) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      hash ^= (bits >> (8 * byte)) & 0xffull;
      hash *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

Mlp clip_weights(const Mlp& net, double bound) {
  if (!(bound > 0.0))
    throw std::invalid_argument("clip_weights: bound must be positive");
  Mlp clipped = net;
  std::vector<double> params = net.params();
  for (double& p : params) p = std::clamp(p, -bound, bound);
  clipped.set_params(params);
  return clipped;
}

AdamState::AdamState(int size, AdamConfig cfg)
    : cfg_(cfg),
      m_(static_cast<std::size_t>(size), 0.0),
      v_(static_cast<std::size_t>(size), 0.0) {
  if (size <= 0) throw std::invalid_argument("AdamState: non-positive size");
  if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) || !(cfg.eps > 0.0))
    throw std::invalid_argument("AdamState: bad config");
}

std::vector<double> AdamState::update(std::span<const double> params,
                                      std::span<const double> grad,
                                      StepDirection dir) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("AdamState::update: size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  const double sign = dir == StepDirection::kAscend ? 1.0 : -1.0;
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double step =
        cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    out[i] = params[i] + sign * step;
  }
  return out;
}

}  // namespace riskimit
