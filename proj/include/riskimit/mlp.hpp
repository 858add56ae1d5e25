#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskimit/rng.hpp"

namespace riskimit {

enum class Activation { kIdentity, kTanh, kSigmoid, kSoftmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected net on a flat float64 parameter vector, laid out
// [W0 row-major, b0, W1, b1, ...]. Gradients are hand-derived; the flat
// layout keeps optimizer state and finite-difference probes trivial.
// Instances are value types: updates build a new parameter vector, which is
// what makes snapshots/checkpoint diffs and thread-shared reads safe.
class Mlp {
 public:
  // layer_sizes = [in, h1, ..., out]; one activation per transition.
  Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations);

  // Entries uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases included.
  static Mlp random_init(std::vector<int> layer_sizes,
                         std::vector<Activation> activations, RngStream& rng);

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  int param_count() const { return static_cast<int>(params_.size()); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  const std::vector<double>& params() const { return params_; }
  void set_params(std::span<const double> params);

  std::vector<double> forward(std::span<const double> input) const;

  // Gradient wrt params of dot(cotangent, forward(input)).
  std::vector<double> backward(std::span<const double> input,
                               std::span<const double> cotangent) const;

  // Same, but through the final pre-activation (head treated as identity).
  // Softmax/sigmoid log-likelihood gradients are far better conditioned
  // through this path.
  std::vector<double> backward_logits(std::span<const double> input,
                                      std::span<const double> cotangent) const;

  // Directional derivative of the final pre-activation along a parameter
  // tangent. Paired with backward_logits this gives exact Fisher-vector
  // products without materializing the jacobian.
  std::vector<double> logits_jvp(std::span<const double> input,
                                 std::span<const double> tangent) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<double> backprop(std::span<const double> input,
                               std::span<const double> cotangent,
                               bool through_head) const;

  std::vector<int> layer_sizes_;
  std::vector<Activation> activations_;
  std::vector<double> params_;
};

// FNV-1a over the parameter bytes, hex-encoded. Provenance tag for datasets
// generated from a checkpoint.
std::string params_checksum(const Mlp& net);

// Copy with every parameter clamped to [-bound, bound].
Mlp clip_weights(const Mlp& net, double bound);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class StepDirection { kDescend, kAscend };

// Adam moment accumulator; update() owns the bias correction and step count.
class AdamState {
 public:
  AdamState(int size, AdamConfig cfg);

  std::vector<double> update(std::span<const double> params,
                             std::span<const double> grad, StepDirection dir);

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

}  // namespace riskimit
