#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "drht/autograd.hpp"
#include "drht/ops.hpp"

namespace drht {

enum class LayerKind { Conv, Deconv };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool has_bn = true;
  bool has_act = true;

  bool operator==(const LayerSpec&) const = default;
};

/// Encoder layer `encoder`'s activation is added to decoder layer `decoder`'s output.
struct SkipPair {
  std::size_t encoder = 0;
  std::size_t decoder = 0;

  bool operator==(const SkipPair&) const = default;
};

/// Fully convolutional encoder-decoder. The last encoder layer is the
/// bottleneck feeding decoder layer 0; every other encoder layer is skip-paired
/// with the decoder layer that mirrors its output resolution.
struct NetworkSpec {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  std::vector<SkipPair> skip_pairs;
  bool residual_io = true;

  std::size_t depth() const { return encoder.size(); }
  std::size_t image_channels() const { return encoder.empty() ? 0 : encoder.front().in_channels; }
  /// Spatial sizes must be a multiple of this (product of encoder strides).
  std::size_t required_multiple() const;
  /// Learnable scalars: weights, biases and batch-norm scale/shift.
  std::size_t parameter_count() const;
  /// Throws InvalidArgument describing the first violated rule.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// 4-level desk-scale network: encoder channels 64, 64, 128, 128 with strides
/// 1, 1, 2, 2 and kernels 9, 5, 3, 3; the decoder mirrors it.
NetworkSpec desk_network_spec(std::size_t image_channels = 3);

std::string layer_name(bool encoder, std::size_t index);

/// Constants of the LDR<->HDR domain mapping.
struct DomainTransferParams {
  double alpha = 0.03;
  double gamma = 0.45;
  double delta = 1.0 / 255.0;
  double s_max = 64.0;

  void validate() const;
  /// ln(delta): normalized value 0.
  double log_floor() const;
  /// ln(s_max + delta): normalized value 1.
  double log_ceiling() const;
  /// Gamma-compressed s_max, the largest s_hat that is not clipped.
  double compressed_max() const;
};

template <typename T>
struct LayerParams {
  std::string name;
  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> bn_gamma;  // empty when the layer has no batch norm
  Tensor<T> bn_beta;
  BatchNormState<T> bn;

  bool has_bn() const { return !bn_gamma.empty(); }
};

template <typename T>
struct ModelParams {
  NetworkSpec spec;
  std::vector<LayerParams<T>> layers;  // encoder layers, then decoder layers

  std::size_t parameter_count() const;
  const LayerParams<T>& layer(const std::string& name) const;
  LayerParams<T>& layer(const std::string& name);

  template <typename U>
  ModelParams<U> cast() const;

  /// Sets every learnable tensor (and the running statistics) to zero.
  void zero_all();
};

/// Truncated-normal weights (std `init_std`, cut at two standard deviations),
/// zero biases, unit/zero batch-norm scale/shift. Deterministic in `seed`.
template <typename T>
ModelParams<T> build_network(const NetworkSpec& spec, std::uint64_t seed, double init_std = 0.02);

/// Parameters of one network registered as tape leaves.
template <typename T>
struct BoundNetwork {
  const ModelParams<T>* params = nullptr;
  ModelParams<T>* stats = nullptr;  // running statistics to update in train mode
  std::vector<Var<T>> weight, bias, bn_gamma, bn_beta;
};

/// `trainable[i]` marks layer i as requiring gradients; empty means all.
template <typename T>
BoundNetwork<T> bind_network(Tape<T>& tape, ModelParams<T>& params, const std::vector<bool>& trainable = {});

/// Inference-only binding: nothing requires gradients and statistics are read-only.
template <typename T>
BoundNetwork<T> bind_network_const(Tape<T>& tape, const ModelParams<T>& params);

/// input + body(input); throws if spatial dims are not a multiple of required_multiple().
template <typename T>
Var<T> network_forward(const BoundNetwork<T>& net, Var<T> input, BatchNormMode mode);

/// Normalized log radiance: ((max(s,0)/alpha)^(1/gamma) + delta) -> ln -> affine to [0,1] -> clamp.
template <typename T>
Var<T> domain_transfer(Var<T> s_hat, const DomainTransferParams& p);

template <typename T>
Tensor<T> domain_transfer(const Tensor<T>& s_hat, const DomainTransferParams& p);

/// alpha * S^gamma
template <typename T>
Tensor<T> gamma_compress(const Tensor<T>& radiance, const DomainTransferParams& p);

/// (max(s,0)/alpha)^(1/gamma)
template <typename T>
Tensor<T> inverse_gamma(const Tensor<T>& s_hat, const DomainTransferParams& p);

/// Inverse of the affine + log stage: delta * expm1(x * (log_ceiling - log_floor)).
template <typename T>
Tensor<T> normalized_log_to_radiance(const Tensor<T>& x, const DomainTransferParams& p);

/// HDR estimation network at inference (batch-norm running statistics).
template <typename T>
Tensor<T> forward_f1(const ModelParams<T>& params, const Tensor<T>& input);

/// LDR correction network at inference; output clamped to [0,1].
template <typename T>
Tensor<T> forward_f2(const ModelParams<T>& params, const Tensor<T>& x);

template <typename T>
struct DrhtOutput {
  Tensor<T> s_hat;
  Tensor<T> i_ldr;
};

/// Full inference chain f1 -> domain_transfer -> f2.
template <typename T>
DrhtOutput<T> forward_drht(const ModelParams<T>& f1, const ModelParams<T>& f2, const Tensor<T>& input,
                           const DomainTransferParams& p);

}  // namespace drht
