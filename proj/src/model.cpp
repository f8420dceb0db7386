#include "drht/model.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace drht {

// ---------------------------------------------------------------- NetworkSpec

std::string layer_name(bool encoder, std::size_t index) {
  return (encoder ? "enc" : "dec") + std::to_string(index);
}

std::size_t NetworkSpec::required_multiple() const {
  std::size_t m = 1;
  for (const auto& l : encoder) m *= l.stride;
  return m;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t count = 0;
  auto add = [&](const LayerSpec& l) {
    count += l.out_channels * l.in_channels * l.kernel * l.kernel + l.out_channels;
    if (l.has_bn) count += 2 * l.out_channels;
  };
  for (const auto& l : encoder) add(l);
  for (const auto& l : decoder) add(l);
  return count;
}

void NetworkSpec::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("invalid network spec: " + msg); };
  const std::size_t d = encoder.size();
  if (d < 2) fail("at least two encoder layers are required");
  if (decoder.size() != d) {
    fail("encoder depth " + std::to_string(d) + " != decoder depth " + std::to_string(decoder.size()));
  }
  for (std::size_t i = 0; i < d; ++i) {
    const auto& e = encoder[i];
    const std::string name = layer_name(true, i);
    if (e.kind != LayerKind::Conv) fail(name + " must be a conv layer");
    const std::size_t want_kernel = i == 0 ? 9 : (i == 1 ? 5 : 3);
    if (e.kernel != want_kernel) {
      fail(name + " kernel must be " + std::to_string(want_kernel) + ", got " + std::to_string(e.kernel));
    }
    if (i < 2 && e.out_channels != 64) fail(name + " must produce 64 feature maps");
    if (e.stride != 1 && e.stride != 2) fail(name + " stride must be 1 or 2");
    if (e.in_channels == 0 || e.out_channels == 0) fail(name + " has zero channels");
    if (i > 0 && e.in_channels != encoder[i - 1].out_channels) fail(name + " input channels break the chain");
    if (!e.has_bn || !e.has_act) fail(name + " must use batch norm and ELU");
  }
  for (std::size_t j = 0; j < d; ++j) {
    const auto& l = decoder[j];
    const auto& m = encoder[d - 1 - j];
    const std::string name = layer_name(false, j);
    if (l.kind != LayerKind::Deconv) fail(name + " must be a deconv layer");
    if (l.kernel != m.kernel || l.stride != m.stride || l.in_channels != m.out_channels ||
        l.out_channels != m.in_channels) {
      fail(name + " does not mirror " + layer_name(true, d - 1 - j));
    }
    const bool last = j + 1 == d;
    if (last && (l.has_bn || l.has_act)) fail(name + " is the output layer and must be linear");
    if (!last && (!l.has_bn || !l.has_act)) fail(name + " must use batch norm and ELU");
  }

  // Downsampling factor of each encoder output and each decoder output.
  std::vector<std::size_t> enc_factor(d), dec_factor(d);
  std::size_t f = 1;
  for (std::size_t i = 0; i < d; ++i) enc_factor[i] = f *= encoder[i].stride;
  for (std::size_t j = 0; j < d; ++j) dec_factor[j] = f /= decoder[j].stride;

  std::vector<int> enc_uses(d, 0), dec_uses(d, 0);
  for (const auto& p : skip_pairs) {
    const std::string pair = "skip pair (" + layer_name(true, p.encoder) + " -> " + layer_name(false, p.decoder) + ")";
    if (p.encoder >= d || p.decoder >= d) fail(pair + " refers to a missing layer");
    if (p.encoder + 1 == d) fail(pair + ": the bottleneck layer already feeds the decoder");
    if (encoder[p.encoder].out_channels != decoder[p.decoder].out_channels) {
      fail(pair + " joins " + std::to_string(encoder[p.encoder].out_channels) + " and " +
           std::to_string(decoder[p.decoder].out_channels) + " channels");
    }
    if (enc_factor[p.encoder] != dec_factor[p.decoder]) fail(pair + " joins different spatial sizes");
    ++enc_uses[p.encoder];
    ++dec_uses[p.decoder];
  }
  for (std::size_t i = 0; i + 1 < d; ++i) {
    if (enc_uses[i] != 1) fail(layer_name(true, i) + " must appear in exactly one skip pair");
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (dec_uses[j] > 1) fail(layer_name(false, j) + " receives more than one skip connection");
  }
  if (residual_io && decoder.back().out_channels != encoder.front().in_channels) {
    fail("residual input->output skip needs matching channel counts");
  }
}

NetworkSpec desk_network_spec(std::size_t image_channels) {
  NetworkSpec s;
  const std::size_t channels[] = {64, 64, 128, 128};
  const std::size_t kernels[] = {9, 5, 3, 3};
  const std::size_t strides[] = {1, 1, 2, 2};
  std::size_t in = image_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    s.encoder.push_back({LayerKind::Conv, in, channels[i], kernels[i], strides[i], true, true});
    in = channels[i];
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const auto& m = s.encoder[3 - j];
    const bool last = j == 3;
    s.decoder.push_back({LayerKind::Deconv, m.out_channels, m.in_channels, m.kernel, m.stride, !last, !last});
  }
  for (std::size_t i = 0; i + 1 < 4; ++i) s.skip_pairs.push_back({i, 4 - 2 - i});
  s.residual_io = true;
  return s;
}

// ------------------------------------------------------- DomainTransferParams

void DomainTransferParams::validate() const {
  if (!(alpha > 0)) throw InvalidArgument("alpha must be > 0");
  if (!(gamma > 0 && gamma < 1)) throw InvalidArgument("gamma must lie in (0, 1)");
  if (!(delta > 0)) throw InvalidArgument("delta must be > 0");
  if (!(s_max > 1)) throw InvalidArgument("s_max must be > 1");
}

double DomainTransferParams::log_floor() const { return std::log(delta); }
double DomainTransferParams::log_ceiling() const { return std::log(s_max + delta); }
double DomainTransferParams::compressed_max() const { return alpha * std::pow(s_max, gamma); }

// ---------------------------------------------------------------- ModelParams

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size() + l.bn_gamma.size() + l.bn_beta.size();
  return n;
}

template <typename T>
const LayerParams<T>& ModelParams<T>::layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw InvalidArgument("no layer named " + name);
}

template <typename T>
LayerParams<T>& ModelParams<T>::layer(const std::string& name) {
  return const_cast<LayerParams<T>&>(std::as_const(*this).layer(name));
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.spec = spec;
  for (const auto& l : layers) {
    LayerParams<U> c;
    c.name = l.name;
    c.weight = l.weight.template cast<U>();
    c.bias = l.bias.template cast<U>();
    if (l.has_bn()) {
      c.bn_gamma = l.bn_gamma.template cast<U>();
      c.bn_beta = l.bn_beta.template cast<U>();
      c.bn.running_mean = l.bn.running_mean.template cast<U>();
      c.bn.running_var = l.bn.running_var.template cast<U>();
    }
    out.layers.push_back(std::move(c));
  }
  return out;
}

template <typename T>
void ModelParams<T>::zero_all() {
  for (auto& l : layers) {
    for (Tensor<T>* t : {&l.weight, &l.bias, &l.bn_gamma, &l.bn_beta, &l.bn.running_mean, &l.bn.running_var}) {
      t->fill(T{0});
    }
  }
}

template <typename T>
ModelParams<T> build_network(const NetworkSpec& spec, std::uint64_t seed, double init_std) {
  spec.validate();
  if (!(init_std >= 0)) throw InvalidArgument("init_std must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto truncated = [&] {
    double z;
    do {
      z = normal(rng);
    } while (std::abs(z) > 2.0);
    return z;
  };

  ModelParams<T> params;
  params.spec = spec;
  auto make_layer = [&](const LayerSpec& l, bool enc, std::size_t index) {
    LayerParams<T> p;
    p.name = layer_name(enc, index);
    // conv weights are [Cout, Cin, k, k]; transposed-conv weights are [Cin, Cout, k, k]
    Shape ws = l.kind == LayerKind::Conv ? Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}
                                         : Shape{l.in_channels, l.out_channels, l.kernel, l.kernel};
    p.weight = Tensor<T>(ws);
    if (init_std > 0) {
      for (auto& w : p.weight.values()) w = static_cast<T>(init_std * truncated());
    }
    p.bias = Tensor<T>(Shape{l.out_channels}, T{0});
    if (l.has_bn) {
      p.bn_gamma = Tensor<T>(Shape{l.out_channels}, T{1});
      p.bn_beta = Tensor<T>(Shape{l.out_channels}, T{0});
      p.bn.running_mean = Tensor<T>(Shape{l.out_channels}, T{0});
      p.bn.running_var = Tensor<T>(Shape{l.out_channels}, T{1});
    }
    return p;
  };
  for (std::size_t i = 0; i < spec.encoder.size(); ++i) params.layers.push_back(make_layer(spec.encoder[i], true, i));
  for (std::size_t j = 0; j < spec.decoder.size(); ++j) params.layers.push_back(make_layer(spec.decoder[j], false, j));
  return params;
}

// ------------------------------------------------------------------- forward

template <typename T>
BoundNetwork<T> bind_network(Tape<T>& tape, ModelParams<T>& params, const std::vector<bool>& trainable) {
  if (!trainable.empty() && trainable.size() != params.layers.size()) {
    throw InvalidArgument("trainable mask has " + std::to_string(trainable.size()) + " entries for " +
                          std::to_string(params.layers.size()) + " layers");
  }
  BoundNetwork<T> net;
  net.params = &params;
  net.stats = &params;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    const bool train = trainable.empty() || trainable[i];
    net.weight.push_back(tape.leaf(l.weight, train));
    net.bias.push_back(tape.leaf(l.bias, train));
    net.bn_gamma.push_back(l.has_bn() ? tape.leaf(l.bn_gamma, train) : Var<T>{});
    net.bn_beta.push_back(l.has_bn() ? tape.leaf(l.bn_beta, train) : Var<T>{});
  }
  return net;
}

template <typename T>
BoundNetwork<T> bind_network_const(Tape<T>& tape, const ModelParams<T>& params) {
  BoundNetwork<T> net;
  net.params = &params;
  for (const auto& l : params.layers) {
    net.weight.push_back(tape.leaf(l.weight));
    net.bias.push_back(tape.leaf(l.bias));
    net.bn_gamma.push_back(l.has_bn() ? tape.leaf(l.bn_gamma) : Var<T>{});
    net.bn_beta.push_back(l.has_bn() ? tape.leaf(l.bn_beta) : Var<T>{});
  }
  return net;
}

template <typename T>
Var<T> network_forward(const BoundNetwork<T>& net, Var<T> input, BatchNormMode mode) {
  const NetworkSpec& spec = net.params->spec;
  const Shape& in = input.shape();
  if (in.size() != 4 || in[1] != spec.image_channels()) {
    throw ShapeError("network input must be [N," + std::to_string(spec.image_channels()) + ",H,W], got " +
                     to_string(in));
  }
  const std::size_t multiple = spec.required_multiple();
  if (in[2] % multiple != 0 || in[3] % multiple != 0) {
    throw ShapeError("input spatial size " + std::to_string(in[2]) + "x" + std::to_string(in[3]) +
                     " must be a multiple of " + std::to_string(multiple));
  }
  if (mode == BatchNormMode::Train && !net.stats) {
    throw InvalidArgument("train-mode forward needs mutable batch-norm statistics");
  }
  const std::size_t depth = spec.depth();

  auto apply = [&](std::size_t idx, const LayerSpec& l, Var<T> x) {
    x = l.kind == LayerKind::Conv ? conv2d(x, net.weight[idx], net.bias[idx], l.stride)
                                  : conv2d_transpose(x, net.weight[idx], net.bias[idx], l.stride);
    if (l.has_bn) {
      x = mode == BatchNormMode::Train
              ? batchnorm(x, net.bn_gamma[idx], net.bn_beta[idx], net.stats->layers[idx].bn, mode)
              : batchnorm(x, net.bn_gamma[idx], net.bn_beta[idx],
                          static_cast<const BatchNormState<T>&>(net.params->layers[idx].bn));
    }
    if (l.has_act) x = elu(x);
    return x;
  };

  std::vector<Var<T>> encoded;
  Var<T> x = input;
  for (std::size_t i = 0; i < depth; ++i) {
    x = apply(i, spec.encoder[i], x);
    encoded.push_back(x);
  }
  for (std::size_t j = 0; j < depth; ++j) {
    x = apply(depth + j, spec.decoder[j], x);
    for (const auto& p : spec.skip_pairs) {
      if (p.decoder == j) x = add(x, encoded[p.encoder]);
    }
  }
  if (spec.residual_io) x = add(x, input);
  return x;
}

template <typename T>
Var<T> domain_transfer(Var<T> s_hat, const DomainTransferParams& p) {
  p.validate();
  const T inf = std::numeric_limits<T>::infinity();
  Var<T> x = clamp(s_hat, T{0}, inf);
  x = scale(x, static_cast<T>(1.0 / p.alpha));
  x = pow(x, static_cast<T>(1.0 / p.gamma));
  x = add_scalar(x, static_cast<T>(p.delta));
  x = log(x);
  x = add_scalar(x, static_cast<T>(-p.log_floor()));
  x = scale(x, static_cast<T>(1.0 / (p.log_ceiling() - p.log_floor())));
  return clamp(x, T{0}, T{1});
}

template <typename T>
Tensor<T> domain_transfer(const Tensor<T>& s_hat, const DomainTransferParams& p) {
  Tape<T> tape;
  return domain_transfer(tape.leaf(s_hat), p).value();
}

template <typename T>
Tensor<T> gamma_compress(const Tensor<T>& radiance, const DomainTransferParams& p) {
  Tensor<T> out = radiance;
  for (auto& v : out.values()) v = static_cast<T>(p.alpha) * std::pow(v, static_cast<T>(p.gamma));
  return out;
}

template <typename T>
Tensor<T> inverse_gamma(const Tensor<T>& s_hat, const DomainTransferParams& p) {
  Tensor<T> out = s_hat;
  for (auto& v : out.values()) {
    v = std::pow(std::max(v, T{0}) * static_cast<T>(1.0 / p.alpha), static_cast<T>(1.0 / p.gamma));
  }
  return out;
}

template <typename T>
Tensor<T> normalized_log_to_radiance(const Tensor<T>& x, const DomainTransferParams& p) {
  Tensor<T> out = x;
  const T span = static_cast<T>(p.log_ceiling() - p.log_floor());
  for (auto& v : out.values()) v = static_cast<T>(p.delta) * std::expm1(v * span);
  return out;
}

template <typename T>
Tensor<T> forward_f1(const ModelParams<T>& params, const Tensor<T>& input) {
  Tape<T> tape;
  auto net = bind_network_const(tape, params);
  return network_forward(net, tape.leaf(input), BatchNormMode::Infer).value();
}

template <typename T>
Tensor<T> forward_f2(const ModelParams<T>& params, const Tensor<T>& x) {
  Tape<T> tape;
  auto net = bind_network_const(tape, params);
  return clamp(network_forward(net, tape.leaf(x), BatchNormMode::Infer), T{0}, T{1}).value();
}

template <typename T>
DrhtOutput<T> forward_drht(const ModelParams<T>& f1, const ModelParams<T>& f2, const Tensor<T>& input,
                           const DomainTransferParams& p) {
  DrhtOutput<T> out;
  out.s_hat = forward_f1(f1, input);
  out.i_ldr = forward_f2(f2, domain_transfer(out.s_hat, p));
  return out;
}

#define DRHT_INSTANTIATE(T)                                                                                  \
  template struct ModelParams<T>;                                                                            \
  template ModelParams<T> build_network<T>(const NetworkSpec&, std::uint64_t, double);                       \
  template BoundNetwork<T> bind_network(Tape<T>&, ModelParams<T>&, const std::vector<bool>&);                \
  template BoundNetwork<T> bind_network_const(Tape<T>&, const ModelParams<T>&);                              \
  template Var<T> network_forward(const BoundNetwork<T>&, Var<T>, BatchNormMode);                            \
  template Var<T> domain_transfer(Var<T>, const DomainTransferParams&);                                      \
  template Tensor<T> domain_transfer(const Tensor<T>&, const DomainTransferParams&);                         \
  template Tensor<T> gamma_compress(const Tensor<T>&, const DomainTransferParams&);                          \
  template Tensor<T> inverse_gamma(const Tensor<T>&, const DomainTransferParams&);                           \
  template Tensor<T> normalized_log_to_radiance(const Tensor<T>&, const DomainTransferParams&);              \
  template Tensor<T> forward_f1(const ModelParams<T>&, const Tensor<T>&);                                    \
  template Tensor<T> forward_f2(const ModelParams<T>&, const Tensor<T>&);                                    \
  template DrhtOutput<T> forward_drht(const ModelParams<T>&, const ModelParams<T>&, const Tensor<T>&,        \
                                      const DomainTransferParams&);
DRHT_INSTANTIATE(float)
DRHT_INSTANTIATE(double)
#undef DRHT_INSTANTIATE

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace drht
