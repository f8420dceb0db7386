#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "drht/autograd.hpp"
#include "drht/data.hpp"
#include "drht/model.hpp"
#include "drht/tensor.hpp"

namespace drht::testing {

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename Tag>
RgbImage<Tag> random_image(std::size_t w, std::size_t h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  RgbImage<Tag> img(w, h);
  for (float& v : img.pixels) v = static_cast<float>(dist(rng));
  return img;
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("drht_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Central finite-difference gradient check in double precision.

/// Builds the scalar loss on `tape`. It must register every tensor of
/// `params` as a leaf (requires_grad) reading its current value, in order,
/// and return those leaves through `leaves`.
using LossBuilder = std::function<Var<double>(Tape<double>& tape, std::vector<Var<double>>& leaves)>;

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "param[i][k]: analytic a, numeric n"
};

/// Gradients below this magnitude are compared absolutely: a relative error
/// of two values that are both round-off noise carries no information.
inline constexpr double kGradFloor = 1e-6;

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradFloor});
}

/// Checks `samples` coordinates drawn uniformly over all parameters, plus the
/// first coordinate of every parameter so that none goes unchecked.
inline GradCheckResult check_gradients(const std::vector<Tensor<double>*>& params, const LossBuilder& build,
                                       std::size_t samples, std::uint64_t seed, double h = 1e-5) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    const Var<double> loss = build(tape, leaves);
    if (leaves.size() != params.size()) throw InvalidArgument("loss builder registered the wrong number of leaves");
    tape.backward(loss);
    for (const auto& l : leaves) analytic.push_back(tape.grad(l));
  }
  const auto loss_value = [&] {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    return build(tape, leaves).value().item();
  };

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    coords.emplace_back(i, 0);
    total += params[i]->size();
  }
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    std::size_t i = 0;
    while (flat >= params[i]->size()) flat -= params[i++]->size();
    coords.emplace_back(i, flat);
  }

  GradCheckResult result;
  for (const auto& [i, k] : coords) {
    double& v = (*params[i])[k];
    const double saved = v;
    v = saved + h;
    const double plus = loss_value();
    v = saved - h;
    const double minus = loss_value();
    v = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[i][k];
    const double err = relative_error(a, numeric);
    ++result.checked;
    if (err >= result.max_rel_error) {
      result.max_rel_error = err;
      char buf[160];
      std::snprintf(buf, sizeof buf, "param[%zu][%zu]: analytic %.9e, numeric %.9e", i, k, a, numeric);
      result.worst = buf;
    }
  }
  return result;
}

/// Learnable tensors of a network in the order network_leaves() reports them.
inline std::vector<Tensor<double>*> network_tensors(ModelParams<double>& p) {
  std::vector<Tensor<double>*> out;
  for (auto& l : p.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.has_bn()) {
      out.push_back(&l.bn_gamma);
      out.push_back(&l.bn_beta);
    }
  }
  return out;
}

inline void network_leaves(const BoundNetwork<double>& net, std::vector<Var<double>>& leaves) {
  for (std::size_t i = 0; i < net.weight.size(); ++i) {
    leaves.push_back(net.weight[i]);
    leaves.push_back(net.bias[i]);
    if (net.params->layers[i].has_bn()) {
      leaves.push_back(net.bn_gamma[i]);
      leaves.push_back(net.bn_beta[i]);
    }
  }
}

}  // namespace drht::testing
