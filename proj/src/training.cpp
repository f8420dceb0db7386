#include "drht/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "drht/metrics.hpp"

namespace drht {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Losses

namespace {

template <typename T>
void require_nonnegative(const Tensor<T>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= T{0})) {
      throw InvalidArgument("loss_hdr: ground-truth radiance must be finite and >= 0, found " +
                            std::to_string(static_cast<double>(y[i])) + " at element " + std::to_string(i));
    }
  }
}

// Same accumulation order as the mse op so scalar and recorded losses agree bit for bit.
template <typename T>
T half_mse(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require_same_shape(a.shape(), b.shape(), what);
  T acc{0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  return acc / (T{2} * static_cast<T>(a.size()));
}

}  // namespace

template <typename T>
Var<T> loss_hdr(Var<T> s_hat, const Tensor<T>& y, const DomainTransferParams& p) {
  require_nonnegative(y);
  require_same_shape(s_hat.shape(), y.shape(), "loss_hdr");
  return mse(s_hat, s_hat.tape->leaf(gamma_compress(y, p)));
}

template <typename T>
T loss_hdr(const Tensor<T>& s_hat, const Tensor<T>& y, const DomainTransferParams& p) {
  require_nonnegative(y);
  return half_mse(s_hat, gamma_compress(y, p), "loss_hdr");
}

template <typename T>
LdrLossTerms<T> loss_ldr(Var<T> i_ldr, const Tensor<T>& i_gt, Var<T> s_hat, const Tensor<T>& y,
                         const LossConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) throw InvalidArgument("loss epsilon must be >= 0");
  require_same_shape(i_ldr.shape(), i_gt.shape(), "loss_ldr");
  LdrLossTerms<T> terms;
  terms.ldr = mse(i_ldr, i_ldr.tape->leaf(i_gt));
  terms.hdr = loss_hdr(s_hat, y, cfg.transfer);
  terms.total = add(terms.ldr, scale(terms.hdr, static_cast<T>(cfg.epsilon)));
  return terms;
}

template <typename T>
T loss_ldr(const Tensor<T>& i_ldr, const Tensor<T>& i_gt, const Tensor<T>& s_hat, const Tensor<T>& y,
           const LossConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) throw InvalidArgument("loss epsilon must be >= 0");
  const T ldr = half_mse(i_ldr, i_gt, "loss_ldr");
  const T hdr = loss_hdr(s_hat, y, cfg.transfer);
  return ldr + static_cast<T>(cfg.epsilon) * hdr;
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename T>
void adam_step(std::vector<ParamSlot<T>>& slots, const std::vector<Tensor<T>>& grads, OptimizerState<T>& state,
               double lr, const AdamConfig& cfg) {
  if (slots.size() != grads.size()) {
    throw InvalidArgument("adam_step: " + std::to_string(slots.size()) + " parameters but " +
                          std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.names.push_back(s.name);
      state.m.emplace_back(s.value->shape());
      state.v.emplace_back(s.value->shape());
    }
  }
  if (state.m.size() != slots.size()) throw InvalidArgument("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (state.names[i] != slots[i].name) {
      throw InvalidArgument("adam_step: optimizer slot " + std::to_string(i) + " is '" + state.names[i] +
                            "' but parameter is '" + slots[i].name + "'");
    }
    require_same_shape(grads[i].shape(), slots[i].value->shape(), "gradient of " + slots[i].name);
    if (!all_finite(grads[i].values())) throw NonFiniteError("non-finite gradient in " + slots[i].name);
  }

  state.t += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double step = lr * slots[i].multiplier;
    if (slots[i].multiplier == 0.0) continue;
    T* p = slots[i].value->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      p[k] = static_cast<T>(p[k] - step * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

template <typename T>
double global_norm(const std::vector<Tensor<T>>& grads) {
  double sum = 0.0;
  for (const auto& g : grads)
    for (T v : g.values()) sum += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sum);
}

template <typename T>
double clip_gradients(std::vector<Tensor<T>>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw InvalidArgument("clip norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (T& v : g.values()) v = static_cast<T>(v * s);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Schedules

double lr_at(const std::vector<LrPhase>& phases, std::size_t step, std::size_t total) {
  if (phases.empty()) throw InvalidArgument("learning-rate schedule has no phases");
  double sum = 0.0;
  for (const auto& p : phases) sum += p.share;
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < phases.size(); ++i) {
    cum += phases[i].share;
    const auto boundary = static_cast<std::size_t>(std::llround(static_cast<double>(total) * cum / sum));
    if (step < boundary) return phases[i].lr;
  }
  return phases.back().lr;
}

StagePlan::StagePlan(std::size_t stages, std::size_t decoder_depth, std::size_t total_steps, double decay)
    : stages_(stages == 0 ? decoder_depth : stages), depth_(decoder_depth), total_(total_steps), decay_(decay) {
  if (depth_ == 0) throw InvalidArgument("stage plan needs at least one decoder layer");
  if (stages_ > depth_) throw InvalidArgument("more stages than decoder layers");
}

std::size_t StagePlan::stage_begin(std::size_t stage) const {
  const std::size_t len = total_ / stages_;
  return std::min(stage * len, total_);
}

std::size_t StagePlan::stage_end(std::size_t stage) const {
  return stage + 1 >= stages_ ? total_ : stage_begin(stage + 1);
}

std::size_t StagePlan::stage_of(std::size_t step) const {
  for (std::size_t s = 0; s + 1 < stages_; ++s) {
    if (step < stage_end(s)) return s;
  }
  return stages_ - 1;
}

std::size_t StagePlan::unlocked(std::size_t stage) const {
  return ((stage + 1) * depth_ + stages_ - 1) / stages_;
}

namespace {

double repeated_decay(double decay, std::size_t times) {
  double m = 1.0;
  for (std::size_t i = 0; i < times; ++i) m *= decay;
  return m;
}

}  // namespace

double StagePlan::encoder_multiplier(std::size_t stage) const { return repeated_decay(decay_, stage); }

double StagePlan::decoder_multiplier(std::size_t stage, std::size_t j) const {
  if (j >= unlocked(stage)) return 0.0;
  std::size_t first = 0;
  while (unlocked(first) <= j) ++first;
  return repeated_decay(decay_, stage - first);
}

// ---------------------------------------------------------------------------
// Data plumbing

TensorDataset to_tensors(const std::vector<TrainingTriplet>& triplets) {
  TensorDataset d;
  for (const auto& t : triplets) {
    d.input.push_back(image_to_tensor<float>(t.input));
    d.hdr.push_back(image_to_tensor<float>(t.hdr_gt));
    d.ldr.push_back(image_to_tensor<float>(t.ldr_gt));
  }
  return d;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, const std::string& phase, std::size_t step,
                                       std::size_t batch_size, std::size_t dataset_size) {
  if (dataset_size == 0) throw InvalidArgument("cannot draw a batch from an empty dataset");
  const std::uint64_t phase_tag = phase == "pretrain" ? 0x5052ULL : 0x4a4fULL;
  std::vector<std::size_t> out;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(dataset_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = step * batch_size + i;
    const std::size_t epoch = j / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(phase_tag), static_cast<std::uint32_t>(epoch),
                        static_cast<std::uint32_t>(static_cast<std::uint64_t>(epoch) >> 32)};
      std::mt19937_64 rng(seq);
      // Fisher-Yates with an explicit draw so the order does not depend on std::shuffle.
      for (std::size_t k = dataset_size; k > 1; --k) std::swap(perm[k - 1], perm[rng() % k]);
      cached_epoch = epoch;
    }
    out.push_back(perm[j % dataset_size]);
  }
  return out;
}

namespace {

Tensor<float> stack(const std::vector<Tensor<float>>& src, const std::vector<std::size_t>& idx) {
  const Shape& one = src.at(idx.front()).shape();
  Shape shape = one;
  shape[0] = idx.size();
  std::vector<float> data;
  data.reserve(element_count(shape));
  for (std::size_t i : idx) {
    const auto& t = src.at(i);
    if (t.shape() != one) throw ShapeError("dataset samples differ in shape; cannot batch them");
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor<float>(shape, std::move(data));
}

// Slots and bound variables of one network, in a fixed order.
struct NetworkBinding {
  std::vector<ParamSlot<float>> slots;
  std::vector<Var<float>> vars;
};

void collect(NetworkBinding& out, const std::string& prefix, ModelParams<float>& params,
             const BoundNetwork<float>& net, const std::vector<double>& multipliers) {
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& l = params.layers[i];
    const std::string base = prefix + "." + l.name + ".";
    out.slots.push_back({base + "weight", &l.weight, multipliers[i]});
    out.vars.push_back(net.weight[i]);
    out.slots.push_back({base + "bias", &l.bias, multipliers[i]});
    out.vars.push_back(net.bias[i]);
    if (l.has_bn()) {
      out.slots.push_back({base + "bn_gamma", &l.bn_gamma, multipliers[i]});
      out.vars.push_back(net.bn_gamma[i]);
      out.slots.push_back({base + "bn_beta", &l.bn_beta, multipliers[i]});
      out.vars.push_back(net.bn_beta[i]);
    }
  }
}

std::vector<bool> trainable_mask(const std::vector<double>& multipliers) {
  std::vector<bool> mask;
  for (double m : multipliers) mask.push_back(m != 0.0);
  return mask;
}

using BnSnapshot = std::vector<BatchNormState<float>>;

BnSnapshot snapshot_bn(const ModelParams<float>& p) {
  BnSnapshot s;
  for (const auto& l : p.layers) s.push_back(l.bn);
  return s;
}

// Puts back the running statistics of every layer for which `keep` is false.
void restore_bn(ModelParams<float>& p, const BnSnapshot& s, const std::vector<double>& multipliers, bool all) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (all || multipliers[i] == 0.0) p.layers[i].bn = s[i];
  }
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

AdamConfig adam_config(const TrainConfig& cfg) {
  return {cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps};
}

std::uint64_t f2_seed(const TrainConfig& cfg) { return cfg.seeds.init ^ 0x9E3779B97F4A7C15ULL; }

BatchNormMode bn_mode(std::size_t batch) { return batch == 1 ? BatchNormMode::Infer : BatchNormMode::Train; }

// Gradients of every slot; zero tensors for frozen ones.
std::vector<Tensor<float>> gradients(Tape<float>& tape, const NetworkBinding& b) {
  std::vector<Tensor<float>> g;
  g.reserve(b.vars.size());
  for (std::size_t i = 0; i < b.vars.size(); ++i) {
    if (tape.requires_grad(b.vars[i])) {
      g.push_back(tape.grad(b.vars[i]));
    } else {
      g.emplace_back(b.slots[i].value->shape());
    }
  }
  return g;
}

void check_loss(double value, const char* what, std::size_t step) {
  if (!std::isfinite(value)) {
    throw NonFiniteError(std::string(what) + " became non-finite at step " + std::to_string(step));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Checkpointed state

Checkpoint TrainingState::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.spec = f1.spec;
  append_params(ckpt, "f1", f1);
  if (f2) append_params(ckpt, "f2", *f2);
  for (std::size_t i = 0; i < opt.names.size(); ++i) {
    ckpt.tensors.push_back({"adam." + opt.names[i] + ".m", opt.m[i]});
    ckpt.tensors.push_back({"adam." + opt.names[i] + ".v", opt.v[i]});
  }
  ckpt.meta = json{{"phase", phase}, {"phase_step", phase_step}, {"global_step", global_step}, {"adam_t", opt.t}};
  return ckpt;
}

TrainingState TrainingState::from_checkpoint(const Checkpoint& ckpt) {
  TrainingState s;
  if (!ckpt.has_prefix("f1")) throw CheckpointError("checkpoint holds no f1 network");
  s.f1 = extract_params(ckpt, "f1");
  if (ckpt.has_prefix("f2")) s.f2 = extract_params(ckpt, "f2");
  try {
    s.phase = ckpt.meta.value("phase", std::string("pretrain"));
    s.phase_step = ckpt.meta.value("phase_step", std::size_t{0});
    s.global_step = ckpt.meta.value("global_step", std::size_t{0});
    s.opt.t = ckpt.meta.value("adam_t", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed training metadata: ") + e.what());
  }
  if (s.phase != "pretrain" && s.phase != "joint") throw CheckpointError("unknown training phase '" + s.phase + "'");
  if (s.phase == "joint" && !s.f2) throw CheckpointError("joint-phase checkpoint holds no f2 network");
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    const std::string& name = ckpt.tensors[i].name;
    if (name.rfind("adam.", 0) != 0 || name.size() < 7 || name.compare(name.size() - 2, 2, ".m") != 0) continue;
    const std::string slot = name.substr(5, name.size() - 7);
    const Tensor<float>* v = ckpt.find("adam." + slot + ".v");
    if (!v) throw CheckpointError("checkpoint is missing adam." + slot + ".v");
    s.opt.names.push_back(slot);
    s.opt.m.push_back(ckpt.tensors[i].value);
    s.opt.v.push_back(*v);
  }
  return s;
}

TrainingState initial_state(const TrainConfig& cfg) {
  TrainingState s;
  s.f1 = build_network<float>(cfg.network_spec(), cfg.seeds.init, cfg.model.init_std);
  return s;
}

// ---------------------------------------------------------------------------
// Training loops

nlohmann::ordered_json StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["stage"] = stage;
  j["lr"] = lr;
  j["loss_ldr"] = loss_ldr ? nlohmann::ordered_json(*loss_ldr) : nlohmann::ordered_json(nullptr);
  j["loss_hdr"] = loss_hdr;
  j["grad_norm"] = grad_norm;
  j["wall_ms"] = wall_ms;
  j["phase"] = phase;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : multipliers) m[k] = v;
  j["multipliers"] = m;
  return j;
}

void pretrain_f1(TrainingState& state, const TensorDataset& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  if (data.size() == 0) throw InvalidArgument("pretraining needs a non-empty dataset");
  if (state.phase != "pretrain") return;
  const auto& sched = cfg.schedule;
  const Stopwatch clock(cfg.logging.wall_time);
  const std::vector<double> multipliers(state.f1.layers.size(), 1.0);

  while (state.phase_step < sched.pretrain_steps) {
    const std::size_t step = state.phase_step;
    const auto idx = batch_indices(cfg.seeds.shuffle, "pretrain", step, sched.batch_size, data.size());
    const Tensor<float> x = stack(data.input, idx);
    const Tensor<float> y = stack(data.hdr, idx);
    const double lr = lr_at(sched.lr_phases, step, sched.pretrain_steps);
    const BnSnapshot bn = snapshot_bn(state.f1);

    StepRecord rec;
    try {
      Tape<float> tape;
      auto net = bind_network(tape, state.f1);
      NetworkBinding b;
      collect(b, "f1", state.f1, net, multipliers);
      const auto s_hat = network_forward(net, tape.leaf(x), bn_mode(idx.size()));
      const auto loss = loss_hdr(s_hat, y, cfg.transfer);
      rec.loss_hdr = loss.value().item();
      check_loss(rec.loss_hdr, "loss_hdr", state.global_step + 1);
      tape.backward(loss);
      auto grads = gradients(tape, b);
      rec.grad_norm = clip_gradients(grads, cfg.optimizer.clip_norm);
      adam_step(b.slots, grads, state.opt, lr, adam_config(cfg));
    } catch (const NonFiniteError&) {
      restore_bn(state.f1, bn, multipliers, true);
      if (hooks.on_checkpoint) hooks.on_checkpoint(state);
      throw;
    }

    ++state.phase_step;
    ++state.global_step;
    rec.step = state.global_step;
    rec.phase = "pretrain";
    rec.lr = lr;
    rec.wall_ms = clock.ms();
    rec.multipliers = {{"f1", 1.0}};
    if (hooks.on_step) hooks.on_step(rec);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);
}

void train_joint(TrainingState& state, const TensorDataset& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  if (data.size() == 0) throw InvalidArgument("joint training needs a non-empty dataset");
  const auto& sched = cfg.schedule;
  if (state.phase == "pretrain") {
    state.phase = "joint";
    state.phase_step = 0;
    state.opt = {};
    if (!state.f2) state.f2 = build_network<float>(cfg.network_spec(), f2_seed(cfg), cfg.model.init_std);
  }
  ModelParams<float>& f1 = state.f1;
  ModelParams<float>& f2 = *state.f2;
  const std::size_t depth = f2.spec.depth();
  const StagePlan plan(sched.stages, f2.spec.decoder.size(), sched.joint_steps, sched.stage_decay);
  const LossConfig loss_cfg{cfg.loss.epsilon, cfg.transfer};
  const Stopwatch clock(cfg.logging.wall_time);

  while (state.phase_step < sched.joint_steps) {
    const std::size_t step = state.phase_step;
    const std::size_t stage = plan.stage_of(step);
    const double enc = plan.encoder_multiplier(stage);
    std::vector<double> m1(f1.layers.size(), enc);
    std::vector<double> m2(f2.layers.size(), enc);
    for (std::size_t j = 0; j < f2.spec.decoder.size(); ++j) m2[depth + j] = plan.decoder_multiplier(stage, j);

    double lr = 0.0;
    if (sched.lr_scope == LrScope::Run) {
      lr = lr_at(sched.lr_phases, step, sched.joint_steps);
    } else {
      const std::size_t begin = plan.stage_begin(stage);
      lr = lr_at(sched.lr_phases, step - begin, plan.stage_end(stage) - begin);
    }

    const auto idx = batch_indices(cfg.seeds.shuffle, "joint", step, sched.batch_size, data.size());
    const Tensor<float> x = stack(data.input, idx);
    const Tensor<float> y = stack(data.hdr, idx);
    const Tensor<float> gt = stack(data.ldr, idx);
    const BnSnapshot bn1 = snapshot_bn(f1), bn2 = snapshot_bn(f2);

    StepRecord rec;
    try {
      Tape<float> tape;
      auto net1 = bind_network(tape, f1, trainable_mask(m1));
      auto net2 = bind_network(tape, f2, trainable_mask(m2));
      NetworkBinding b;
      collect(b, "f1", f1, net1, m1);
      collect(b, "f2", f2, net2, m2);
      const BatchNormMode mode = bn_mode(idx.size());
      const auto s_hat = network_forward(net1, tape.leaf(x), mode);
      const auto i_ldr = network_forward(net2, domain_transfer(s_hat, cfg.transfer), mode);
      // Locked layers keep their running statistics too.
      restore_bn(f1, bn1, m1, false);
      restore_bn(f2, bn2, m2, false);
      const auto terms = loss_ldr(i_ldr, gt, s_hat, y, loss_cfg);
      rec.loss_ldr = terms.total.value().item();
      rec.loss_hdr = terms.hdr.value().item();
      check_loss(*rec.loss_ldr, "loss_ldr", state.global_step + 1);
      tape.backward(terms.total);
      auto grads = gradients(tape, b);
      rec.grad_norm = clip_gradients(grads, cfg.optimizer.clip_norm);
      adam_step(b.slots, grads, state.opt, lr, adam_config(cfg));
    } catch (const NonFiniteError&) {
      restore_bn(f1, bn1, m1, true);
      restore_bn(f2, bn2, m2, true);
      if (hooks.on_checkpoint) hooks.on_checkpoint(state);
      throw;
    }

    ++state.phase_step;
    ++state.global_step;
    rec.step = state.global_step;
    rec.phase = "joint";
    rec.stage = stage;
    rec.lr = lr;
    rec.wall_ms = clock.ms();
    rec.multipliers.push_back({"f1", enc});
    rec.multipliers.push_back({"f2.encoder", enc});
    for (std::size_t j = 0; j < f2.spec.decoder.size(); ++j) {
      rec.multipliers.push_back({"f2." + layer_name(false, j), m2[depth + j]});
    }
    if (hooks.on_step) hooks.on_step(rec);
    const bool stage_done = state.phase_step == plan.stage_end(stage);
    if (stage_done && state.phase_step < sched.joint_steps && hooks.on_checkpoint) hooks.on_checkpoint(state);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);
}

DatasetLosses evaluate_dataset(const ModelParams<float>& f1, const ModelParams<float>* f2, const TensorDataset& data,
                               const TrainConfig& cfg) {
  DatasetLosses out;
  if (data.size() == 0) return out;
  const LossConfig loss_cfg{cfg.loss.epsilon, cfg.transfer};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor<float> s_hat = forward_f1(f1, data.input[i]);
    out.loss_hdr += loss_hdr(s_hat, data.hdr[i], cfg.transfer);
    if (!f2) continue;
    Tape<float> tape;
    auto net = bind_network_const(tape, *f2);
    const Tensor<float> raw =
        network_forward(net, tape.leaf(domain_transfer(s_hat, cfg.transfer)), BatchNormMode::Infer).value();
    out.loss_ldr += loss_ldr(raw, data.ldr[i], s_hat, data.hdr[i], loss_cfg);
    Tensor<float> clamped = raw;
    for (float& v : clamped.values()) v = std::clamp(v, 0.0f, 1.0f);
    out.psnr += psnr(tensor_to_image<LdrTag>(clamped), tensor_to_image<LdrTag>(data.ldr[i]));
  }
  const double n = static_cast<double>(data.size());
  out.loss_hdr /= n;
  out.loss_ldr /= n;
  out.psnr /= n;
  return out;
}

#define DRHT_INSTANTIATE(T)                                                                                 \
  template Var<T> loss_hdr(Var<T>, const Tensor<T>&, const DomainTransferParams&);                          \
  template T loss_hdr(const Tensor<T>&, const Tensor<T>&, const DomainTransferParams&);                     \
  template LdrLossTerms<T> loss_ldr(Var<T>, const Tensor<T>&, Var<T>, const Tensor<T>&, const LossConfig&); \
  template T loss_ldr(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                      const LossConfig&);                                                                   \
  template void adam_step(std::vector<ParamSlot<T>>&, const std::vector<Tensor<T>>&, OptimizerState<T>&,    \
                          double, const AdamConfig&);                                                       \
  template double global_norm(const std::vector<Tensor<T>>&);                                               \
  template double clip_gradients(std::vector<Tensor<T>>&, double);
DRHT_INSTANTIATE(float)
DRHT_INSTANTIATE(double)
#undef DRHT_INSTANTIATE

}  // namespace drht
