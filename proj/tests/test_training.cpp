#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "drht/training.hpp"
#include "test_util.hpp"

namespace drht {
namespace {

using testing::random_tensor;

double naive_half_mse(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / (2.0 * static_cast<double>(a.size()));
}

Tensor<double> filled(const Shape& s, double v) {
  Tensor<double> t(s);
  for (double& x : t.values()) x = v;
  return t;
}

// ---------------------------------------------------------------------------
// Losses

TEST(Loss, HdrExamples) {
  const DomainTransferParams p;
  const Shape s{1, 3, 4, 4};
  EXPECT_NEAR(loss_hdr(filled(s, 0.0), filled(s, 1.0), p), 4.5e-4, 1e-15);
  const auto y = random_tensor(s, 1, 0.0, 64.0);
  EXPECT_EQ(loss_hdr(gamma_compress(y, p), y, p), 0.0);
  const auto s_hat = random_tensor(s, 2, 0.0, 0.2);
  Tensor<double> target = y;
  for (double& v : target.values()) v = p.alpha * std::pow(v, p.gamma);
  EXPECT_NEAR(loss_hdr(s_hat, y, p), naive_half_mse(s_hat, target), 1e-12);

  Tape<double> tape;
  const auto v = loss_hdr(tape.leaf(s_hat, true), y, p);
  EXPECT_NEAR(v.value().item(), naive_half_mse(s_hat, target), 1e-12);

  auto negative = y;
  negative[5] = -1e-3;
  EXPECT_THROW(loss_hdr(s_hat, negative, p), InvalidArgument);
}

TEST(Loss, LdrExamplesAndDecomposition) {
  const Shape s{2, 3, 4, 4};
  LossConfig cfg;
  const auto y = random_tensor(s, 3, 0.0, 64.0);
  const auto gt = random_tensor(s, 4, 0.0, 1.0);
  const auto s_hat = random_tensor(s, 5, 0.0, 0.2);

  cfg.epsilon = 0.0;
  EXPECT_EQ(loss_ldr(gt, gt, s_hat, y, cfg), 0.0);

  cfg.epsilon = 1.0;
  auto shifted_ldr = gt, shifted_hdr = gamma_compress(y, cfg.transfer);
  for (double& v : shifted_ldr.values()) v += 0.1;
  for (double& v : shifted_hdr.values()) v += 0.1;
  EXPECT_NEAR(loss_ldr(shifted_ldr, gt, shifted_hdr, y, cfg), 0.01, 1e-12);

  cfg.epsilon = 0.5;
  const auto i_ldr = random_tensor(s, 6, 0.0, 1.0);
  const double a = naive_half_mse(i_ldr, gt);
  const double b = loss_hdr(s_hat, y, cfg.transfer);
  EXPECT_NEAR(loss_ldr(i_ldr, gt, s_hat, y, cfg), a + 0.5 * b, 1e-12);

  LossConfig zero = cfg;
  zero.epsilon = 0.0;
  EXPECT_EQ(loss_ldr(i_ldr, gt, s_hat, y, cfg), loss_ldr(i_ldr, gt, s_hat, y, zero) + 0.5 * b);

  Tape<double> tape;
  const auto terms = loss_ldr(tape.leaf(i_ldr, true), gt, tape.leaf(s_hat, true), y, cfg);
  EXPECT_EQ(terms.total.value().item(), loss_ldr(i_ldr, gt, s_hat, y, cfg));
  EXPECT_EQ(terms.ldr.value().item(), loss_ldr(i_ldr, gt, s_hat, y, zero));

  cfg.epsilon = -1.0;
  EXPECT_THROW(loss_ldr(i_ldr, gt, s_hat, y, cfg), InvalidArgument);
}

TEST(Loss, EpsilonOnlyScalesTheHdrGradient) {
  const Shape s{1, 3, 4, 4};
  const auto y = random_tensor(s, 7, 0.0, 64.0);
  const auto gt = random_tensor(s, 8, 0.0, 1.0);
  const auto s_hat = random_tensor(s, 9, 0.0, 0.2);

  // i_ldr depends on s_hat through a fixed map standing in for f2.
  const auto grads = [&](double eps) {
    Tape<double> tape;
    const auto sv = tape.leaf(s_hat, true);
    const auto i_ldr = scale(domain_transfer(sv, DomainTransferParams{}), 0.8);
    LossConfig cfg;
    cfg.epsilon = eps;
    tape.backward(loss_ldr(i_ldr, gt, sv, y, cfg).total);
    return tape.grad(sv);
  };
  const auto g0 = grads(0.0), g1 = grads(0.7);
  const auto target = gamma_compress(y, DomainTransferParams{});
  for (std::size_t i = 0; i < g0.size(); ++i) {
    const double hdr = (s_hat[i] - target[i]) / static_cast<double>(s_hat.size());
    EXPECT_NEAR(g1[i], g0[i] + 0.7 * hdr, 1e-15);
  }
}

// ---------------------------------------------------------------------------
// ADAM and clipping

struct OneParam {
  Tensor<double> value;
  std::vector<ParamSlot<double>> slots;
  OptimizerState<double> state;

  explicit OneParam(Tensor<double> v, double multiplier = 1.0) : value(std::move(v)) {
    slots.push_back({"layer.weight", &value, multiplier});
  }
};

TEST(Adam, HandComputedStep) {
  OneParam p(filled({1}, 1.0));
  adam_step(p.slots, {filled({1}, 2.0)}, p.state, 0.1);
  EXPECT_EQ(p.state.t, 1u);
  EXPECT_NEAR(p.state.m[0][0], 0.2, 1e-15);
  EXPECT_NEAR(p.state.v[0][0], 0.008, 1e-15);
  EXPECT_NEAR(p.value[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.state.names, std::vector<std::string>{"layer.weight"});
  adam_step(p.slots, {filled({1}, 2.0)}, p.state, 0.1);
  EXPECT_EQ(p.state.t, 2u);
}

TEST(Adam, MultiplierScalesAndZeroFreezes) {
  OneParam half(filled({3}, 1.0), 0.5), full(filled({3}, 1.0));
  adam_step(half.slots, {filled({3}, 2.0)}, half.state, 0.1);
  adam_step(full.slots, {filled({3}, 2.0)}, full.state, 0.05);
  EXPECT_EQ(half.value, full.value);

  OneParam frozen(random_tensor({2, 3}, 11), 0.0);
  const auto before = frozen.value;
  for (int i = 0; i < 3; ++i) adam_step(frozen.slots, {random_tensor({2, 3}, 12 + i)}, frozen.state, 0.1);
  EXPECT_EQ(frozen.value, before);
  EXPECT_EQ(frozen.state.m[0], Tensor<double>({2, 3}));
  EXPECT_EQ(frozen.state.v[0], Tensor<double>({2, 3}));
  EXPECT_EQ(frozen.state.t, 3u);
}

TEST(Adam, ZeroGradientAndZeroLrAreIdentities) {
  OneParam zg(random_tensor({4, 2}, 13));
  const auto before = zg.value;
  adam_step(zg.slots, {Tensor<double>({4, 2})}, zg.state, 0.1);
  EXPECT_EQ(zg.value, before);

  OneParam zl(random_tensor({4, 2}, 14));
  const auto start = zl.value;
  for (int i = 0; i < 3; ++i) adam_step(zl.slots, {random_tensor({4, 2}, 15 + i)}, zl.state, 0.0);
  EXPECT_EQ(zl.value, start);
}

TEST(Adam, NonFiniteGradientNamesTheSlotAndChangesNothing) {
  Tensor<double> a = random_tensor({3}, 16), b = random_tensor({3}, 17);
  std::vector<ParamSlot<double>> slots{{"f2.dec0.weight", &a, 1.0}, {"f2.dec1.bias", &b, 1.0}};
  OptimizerState<double> st;
  adam_step(slots, {random_tensor({3}, 18), random_tensor({3}, 19)}, st, 0.01);
  const auto a0 = a, b0 = b;
  const auto m0 = st.m;
  auto bad = random_tensor({3}, 20);
  bad[1] = std::numeric_limits<double>::infinity();
  try {
    adam_step(slots, {random_tensor({3}, 21), bad}, st, 0.01);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("f2.dec1.bias"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a, a0);
  EXPECT_EQ(b, b0);
  EXPECT_EQ(st.m, m0);
  EXPECT_EQ(st.t, 1u);
  EXPECT_THROW(adam_step(slots, {random_tensor({3}, 22)}, st, 0.01), InvalidArgument);
  EXPECT_THROW(adam_step(slots, {random_tensor({3}, 23), random_tensor({4}, 24)}, st, 0.01), ShapeError);
}

TEST(Clip, ClosedFormCases) {
  std::vector<Tensor<double>> small{filled({1}, 3.0)};
  EXPECT_EQ(clip_gradients(small, 5.0), 3.0);
  EXPECT_EQ(small[0][0], 3.0);

  Tensor<double> g({2});
  g[0] = 3.0;
  g[1] = 4.0;
  std::vector<Tensor<double>> v{g};
  EXPECT_EQ(clip_gradients(v, 1.0), 5.0);
  EXPECT_NEAR(v[0][0], 0.6, 1e-15);
  EXPECT_NEAR(v[0][1], 0.8, 1e-15);
}

TEST(Clip, NormOracleAndDirection) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<Tensor<double>> g{random_tensor({7}, seed), random_tensor({3, 5}, seed + 100, -3, 3)};
    double pre = 0.0;
    for (const auto& t : g)
      for (double x : t.values()) pre += x * x;
    pre = std::sqrt(pre);
    const auto orig = g;
    const double max = 0.5 + static_cast<double>(seed);
    EXPECT_NEAR(clip_gradients(g, max), pre, 1e-12);
    EXPECT_NEAR(global_norm(g), std::min(pre, max), 1e-10);
    const double k = g[0][0] / orig[0][0];
    EXPECT_LE(k, 1.0 + 1e-15);
    for (std::size_t t = 0; t < g.size(); ++t)
      for (std::size_t i = 0; i < g[t].size(); ++i) EXPECT_NEAR(g[t][i], k * orig[t][i], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Schedules

TEST(Schedule, LrPhasesSplitByShare) {
  const std::vector<LrPhase> ph{{1e-2, 3.0}, {5e-5, 1.0}};
  for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(lr_at(ph, s, 8), 1e-2) << s;
  for (std::size_t s = 6; s < 8; ++s) EXPECT_EQ(lr_at(ph, s, 8), 5e-5) << s;
  // round(10 * 3 / 4) = 8 (half away from zero on 7.5).
  EXPECT_EQ(lr_at(ph, 7, 10), 1e-2);
  EXPECT_EQ(lr_at(ph, 8, 10), 5e-5);
  EXPECT_EQ(lr_at({{1e-3, 1.0}}, 99, 10), 1e-3);
  EXPECT_THROW(lr_at({}, 0, 1), InvalidArgument);
}

TEST(Schedule, StagePlanUnlocksAndDecays) {
  const StagePlan p(4, 4, 800, 0.1);
  EXPECT_EQ(p.stages(), 4u);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(p.stage_begin(s), 200 * s);
    EXPECT_EQ(p.stage_end(s), 200 * (s + 1));
    EXPECT_EQ(p.unlocked(s), s + 1);
  }
  EXPECT_EQ(p.stage_of(199), 0u);
  EXPECT_EQ(p.stage_of(200), 1u);
  EXPECT_EQ(p.stage_of(799), 3u);
  EXPECT_EQ(p.decoder_multiplier(0, 0), 1.0);
  EXPECT_EQ(p.decoder_multiplier(0, 1), 0.0);
  EXPECT_EQ(p.decoder_multiplier(2, 0), 0.1 * 0.1);
  EXPECT_EQ(p.decoder_multiplier(2, 1), 0.1);
  EXPECT_EQ(p.decoder_multiplier(2, 2), 1.0);
  EXPECT_EQ(p.decoder_multiplier(2, 3), 0.0);
  EXPECT_EQ(p.encoder_multiplier(0), 1.0);
  EXPECT_EQ(p.encoder_multiplier(3), 0.1 * 0.1 * 0.1);

  const StagePlan two(2, 4, 10, 0.5);
  EXPECT_EQ(two.unlocked(0), 2u);
  EXPECT_EQ(two.unlocked(1), 4u);
  EXPECT_EQ(two.decoder_multiplier(1, 1), 0.5);
  EXPECT_EQ(two.decoder_multiplier(1, 3), 1.0);
  EXPECT_EQ(two.stage_end(1), 10u);

  const StagePlan uneven(3, 4, 10, 0.1);
  EXPECT_EQ(uneven.stage_begin(1), 3u);
  EXPECT_EQ(uneven.stage_end(2), 10u);
  EXPECT_EQ(uneven.unlocked(0), 2u);
  EXPECT_EQ(uneven.unlocked(1), 3u);
  EXPECT_EQ(uneven.unlocked(2), 4u);

  EXPECT_EQ(StagePlan(0, 4, 8, 0.1).stages(), 4u);
  EXPECT_THROW(StagePlan(5, 4, 8, 0.1), InvalidArgument);
}

TEST(Schedule, BatchIndicesArePermutationsPerEpoch) {
  const std::size_t n = 7, batch = 3;
  std::vector<std::size_t> seen;
  for (std::size_t step = 0; step < n * 4; ++step) {
    const auto idx = batch_indices(42, "pretrain", step, batch, n);
    ASSERT_EQ(idx.size(), batch);
    seen.insert(seen.end(), idx.begin(), idx.end());
    EXPECT_EQ(idx, batch_indices(42, "pretrain", step, batch, n));
  }
  for (std::size_t e = 0; e * n < seen.size(); ++e) {
    std::set<std::size_t> epoch(seen.begin() + e * n, seen.begin() + std::min(seen.size(), (e + 1) * n));
    EXPECT_EQ(epoch.size(), std::min(n, seen.size() - e * n));
  }
  bool differs = false;
  for (std::size_t step = 0; step < 10; ++step) {
    differs |= batch_indices(42, "pretrain", step, batch, n) != batch_indices(42, "joint", step, batch, n);
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(batch_indices(1, "joint", 0, 1, 0), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Training procedures

TrainConfig tiny_config() {
  TrainConfig c;
  c.data.scene_width = 16;
  c.data.scene_height = 16;
  c.data.patch_width = 16;
  c.data.patch_height = 16;
  c.schedule.lr_phases = {{1e-3, 1.0}};
  c.schedule.pretrain_steps = 3;
  c.schedule.joint_steps = 8;
  c.schedule.stages = 4;
  c.schedule.batch_size = 2;
  c.logging.wall_time = false;
  return c;
}

TensorDataset tiny_data(const TrainConfig& c, std::size_t n = 4) {
  return to_tensors(make_dataset(n, c.dataset_config()));
}

void expect_same_tensors(const Checkpoint& a, const Checkpoint& b) {
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    EXPECT_EQ(a.tensors[i].name, b.tensors[i].name);
    EXPECT_TRUE(a.tensors[i].value == b.tensors[i].value) << a.tensors[i].name;
  }
}

bool same_layer(const LayerParams<float>& a, const LayerParams<float>& b) {
  return a.weight == b.weight && a.bias == b.bias && a.bn_gamma == b.bn_gamma && a.bn_beta == b.bn_beta &&
         a.bn.running_mean == b.bn.running_mean && a.bn.running_var == b.bn.running_var;
}

TEST(Training, ZeroStepsKeepTheInitialization) {
  auto cfg = tiny_config();
  cfg.schedule.pretrain_steps = 0;
  const auto data = tiny_data(cfg);
  auto state = initial_state(cfg);
  std::size_t steps = 0;
  pretrain_f1(state, data, cfg, {.on_step = [&](const StepRecord&) { ++steps; }, .on_checkpoint = {}});
  EXPECT_EQ(steps, 0u);
  const auto init = build_network<float>(cfg.network_spec(), cfg.seeds.init, cfg.model.init_std);
  for (std::size_t i = 0; i < init.layers.size(); ++i) EXPECT_TRUE(same_layer(state.f1.layers[i], init.layers[i]));
  EXPECT_THROW(pretrain_f1(state, TensorDataset{}, cfg), InvalidArgument);
}

TEST(Training, RunsAreBitReproducible) {
  const auto cfg = tiny_config();
  const auto data = tiny_data(cfg);
  const auto run = [&] {
    std::vector<std::string> log;
    TrainHooks hooks{.on_step = [&](const StepRecord& r) { log.push_back(r.to_json().dump()); }, .on_checkpoint = {}};
    auto state = initial_state(cfg);
    pretrain_f1(state, data, cfg, hooks);
    train_joint(state, data, cfg, hooks);
    return std::make_pair(log, state.to_checkpoint());
  };
  const auto [log_a, ckpt_a] = run();
  const auto [log_b, ckpt_b] = run();
  EXPECT_EQ(log_a, log_b);
  EXPECT_EQ(log_a.size(), 11u);
  expect_same_tensors(ckpt_a, ckpt_b);
  EXPECT_EQ(ckpt_a.meta, ckpt_b.meta);
}

TEST(Training, StepRecordLayout) {
  StepRecord r;
  r.step = 4;
  r.phase = "joint";
  r.stage = 1;
  r.lr = 1e-3;
  r.loss_ldr = 0.5;
  r.loss_hdr = 0.25;
  r.grad_norm = 2.0;
  r.multipliers = {{"f1", 0.1}, {"f2.dec0", 0.1}};
  const auto j = r.to_json();
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"step", "stage", "lr", "loss_ldr", "loss_hdr", "grad_norm", "wall_ms",
                                            "phase", "multipliers"}));
  EXPECT_EQ(j["multipliers"]["f2.dec0"], 0.1);
  r.loss_ldr.reset();
  EXPECT_TRUE(r.to_json()["loss_ldr"].is_null());
}

TEST(Training, LockedDecoderLayersStayAtInitialization) {
  auto cfg = tiny_config();
  cfg.schedule.pretrain_steps = 0;
  const auto data = tiny_data(cfg);

  auto init_cfg = cfg;
  init_cfg.schedule.joint_steps = 0;
  auto init = initial_state(init_cfg);
  train_joint(init, data, init_cfg);
  ASSERT_TRUE(init.f2.has_value());

  std::vector<TrainingState> snapshots;
  std::vector<StepRecord> records;
  auto state = initial_state(cfg);
  train_joint(state, data, cfg,
              {.on_step = [&](const StepRecord& r) { records.push_back(r); },
               .on_checkpoint = [&](const TrainingState& s) { snapshots.push_back(s); }});
  ASSERT_EQ(snapshots.size(), 4u);  // after stages 0, 1, 2 and at the end
  const std::size_t depth = init.f2->spec.depth();
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& f2 = *snapshots[s].f2;
    for (std::size_t j = 0; j < 4; ++j) {
      const bool same = same_layer(f2.layers[depth + j], init.f2->layers[depth + j]);
      EXPECT_EQ(same, j > s) << "stage " << s << " dec" << j;
    }
  }
  ASSERT_EQ(records.size(), 8u);
  for (const auto& r : records) {
    const std::size_t stage = (r.step - 1) / 2;
    EXPECT_EQ(r.stage, stage);
    EXPECT_EQ(r.lr, 1e-3);
    ASSERT_EQ(r.multipliers.size(), 6u);
    EXPECT_EQ(r.multipliers[0].second, StagePlan(4, 4, 8, 0.1).encoder_multiplier(stage));
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(r.multipliers[2 + j].first, "f2.dec" + std::to_string(j));
      EXPECT_EQ(r.multipliers[2 + j].second, StagePlan(4, 4, 8, 0.1).decoder_multiplier(stage, j));
    }
  }
}

TEST(Training, NonFiniteLossAbortsWithLastGoodState) {
  auto cfg = tiny_config();
  cfg.schedule.pretrain_steps = 6;
  auto data = tiny_data(cfg);
  const auto clean = data;

  std::optional<TrainingState> saved;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const TrainingState& s) { saved = s; };
  hooks.on_step = [&](const StepRecord& r) {
    if (r.step == 3) {
      for (auto& t : data.input) t[0] = std::numeric_limits<float>::quiet_NaN();
    }
  };
  auto state = initial_state(cfg);
  EXPECT_THROW(pretrain_f1(state, data, cfg, hooks), NonFiniteError);
  ASSERT_TRUE(saved.has_value());
  EXPECT_EQ(saved->global_step, 3u);
  EXPECT_EQ(saved->opt.t, 3u);

  auto ref_cfg = cfg;
  ref_cfg.schedule.pretrain_steps = 3;
  auto ref = initial_state(ref_cfg);
  pretrain_f1(ref, clean, ref_cfg);
  expect_same_tensors(saved->to_checkpoint(), ref.to_checkpoint());
}

TEST(Training, CheckpointStateRoundTrip) {
  auto cfg = tiny_config();
  cfg.schedule.joint_steps = 2;
  const auto data = tiny_data(cfg);
  auto state = initial_state(cfg);
  pretrain_f1(state, data, cfg);
  train_joint(state, data, cfg);
  const auto ckpt = state.to_checkpoint();
  EXPECT_TRUE(ckpt.has_prefix("f1"));
  EXPECT_TRUE(ckpt.has_prefix("f2"));
  EXPECT_TRUE(ckpt.has_prefix("adam"));
  EXPECT_EQ(ckpt.meta["phase"], "joint");
  EXPECT_EQ(ckpt.meta["global_step"], 5);
  const auto back = TrainingState::from_checkpoint(ckpt);
  EXPECT_EQ(back.phase, "joint");
  EXPECT_EQ(back.phase_step, 2u);
  EXPECT_EQ(back.opt.t, state.opt.t);
  EXPECT_EQ(back.opt.names, state.opt.names);
  expect_same_tensors(back.to_checkpoint(), ckpt);
}

TEST(Training, ResumedRunMatchesUninterrupted) {
  auto cfg = tiny_config();
  const auto data = tiny_data(cfg);
  auto full = initial_state(cfg);
  pretrain_f1(full, data, cfg);
  train_joint(full, data, cfg);

  // Stop after stage 1 by capturing the boundary checkpoint, then continue from it.
  std::vector<Checkpoint> boundaries;
  auto first = initial_state(cfg);
  pretrain_f1(first, data, cfg);
  train_joint(first, data, cfg, {.on_step = {}, .on_checkpoint = [&](const TrainingState& s) {
                                   boundaries.push_back(s.to_checkpoint());
                                 }});
  ASSERT_GE(boundaries.size(), 2u);
  auto resumed = TrainingState::from_checkpoint(boundaries[1]);
  EXPECT_EQ(resumed.phase_step, 4u);
  train_joint(resumed, data, cfg);
  expect_same_tensors(resumed.to_checkpoint(), full.to_checkpoint());
}

TEST(Training, EvaluateDatasetInferenceLosses) {
  auto cfg = tiny_config();
  const auto data = tiny_data(cfg, 2);
  auto f1 = build_network<float>(cfg.network_spec(), 1, 0.0);
  f1.zero_all();
  auto f2 = f1;
  // With zero parameters both networks are the identity on their input.
  const auto r = evaluate_dataset(f1, &f2, data, cfg);
  double hdr = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hdr += loss_hdr(data.input[i], data.hdr[i], cfg.transfer);
  }
  EXPECT_NEAR(r.loss_hdr, hdr / 2.0, 1e-6);
  EXPECT_GT(r.psnr, 0.0);
  EXPECT_NO_THROW(evaluate_dataset(f1, nullptr, data, cfg));
}

}  // namespace
}  // namespace drht
