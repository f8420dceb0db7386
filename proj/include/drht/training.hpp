#pragma once

// Losses, ADAM, gradient clipping, learning-rate and stage schedules, and the
// two training procedures: f1 pretraining and joint f1+f2 training with
// hierarchical supervision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drht/checkpoint.hpp"
#include "drht/config.hpp"
#include "drht/data.hpp"
#include "drht/model.hpp"

namespace drht {

// ---------------------------------------------------------------------------
// Losses

/// mse(s_hat, alpha * y^gamma). Throws InvalidArgument if y has negative radiance.
template <typename T>
Var<T> loss_hdr(Var<T> s_hat, const Tensor<T>& y, const DomainTransferParams& p);

template <typename T>
T loss_hdr(const Tensor<T>& s_hat, const Tensor<T>& y, const DomainTransferParams& p);

struct LossConfig {
  double epsilon = 1.0;
  DomainTransferParams transfer;
};

template <typename T>
struct LdrLossTerms {
  Var<T> total;  // ldr + epsilon * hdr
  Var<T> ldr;    // mse(i_ldr, i_gt)
  Var<T> hdr;    // loss_hdr(s_hat, y)
};

template <typename T>
LdrLossTerms<T> loss_ldr(Var<T> i_ldr, const Tensor<T>& i_gt, Var<T> s_hat, const Tensor<T>& y,
                         const LossConfig& cfg);

template <typename T>
T loss_ldr(const Tensor<T>& i_ldr, const Tensor<T>& i_gt, const Tensor<T>& s_hat, const Tensor<T>& y,
           const LossConfig& cfg);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.998;
  double eps = 1e-8;
};

/// First/second moments per parameter slot plus the shared step counter.
template <typename T>
struct OptimizerState {
  std::vector<std::string> names;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;
};

/// One optimizable tensor. A zero multiplier freezes it: neither the value
/// nor its moments change.
template <typename T>
struct ParamSlot {
  std::string name;
  Tensor<T>* value = nullptr;
  double multiplier = 1.0;
};

/// Bias-corrected ADAM. The state is sized on first use; t advances once per
/// call. Throws NonFiniteError naming the first slot with a NaN/Inf gradient,
/// before anything is modified.
template <typename T>
void adam_step(std::vector<ParamSlot<T>>& slots, const std::vector<Tensor<T>>& grads, OptimizerState<T>& state,
               double lr, const AdamConfig& cfg = {});

template <typename T>
double global_norm(const std::vector<Tensor<T>>& grads);

/// Scales all gradients by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
template <typename T>
double clip_gradients(std::vector<Tensor<T>>& grads, double max_norm);

// ---------------------------------------------------------------------------
// Schedules

/// Learning rate at 0-based `step` of a run of `total` steps.
double lr_at(const std::vector<LrPhase>& phases, std::size_t step, std::size_t total);

/// Hierarchical supervision for joint training. Stage s unlocks f2 decoder
/// layers [0, unlocked(s)); every stage advance scales the multipliers of all
/// previously trained groups by `decay`.
class StagePlan {
 public:
  StagePlan(std::size_t stages, std::size_t decoder_depth, std::size_t total_steps, double decay);

  std::size_t stages() const { return stages_; }
  std::size_t stage_of(std::size_t step) const;
  /// First step of `stage` and one past its last step.
  std::size_t stage_begin(std::size_t stage) const;
  std::size_t stage_end(std::size_t stage) const;
  std::size_t unlocked(std::size_t stage) const;

  /// Multiplier of f1 and of the f2 encoder.
  double encoder_multiplier(std::size_t stage) const;
  /// Multiplier of f2 decoder layer `j`; 0 while it is locked.
  double decoder_multiplier(std::size_t stage, std::size_t j) const;

 private:
  std::size_t stages_, depth_, total_;
  double decay_;
};

// ---------------------------------------------------------------------------
// Training

/// A dataset as batched-ready tensors, each [1, 3, H, W].
struct TensorDataset {
  std::vector<Tensor<float>> input;
  std::vector<Tensor<float>> hdr;
  std::vector<Tensor<float>> ldr;

  std::size_t size() const { return input.size(); }
};

TensorDataset to_tensors(const std::vector<TrainingTriplet>& triplets);

/// Indices of the samples in the batch for 0-based `step`: an epoch-wise
/// permutation seeded from (seed, phase, epoch), so any step can be
/// reproduced without replaying earlier ones.
std::vector<std::size_t> batch_indices(std::uint64_t seed, const std::string& phase, std::size_t step,
                                       std::size_t batch_size, std::size_t dataset_size);

struct StepRecord {
  std::size_t step = 0;  // 1-based, counted across phases
  std::string phase;     // "pretrain" or "joint"
  std::size_t stage = 0;
  double lr = 0.0;
  std::optional<double> loss_ldr;  // absent while pretraining
  double loss_hdr = 0.0;
  double grad_norm = 0.0;  // before clipping
  double wall_ms = 0.0;
  std::vector<std::pair<std::string, double>> multipliers;

  /// One JSON-lines record; keys keep the order above.
  nlohmann::ordered_json to_json() const;
};

/// Everything needed to continue training: parameters, optimizer, progress.
struct TrainingState {
  ModelParams<float> f1;
  std::optional<ModelParams<float>> f2;
  std::string phase = "pretrain";
  std::size_t phase_step = 0;   // steps completed in `phase`
  std::size_t global_step = 0;  // steps completed overall
  OptimizerState<float> opt;

  Checkpoint to_checkpoint() const;
  static TrainingState from_checkpoint(const Checkpoint& ckpt);
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  /// Called with a consistent state at phase/stage boundaries and, before an
  /// abort, with the last state that produced finite values.
  std::function<void(const TrainingState&)> on_checkpoint;
};

TrainingState initial_state(const TrainConfig& cfg);

/// Minimizes loss_hdr over f1 until cfg.schedule.pretrain_steps are done.
void pretrain_f1(TrainingState& state, const TensorDataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Minimizes loss_ldr through f1 -> domain_transfer -> f2 until
/// cfg.schedule.joint_steps are done. A state still in pretraining is moved to
/// the joint phase with a fresh optimizer and a newly initialized f2.
void train_joint(TrainingState& state, const TensorDataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

struct DatasetLosses {
  double loss_hdr = 0.0;
  double loss_ldr = 0.0;  // only meaningful when f2 is given
  double psnr = 0.0;      // mean over samples of the clamped inference output
};

/// Inference-mode losses averaged over every sample.
DatasetLosses evaluate_dataset(const ModelParams<float>& f1, const ModelParams<float>* f2, const TensorDataset& data,
                               const TrainConfig& cfg);

}  // namespace drht
