#pragma once

// TrainConfig: every tunable of data generation, model, loss, optimizer and
// schedule, read from JSON. Parsing is strict: unknown keys and ill-typed
// values raise ConfigError naming the field path, e.g.
// "schedule.lr_phases[1].lr: expected a number".

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "drht/data.hpp"
#include "drht/model.hpp"

namespace drht {

struct LrPhase {
  double lr = 0.0;
  /// Relative length; phases split a run's steps in proportion to their shares.
  double share = 1.0;
};

enum class LrScope {
  Run,    // phases span the whole pretraining / joint run
  Stage,  // phases restart inside every hierarchical stage
};

struct TrainConfig {
  struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t shuffle = 3;
  } seeds;

  struct Data {
    std::size_t scene_width = 128;
    std::size_t scene_height = 64;
    std::size_t patch_width = 64;
    std::size_t patch_height = 64;
    ExposureSimulator sim;
  } data;

  DomainTransferParams transfer;

  struct Model {
    std::string network = "desk";
    double init_std = 0.02;
  } model;

  struct Loss {
    double epsilon = 1.0;
  } loss;

  struct Optimizer {
    double beta1 = 0.9;
    double beta2 = 0.998;
    double eps = 1e-8;
    double clip_norm = 5.0;
  } optimizer;

  struct Schedule {
    std::vector<LrPhase> lr_phases{{1e-2, 3.0}, {5e-5, 1.0}};
    LrScope lr_scope = LrScope::Stage;
    std::size_t pretrain_steps = 300;
    std::size_t joint_steps = 800;
    /// Hierarchical stages of joint training; 0 means one per f2 decoder layer.
    std::size_t stages = 0;
    double stage_decay = 0.1;
    std::size_t batch_size = 4;
  } schedule;

  struct Logging {
    /// When false every record reports wall_ms = 0 so logs are reproducible byte for byte.
    bool wall_time = true;
  } logging;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  NetworkSpec network_spec() const;
  DatasetConfig dataset_config() const;
};

/// Strict parse; missing keys keep their defaults.
TrainConfig parse_train_config(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);
/// The raw JSON of a config file, for applying overrides before parsing.
nlohmann::json read_config_document(const std::string& path);
nlohmann::json to_json(const TrainConfig& cfg);

/// Applies "dotted.path=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace drht
