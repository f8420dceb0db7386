#pragma once

// The four commands of the drht tool as library calls. Each throws a
// drht::Error (or std::exception) on failure; the executable maps that to a
// nonzero exit status.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drht/config.hpp"

namespace drht {

/// Loads `config_path` (built-in defaults when empty), applies each
/// "dotted.path=value" override in order, then parses and validates.
TrainConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                           const std::vector<std::string>& overrides);

struct GenDataOptions {
  TrainConfig config;
  std::filesystem::path out_dir;
  std::size_t scenes = 0;
};

/// Returns the number of triplets written.
std::size_t cmd_gen_data(const GenDataOptions& opt, std::ostream& log);

struct TrainOptions {
  TrainConfig config;
  std::filesystem::path data;
  std::filesystem::path out;
  bool pretrain_only = false;
  std::optional<std::filesystem::path> resume;
};

/// Name of the JSON-lines log inside a checkpoint directory.
inline constexpr const char* kTrainLogName = "train_log.jsonl";

void cmd_train(const TrainOptions& opt, std::ostream& log);

struct InferOptions {
  std::filesystem::path ckpt;
  std::filesystem::path in;
  std::filesystem::path out;
  std::optional<std::filesystem::path> dump_hdr;
};

void cmd_infer(const InferOptions& opt, std::ostream& log);

struct EvalOptions {
  std::filesystem::path pairs;
  std::filesystem::path report;
};

/// Exit status: 0 when every pair was evaluated, 2 when some failed, 1 when
/// all failed. The report is written in every case.
int cmd_eval(const EvalOptions& opt, std::ostream& log);

/// Extends an image to the next multiple of `multiple` on the right and bottom
/// by mirror reflection (edge pixel not repeated).
template <typename Tag>
RgbImage<Tag> reflect_pad(const RgbImage<Tag>& img, std::size_t multiple);

}  // namespace drht
