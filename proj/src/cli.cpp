#include "drht/cli.hpp"

#include <fstream>
#include <ostream>

#include "drht/checkpoint.hpp"
#include "drht/data.hpp"
#include "drht/error.hpp"
#include "drht/metrics.hpp"
#include "drht/training.hpp"

namespace drht {

namespace fs = std::filesystem;
using nlohmann::json;

TrainConfig resolve_config(const std::optional<fs::path>& config_path, const std::vector<std::string>& overrides) {
  json doc = config_path ? read_config_document(config_path->string()) : json::object();
  for (const auto& o : overrides) apply_override(doc, o);
  TrainConfig cfg = parse_train_config(doc);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

std::size_t cmd_gen_data(const GenDataOptions& opt, std::ostream& log) {
  if (opt.scenes == 0) throw InvalidArgument("empty dataset requested");
  opt.config.validate();
  const auto triplets = make_dataset(opt.scenes, opt.config.dataset_config());
  json meta = {{"scenes", opt.scenes}, {"config", to_json(opt.config)}};
  write_dataset(opt.out_dir, triplets, meta);
  log << "wrote " << triplets.size() << " triplets from " << opt.scenes << " scenes to " << opt.out_dir.string()
      << "\n";
  return triplets.size();
}

// ---------------------------------------------------------------------------

namespace {

// The first `keep` lines of a previous run's log, so a resumed log again has
// exactly one record per completed step.
std::vector<std::string> prior_log(const fs::path& ckpt_dir, std::size_t keep) {
  std::vector<std::string> lines;
  std::ifstream in(ckpt_dir / kTrainLogName);
  std::string line;
  while (lines.size() < keep && std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

void cmd_train(const TrainOptions& opt, std::ostream& log) {
  const TrainConfig& cfg = opt.config;
  cfg.validate();
  const TensorDataset data = to_tensors(load_dataset(opt.data));
  if (data.size() == 0) throw InvalidArgument("dataset " + opt.data.string() + " holds no triplets");

  TrainingState state;
  std::vector<std::string> log_lines;
  if (opt.resume) {
    const Checkpoint ckpt = load_checkpoint(*opt.resume);
    if (to_json(ckpt.spec) != to_json(cfg.network_spec())) {
      throw CheckpointError("checkpoint " + opt.resume->string() + " was trained with a different network");
    }
    state = TrainingState::from_checkpoint(ckpt);
    log_lines = prior_log(*opt.resume, state.global_step);
    log << "resuming " << state.phase << " at step " << state.global_step << "\n";
  } else {
    state = initial_state(cfg);
  }

  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) throw IoError("cannot create " + opt.out.string() + ": " + ec.message());
  const fs::path log_path = opt.out / kTrainLogName;
  std::ofstream log_file(log_path, std::ios::binary | std::ios::trunc);
  if (!log_file) throw IoError("cannot write " + log_path.string());
  for (const auto& l : log_lines) log_file << l << '\n';
  log_file.flush();

  const json config_json = to_json(cfg);
  const auto save = [&](const TrainingState& s) {
    Checkpoint ckpt = s.to_checkpoint();
    ckpt.meta["config"] = config_json;
    save_checkpoint(opt.out, ckpt);
  };

  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) {
    log_file << r.to_json().dump() << '\n';
    log_file.flush();
    if (!log_file) throw IoError("failed writing " + log_path.string());
    if (r.step % 50 == 0) {
      log << r.phase << " step " << r.step << " stage " << r.stage << " loss_hdr " << r.loss_hdr;
      if (r.loss_ldr) log << " loss_ldr " << *r.loss_ldr;
      log << "\n";
    }
  };
  hooks.on_checkpoint = save;

  if (state.phase == "pretrain") pretrain_f1(state, data, cfg, hooks);
  if (!opt.pretrain_only) train_joint(state, data, cfg, hooks);
  save(state);
  log << "checkpoint written to " << opt.out.string() << " after " << state.global_step << " steps\n";
}

// ---------------------------------------------------------------------------

template <typename Tag>
RgbImage<Tag> reflect_pad(const RgbImage<Tag>& img, std::size_t multiple) {
  if (multiple == 0) throw InvalidArgument("padding multiple must be positive");
  if (img.empty()) throw InvalidArgument("cannot pad an empty image");
  const auto up = [&](std::size_t n) { return (n + multiple - 1) / multiple * multiple; };
  const auto mirror = [](std::size_t i, std::size_t n) {
    if (n == 1) return std::size_t{0};
    const std::size_t period = 2 * n - 2;
    const std::size_t m = i % period;
    return m < n ? m : period - m;
  };
  RgbImage<Tag> out(up(img.width), up(img.height));
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(mirror(x, img.width), mirror(y, img.height), c);
    }
  }
  return out;
}

template RgbImage<LdrTag> reflect_pad(const RgbImage<LdrTag>&, std::size_t);
template RgbImage<HdrTag> reflect_pad(const RgbImage<HdrTag>&, std::size_t);

void cmd_infer(const InferOptions& opt, std::ostream& log) {
  const Checkpoint ckpt = load_checkpoint(opt.ckpt);
  if (!ckpt.has_prefix("f2")) {
    throw CheckpointError("checkpoint " + opt.ckpt.string() +
                          " holds no LDR correction network (f2); it only finished pretraining");
  }
  const ModelParams<float> f1 = extract_params(ckpt, "f1");
  const ModelParams<float> f2 = extract_params(ckpt, "f2");
  DomainTransferParams transfer;
  if (ckpt.meta.contains("config")) transfer = parse_train_config(ckpt.meta.at("config")).transfer;

  const LdrImage input = read_ppm(opt.in);
  const LdrImage padded = reflect_pad(input, ckpt.spec.required_multiple());
  const auto out = forward_drht(f1, f2, image_to_tensor<float>(padded), transfer);

  const LdrImage corrected = crop(tensor_to_image<LdrTag>(out.i_ldr), 0, 0, input.width, input.height);
  const std::size_t clamped = write_ppm(opt.out, corrected);
  if (clamped != 0) log << "warning: " << clamped << " output values fell outside [0, 1]\n";
  if (opt.dump_hdr) {
    const HdrImage radiance =
        crop(tensor_to_image<HdrTag>(inverse_gamma(out.s_hat, transfer)), 0, 0, input.width, input.height);
    write_pfm(*opt.dump_hdr, radiance);
  }
  log << "wrote " << opt.out.string() << " (" << input.width << "x" << input.height << ")\n";
}

// ---------------------------------------------------------------------------

int cmd_eval(const EvalOptions& opt, std::ostream& log) {
  std::ifstream in(opt.pairs);
  if (!in) throw IoError("cannot open pairs manifest " + opt.pairs.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(opt.pairs.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("pairs") || !doc["pairs"].is_array()) {
    throw FormatError(opt.pairs.string() + ": expected an object with a \"pairs\" array");
  }
  const json& pairs = doc["pairs"];
  if (pairs.empty()) throw InvalidArgument(opt.pairs.string() + ": pairs manifest lists no pairs");

  const fs::path base = opt.pairs.parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  MetricReport report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const json& entry = pairs[i];
    ImageMetrics m;
    try {
      if (!entry.is_object() || !entry.contains("prediction") || !entry["prediction"].is_string() ||
          !entry.contains("reference") || !entry["reference"].is_string()) {
        throw FormatError("pairs[" + std::to_string(i) + "] needs string fields \"prediction\" and \"reference\"");
      }
      const std::string pred = entry["prediction"];
      m.path = pred;
      m = evaluate_pair(read_ppm(resolve(pred)), read_ppm(resolve(entry["reference"])));
      m.path = pred;
    } catch (const std::exception& e) {
      if (m.path.empty()) m.path = "pairs[" + std::to_string(i) + "]";
      m.error = e.what();
      log << "error: " << m.path << ": " << e.what() << "\n";
    }
    report.per_image.push_back(std::move(m));
  }
  report.finalize();

  std::ofstream out(opt.report, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report " + opt.report.string());
  out << report.to_json().dump(2) << '\n';
  if (!out) throw IoError("failed writing report " + opt.report.string());

  const std::size_t failed = report.per_image.size() - report.evaluated;
  log << "evaluated " << report.evaluated << " of " << report.per_image.size() << " pairs";
  if (report.evaluated > 0) {
    log << ": psnr " << report.mean_psnr << " ssim " << report.mean_ssim << " fsim " << report.mean_fsim;
  }
  log << "\n";
  if (failed == 0) return 0;
  return report.evaluated == 0 ? 1 : 2;
}

}  // namespace drht
