#include "drht/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

namespace drht {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config integers assume an LP64 platform");

// Reads the members of one JSON object and remembers which keys were seen, so
// finish() can reject anything unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    convert(*it, join(key), dst);
  }

  template <typename Fn>
  void object(const char* key, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    ObjectReader sub(*it, join(key));
    fn(sub);
    sub.finish();
  }

  template <typename Fn>
  void array(const char* key, Fn&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(join(key) + ": expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) fn((*it)[i], join(key) + "[" + std::to_string(i) + "]");
  }

  /// Marks `key` as known and returns it for custom handling, or null if absent.
  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return join(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(join(k) + ": unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  static void convert(const json& v, const std::string& path, double& dst) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    dst = v.get<double>();
  }
  static void convert(const json& v, const std::string& path, std::uint64_t& dst) {
    // Literals built in code arrive as signed integers; parsed text as unsigned.
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(path + ": expected a non-negative integer");
    }
    dst = v.get<std::uint64_t>();
  }
  static void convert(const json& v, const std::string& path, bool& dst) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    dst = v.get<bool>();
  }
  static void convert(const json& v, const std::string& path, std::string& dst) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    dst = v.get<std::string>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_range(const json& v, const std::string& path, double& lo, double& hi) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(path + ": expected [low, high]");
  }
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  try {
    transfer.validate();
  } catch (const InvalidArgument& e) {
    fail(std::string("transfer: ") + e.what());
  }
  try {
    data.sim.validate();
  } catch (const InvalidArgument& e) {
    fail(std::string("data: ") + e.what());
  }
  if (data.patch_width == 0 || data.patch_height == 0) fail("data.patch_width/patch_height must be positive");
  if (data.patch_width > data.scene_width || data.patch_height > data.scene_height) {
    fail("data: patch is larger than the scene");
  }
  const std::size_t multiple = network_spec().required_multiple();
  if (data.patch_width % multiple || data.patch_height % multiple) {
    fail("data: patch dims must be multiples of " + std::to_string(multiple));
  }
  if (!(model.init_std >= 0.0)) fail("model.init_std must be >= 0");
  if (!(loss.epsilon >= 0.0)) fail("loss.epsilon must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("optimizer.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("optimizer.beta2 must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) fail("optimizer.eps must be positive");
  if (!(optimizer.clip_norm > 0.0)) fail("optimizer.clip_norm must be positive");
  if (schedule.lr_phases.empty()) fail("schedule.lr_phases must not be empty");
  for (std::size_t i = 0; i < schedule.lr_phases.size(); ++i) {
    const auto& p = schedule.lr_phases[i];
    const std::string at = "schedule.lr_phases[" + std::to_string(i) + "]";
    if (!(p.lr > 0.0)) fail(at + ".lr must be positive");
    if (!(p.share > 0.0)) fail(at + ".share must be positive");
  }
  if (schedule.batch_size == 0) fail("schedule.batch_size must be positive");
  if (!(schedule.stage_decay > 0.0 && schedule.stage_decay <= 1.0)) fail("schedule.stage_decay must lie in (0, 1]");
  if (schedule.stages > network_spec().decoder.size()) {
    fail("schedule.stages exceeds the number of decoder layers (" + std::to_string(network_spec().decoder.size()) +
         ")");
  }
}

NetworkSpec TrainConfig::network_spec() const {
  if (model.network == "desk") return desk_network_spec(3);
  throw ConfigError("model.network: unknown network '" + model.network + "' (known: desk)");
}

DatasetConfig TrainConfig::dataset_config() const {
  DatasetConfig d;
  d.scene_width = data.scene_width;
  d.scene_height = data.scene_height;
  d.patch_width = data.patch_width;
  d.patch_height = data.patch_height;
  d.seed = seeds.data;
  d.sim = data.sim;
  d.transfer = transfer;
  return d;
}

TrainConfig parse_train_config(const json& j) {
  TrainConfig c;
  ObjectReader root(j, "");
  root.object("seeds", [&](ObjectReader& r) {
    r.read("data", c.seeds.data);
    r.read("init", c.seeds.init);
    r.read("shuffle", c.seeds.shuffle);
  });
  root.object("data", [&](ObjectReader& r) {
    r.read("scene_width", c.data.scene_width);
    r.read("scene_height", c.data.scene_height);
    r.read("patch_width", c.data.patch_width);
    r.read("patch_height", c.data.patch_height);
    r.read("crf_gamma", c.data.sim.crf_gamma);
    if (const json* v = r.raw("ev_range")) read_range(*v, r.child("ev_range"), c.data.sim.ev_min, c.data.sim.ev_max);
    if (const json* v = r.raw("contrast_range")) {
      read_range(*v, r.child("contrast_range"), c.data.sim.contrast_min, c.data.sim.contrast_max);
    }
  });
  root.object("transfer", [&](ObjectReader& r) {
    r.read("alpha", c.transfer.alpha);
    r.read("gamma", c.transfer.gamma);
    r.read("delta", c.transfer.delta);
    r.read("s_max", c.transfer.s_max);
  });
  root.object("model", [&](ObjectReader& r) {
    r.read("network", c.model.network);
    r.read("init_std", c.model.init_std);
  });
  root.object("loss", [&](ObjectReader& r) { r.read("epsilon", c.loss.epsilon); });
  root.object("optimizer", [&](ObjectReader& r) {
    r.read("beta1", c.optimizer.beta1);
    r.read("beta2", c.optimizer.beta2);
    r.read("eps", c.optimizer.eps);
    r.read("clip_norm", c.optimizer.clip_norm);
  });
  root.object("schedule", [&](ObjectReader& r) {
    if (r.raw("lr_phases")) c.schedule.lr_phases.clear();
    r.array("lr_phases", [&](const json& item, const std::string& path) {
      LrPhase p;
      ObjectReader pr(item, path);
      pr.read("lr", p.lr);
      pr.read("share", p.share);
      pr.finish();
      c.schedule.lr_phases.push_back(p);
    });
    std::string scope = c.schedule.lr_scope == LrScope::Run ? "run" : "stage";
    r.read("lr_scope", scope);
    if (scope == "run") {
      c.schedule.lr_scope = LrScope::Run;
    } else if (scope == "stage") {
      c.schedule.lr_scope = LrScope::Stage;
    } else {
      throw ConfigError("schedule.lr_scope: expected \"run\" or \"stage\", got \"" + scope + "\"");
    }
    r.read("pretrain_steps", c.schedule.pretrain_steps);
    r.read("joint_steps", c.schedule.joint_steps);
    r.read("stages", c.schedule.stages);
    r.read("stage_decay", c.schedule.stage_decay);
    r.read("batch_size", c.schedule.batch_size);
  });
  root.object("logging", [&](ObjectReader& r) { r.read("wall_time", c.logging.wall_time); });
  root.finish();
  c.validate();
  return c;
}

json read_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

TrainConfig load_train_config(const std::string& path) { return parse_train_config(read_config_document(path)); }

json to_json(const TrainConfig& c) {
  json phases = json::array();
  for (const auto& p : c.schedule.lr_phases) phases.push_back(json{{"lr", p.lr}, {"share", p.share}});
  return json{
      {"seeds", {{"data", c.seeds.data}, {"init", c.seeds.init}, {"shuffle", c.seeds.shuffle}}},
      {"data",
       {{"scene_width", c.data.scene_width},
        {"scene_height", c.data.scene_height},
        {"patch_width", c.data.patch_width},
        {"patch_height", c.data.patch_height},
        {"crf_gamma", c.data.sim.crf_gamma},
        {"ev_range", {c.data.sim.ev_min, c.data.sim.ev_max}},
        {"contrast_range", {c.data.sim.contrast_min, c.data.sim.contrast_max}}}},
      {"transfer",
       {{"alpha", c.transfer.alpha}, {"gamma", c.transfer.gamma}, {"delta", c.transfer.delta}, {"s_max", c.transfer.s_max}}},
      {"model", {{"network", c.model.network}, {"init_std", c.model.init_std}}},
      {"loss", {{"epsilon", c.loss.epsilon}}},
      {"optimizer",
       {{"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"clip_norm", c.optimizer.clip_norm}}},
      {"schedule",
       {{"lr_phases", phases},
        {"lr_scope", c.schedule.lr_scope == LrScope::Run ? "run" : "stage"},
        {"pretrain_steps", c.schedule.pretrain_steps},
        {"joint_steps", c.schedule.joint_steps},
        {"stages", c.schedule.stages},
        {"stage_decay", c.schedule.stage_decay},
        {"batch_size", c.schedule.batch_size}}},
      {"logging", {{"wall_time", c.logging.wall_time}}},
  };
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!doc.is_object()) doc = json::object();
  doc[json::json_pointer(pointer)] = value;
}

}  // namespace drht
