#include <gtest/gtest.h>

#include <fstream>

#include "drht/cli.hpp"
#include "drht/config.hpp"
#include "test_util.hpp"

namespace drht {
namespace {

using nlohmann::json;

std::string config_error(const json& j) {
  try {
    parse_train_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = parse_train_config(json::object());
  EXPECT_EQ(c.transfer.alpha, 0.03);
  EXPECT_EQ(c.transfer.gamma, 0.45);
  EXPECT_EQ(c.transfer.delta, 1.0 / 255.0);
  EXPECT_EQ(c.transfer.s_max, 64.0);
  EXPECT_EQ(c.optimizer.beta1, 0.9);
  EXPECT_EQ(c.optimizer.beta2, 0.998);
  EXPECT_EQ(c.optimizer.clip_norm, 5.0);
  ASSERT_EQ(c.schedule.lr_phases.size(), 2u);
  EXPECT_EQ(c.schedule.lr_phases[0].lr, 1e-2);
  EXPECT_EQ(c.schedule.lr_phases[1].lr, 5e-5);
  EXPECT_EQ(c.schedule.lr_scope, LrScope::Stage);
  EXPECT_EQ(c.data.sim.ev_min, -6.0);
  EXPECT_EQ(c.data.sim.ev_max, 3.0);
  EXPECT_EQ(c.model.network, "desk");
}

TEST(Config, ReadsEverySection) {
  const json j = {
      {"seeds", {{"data", 11}, {"init", 12}, {"shuffle", 13}}},
      {"data", {{"scene_width", 64}, {"patch_width", 32}, {"patch_height", 32}, {"ev_range", {-4, 2}}}},
      {"transfer", {{"alpha", 0.05}}},
      {"loss", {{"epsilon", 0.5}}},
      {"schedule",
       {{"lr_phases", {{{"lr", 1e-3}, {"share", 2}}}}, {"lr_scope", "run"}, {"stages", 2}, {"batch_size", 1}}},
      {"logging", {{"wall_time", false}}},
  };
  const auto c = parse_train_config(j);
  EXPECT_EQ(c.seeds.shuffle, 13u);
  EXPECT_EQ(c.data.scene_width, 64u);
  EXPECT_EQ(c.data.sim.ev_min, -4.0);
  EXPECT_EQ(c.transfer.alpha, 0.05);
  EXPECT_EQ(c.loss.epsilon, 0.5);
  ASSERT_EQ(c.schedule.lr_phases.size(), 1u);
  EXPECT_EQ(c.schedule.lr_phases[0].share, 2.0);
  EXPECT_EQ(c.schedule.lr_scope, LrScope::Run);
  EXPECT_EQ(c.schedule.stages, 2u);
  EXPECT_FALSE(c.logging.wall_time);
  EXPECT_EQ(c.dataset_config().patch_width, 32u);
  EXPECT_EQ(c.dataset_config().seed, 11u);
}

TEST(Config, ErrorsNameTheFieldPath) {
  EXPECT_EQ(config_error({{"schedule", {{"lr_phases", {{{"lr", "fast"}}}}}}}),
            "schedule.lr_phases[0].lr: expected a number");
  EXPECT_EQ(config_error({{"optimizer", {{"momentum", 0.9}}}}), "optimizer.momentum: unknown key");
  EXPECT_EQ(config_error({{"colour", 1}}), "colour: unknown key");
  EXPECT_EQ(config_error({{"schedule", {{"batch_size", -1}}}}), "schedule.batch_size: expected a non-negative integer");
  EXPECT_EQ(config_error({{"logging", {{"wall_time", 1}}}}), "logging.wall_time: expected true or false");
  EXPECT_NE(config_error({{"schedule", {{"lr_scope", "epoch"}}}}).find("schedule.lr_scope"), std::string::npos);
  EXPECT_NE(config_error({{"data", {{"ev_range", {-7, 3}}}}}).find("[-6, 3]"), std::string::npos);
  EXPECT_EQ(config_error({{"data", {{"patch_width", 30}}}}), "data: patch dims must be multiples of 4");
  EXPECT_NE(config_error({{"schedule", {{"stages", 5}}}}).find("stages"), std::string::npos);
  EXPECT_NE(config_error({{"model", {{"network", "huge"}}}}).find("unknown network"), std::string::npos);
  EXPECT_EQ(config_error(json::array()), "config: expected an object");
}

TEST(Config, RoundTripThroughJson) {
  TrainConfig c;
  c.seeds.init = 99;
  c.schedule.lr_phases = {{3e-4, 1.0}, {1e-5, 0.5}};
  c.schedule.lr_scope = LrScope::Run;
  c.data.sim.contrast_min = 0.9;
  const auto back = parse_train_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.seeds.init, 99u);
  EXPECT_EQ(back.schedule.lr_phases[1].share, 0.5);
}

TEST(Config, OverridesApplyAfterTheFile) {
  testing::TempDir dir("cfg");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"schedule": {"batch_size": 2, "joint_steps": 40}, "seeds": {"init": 5}})";
  }
  const auto from_file = resolve_config(dir / "c.json", {});
  EXPECT_EQ(from_file.schedule.batch_size, 2u);
  EXPECT_EQ(from_file.seeds.init, 5u);

  const auto over = resolve_config(dir / "c.json", {"schedule.batch_size=3", "model.network=desk"});
  EXPECT_EQ(over.schedule.batch_size, 3u);
  EXPECT_EQ(over.schedule.joint_steps, 40u);

  const auto no_file = resolve_config(std::nullopt, {"loss.epsilon=0.25", "schedule.lr_phases=[{\"lr\":0.001}]"});
  EXPECT_EQ(no_file.loss.epsilon, 0.25);
  ASSERT_EQ(no_file.schedule.lr_phases.size(), 1u);
  EXPECT_EQ(no_file.schedule.lr_phases[0].lr, 1e-3);

  EXPECT_THROW(resolve_config(std::nullopt, {"schedule.batch_size"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"schedule..x=1"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"schedule.nope=1"}), ConfigError);
  EXPECT_THROW(resolve_config(dir / "absent.json", {}), ConfigError);
  {
    std::ofstream f(dir / "bad.json");
    f << "{ not json";
  }
  EXPECT_THROW(resolve_config(dir / "bad.json", {}), ConfigError);
}

}  // namespace
}  // namespace drht
