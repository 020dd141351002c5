#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "golfsig/cli/config.hpp"
#include "golfsig/data/dataset.hpp"
#include "golfsig/util/error.hpp"
#include "test_util.hpp"

namespace golfsig::cli {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GOLFSIG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "c.json";
  std::ofstream(p) << text;
  return p;
}

TEST(Config, DefaultsOverridesAndErrors) {
  EXPECT_THROW(resolve_config(Json::object()), ConfigError);
  const auto c = resolve_config(Json{{"seed", 3}}, {"vqvae.levels=[8,5,5,5]", "heads.task=club", "datagen.fps=60"});
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.vqvae.levels, (std::vector<int>{8, 5, 5, 5}));
  EXPECT_EQ(c.heads.task, "club");
  EXPECT_EQ(c.datagen.fps, 60.0);
  EXPECT_EQ(c.posenet.width, 256u);  // untouched default

  try {
    resolve_config(Json{{"seed", 1}, {"vqave", {{"levels", {7, 6, 5}}}}});
    FAIL() << "misspelled section accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("vqave"), std::string::npos);
  }
  EXPECT_THROW(resolve_config(Json{{"seed", 1}, {"prior", {{"lr", "fast"}}}}), ConfigError);
  EXPECT_THROW(resolve_config(Json{{"seed", 1}, {"skeleton", {{"path", "/no/such/file.json"}}}}), ConfigError);
  EXPECT_THROW(resolve_config(Json{{"seed", 1}}, {"novalue"}), ConfigError);
  EXPECT_THROW(resolve_config(Json{{"seed", 1}, {"heads", {{"mode", "deep"}}}}), ConfigError);
  EXPECT_NE(c.stage_seed("posenet"), c.stage_seed("events"));
}

TEST(Config, ShippedConfigsResolve) {
  const fs::path dir = fs::path(GOLFSIG_SOURCE_DIR) / "configs";
  for (const char* name : {"tiny.json", "desk.json"}) EXPECT_NO_THROW(load_config(dir / name)) << name;
  EXPECT_EQ(load_config(dir / "desk.json").datagen.swings, 500u);
}

TEST(Cli, GenWritesDatasetAndEcho) {
  const auto dir = golfsig::testing::temp_dir("cli_gen");
  const auto cfg = write_config(dir, R"({"seed": 5, "datagen": {"players": 3}})");
  ASSERT_EQ(run_cli("gen --config " + cfg.string() + " --out " + (dir / "data").string() +
                        " --swings 6 --set vqvae.levels=[7,6,5]",
                    dir / "log"),
            0)
      << slurp(dir / "log");
  EXPECT_EQ(data::read_dataset(dir / "data").size(), 6u);
  const auto echo = resolve_config(Json::parse(slurp(dir / "data" / kConfigEcho)));
  EXPECT_EQ(echo.datagen.swings, 6u);
  EXPECT_EQ(echo.vqvae.levels, (std::vector<int>{7, 6, 5}));
  EXPECT_EQ(echo.seed, 5u);
}

TEST(Cli, UsageErrorsWriteNothing) {
  const auto dir = golfsig::testing::temp_dir("cli_usage");
  const auto cfg = write_config(dir, R"({"seed": 5})");
  const auto out = dir / "out";
  EXPECT_EQ(run_cli("gen --config " + cfg.string() + " --out " + out.string() + " --bogus 1", dir / "log"), 1);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(slurp(dir / "log").find("bogus"), std::string::npos);
  EXPECT_EQ(run_cli("frobnicate", dir / "log"), 1);
  EXPECT_EQ(run_cli("", dir / "log"), 1);

  const auto noseed = write_config(dir, R"({"datagen": {"swings": 2}})");
  EXPECT_EQ(run_cli("gen --config " + noseed.string() + " --out " + out.string(), dir / "log"), 1);
  EXPECT_NE(slurp(dir / "log").find("seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));

  const auto typo = write_config(dir, R"({"seed": 1, "vqave": {"levels": [7, 6, 5]}})");
  EXPECT_EQ(run_cli("gen --config " + typo.string() + " --out " + out.string(), dir / "log"), 1);
  EXPECT_NE(slurp(dir / "log").find("vqave"), std::string::npos);
}

TEST(Cli, DataErrorsExitTwo) {
  const auto dir = golfsig::testing::temp_dir("cli_data");
  const auto cfg = write_config(dir, R"({"seed": 5})");
  EXPECT_EQ(run_cli("train-events --config " + cfg.string() + " --data " + (dir / "missing").string() + " --out " +
                        (dir / "out").string(),
                    dir / "log"),
            2);
  // A stage directory without its config echo cannot be reported.
  fs::create_directories(dir / "run" / "stage");
  std::ofstream(dir / "run" / "stage" / "metrics.json") << "{}";
  EXPECT_EQ(run_cli("report --run " + (dir / "run").string() + " --out " + (dir / "rep").string(), dir / "log"), 2);
  EXPECT_NE(slurp(dir / "log").find("config.json"), std::string::npos);
}

TEST(Cli, EvalOnUntrainedCheckpointsIsFinite) {
  const auto dir = golfsig::testing::temp_dir("cli_eval");
  const std::string small = R"({"seed": 2, "datagen": {"swings": 4, "players": 2},
    "posenet": {"width": 16, "epochs": 1},
    "events": {"hidden": 8, "max_epochs": 1},
    "vqvae": {"transformer": {"width": 16, "heads": 2, "layers": 1, "ff": 16, "dropout": 0.0}, "epochs": 1},
    "prior": {"transformer": {"width": 16, "heads": 2, "layers": 1, "ff": 16, "dropout": 0.0}, "epochs": 1}})";
  const auto cfg_path = write_config(dir, small);
  const auto cfg = load_config(cfg_path);
  ASSERT_EQ(run_cli("gen --config " + cfg_path.string() + " --out " + (dir / "data").string(), dir / "log"), 0);
  pose::save_posenet(pose::init_posenet(cfg.posenet, 1), dir / "posenet");
  events::save_event_model(events::init_event_model(cfg.events, 2), dir / "events");
  tok::save_vqvae(tok::init_vqvae(cfg.vqvae, cfg.load_skeleton(), 3), dir / "vqvae");
  prior::save_prior(prior::init_prior(cfg.prior, 4), dir / "prior");
  const std::string args = "eval --config " + cfg_path.string() + " --data " + (dir / "data").string() +
                           " --posenet " + (dir / "posenet").string() + " --events " + (dir / "events").string() +
                           " --vqvae " + (dir / "vqvae").string() + " --prior " + (dir / "prior").string() +
                           " --out " + (dir / "eval").string();
  ASSERT_EQ(run_cli(args, dir / "log"), 0) << slurp(dir / "log");
  const Json m = Json::parse(slurp(dir / "eval" / "metrics.json"));
  for (const char* k : {"mpjpe_cm", "mpjre_deg", "pce", "reconstruction_mpjpe_cm", "masked_accuracy"}) {
    ASSERT_TRUE(m.contains(k)) << k;
    EXPECT_TRUE(std::isfinite(m[k].get<double>())) << k;
  }
  EXPECT_EQ(m["utilization"].size(), 5u);
  EXPECT_NE(slurp(dir / "log").find("mpjpe_cm:"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / kConfigEcho));
}

}  // namespace
}  // namespace golfsig::cli
