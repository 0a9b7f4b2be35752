#include <gtest/gtest.h>

#include <string>

#include "dfm/config.hpp"
#include "dfm/error.hpp"

namespace dfm {
namespace {

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml, "run.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyDocumentGivesDefaults) {
  RunConfig c = parse_config("");
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.dataset, DatasetSpec::default_spec());
  EXPECT_EQ(c.sampler.num_steps, 16);
  EXPECT_EQ(c.sampler.solver, Solver::kRk4);
  EXPECT_EQ(c.search.lambda, 0.7);
  EXPECT_EQ(c.train.num_timesteps, 1000);
}

TEST(Config, ParsesSections) {
  RunConfig c = parse_config(R"(
seed: 42
output_dir: out/x
dataset: {preset: bimodal}
net: {hidden: 32, depth: 2}
train: {learning_rate: 0.001, steps: 50, time_sampling: continuous}
sampler: {num_steps: 8, solver: midpoint, tau: 0.02}
search:
  n_candidates: 16
  objective: combined_loss
  tau: 0.05
  early_stop: {window: 3, min_delta: 0.01}
embedding: {dim: 8, seed: 3}
)");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.output_dir, "out/x");
  EXPECT_EQ(c.dataset, DatasetSpec::bimodal_fixture());
  EXPECT_EQ(c.net_shape().data_dim, 1);
  EXPECT_EQ(c.net_shape().hidden, 32);
  EXPECT_EQ(c.train.time_sampling, TimeSampling::kContinuous);
  EXPECT_EQ(c.sampler.solver, Solver::kMidpoint);
  EXPECT_EQ(c.search.objective, Objective::kCombinedLoss);
  EXPECT_EQ(*c.search.tau_override, 0.05);
  EXPECT_EQ(c.search.early_stop->window, 3);
  EXPECT_EQ(c.make_embedder().embed_dim(), 8);
}

TEST(Config, UnknownKeysReportLineAndColumn) {
  EXPECT_EQ(error_of("seed: 1\ntrain:\n  learning_rat: 0.1\n"),
            "run.yaml:3:3: unknown key 'learning_rat' in section 'train'");
  EXPECT_EQ(error_of("sed: 1\n"), "run.yaml:1:1: unknown key 'sed'");
  EXPECT_NE(error_of("search: {early_stop: {window: 2, patience: 3}}").find("unknown key 'patience'"),
            std::string::npos);
}

TEST(Config, BadValuesAreRejected) {
  EXPECT_NE(error_of("seed: abc\n").find("run.yaml:1:7: bad value for 'seed'"), std::string::npos);
  EXPECT_NE(error_of("sampler: {solver: dopri5}").find("unknown solver"), std::string::npos);
  EXPECT_NE(error_of("search: {lambda: 1.5}").find("lambda"), std::string::npos);
  EXPECT_NE(error_of("search: {guided_steps: 17}").find("guided_steps"), std::string::npos);
  EXPECT_NE(error_of("dataset: {preset: nsynth}").find("unknown dataset preset"), std::string::npos);
  EXPECT_NE(error_of("train: {batch_size: 0}").find("batch_size"), std::string::npos);
  EXPECT_NE(error_of("train: [1, 2]").find("must be a mapping"), std::string::npos);
  EXPECT_NE(error_of("seed: [1\n").find("run.yaml:"), std::string::npos);
}

TEST(Config, DumpRoundTrips) {
  RunConfig c = parse_config(R"(
seed: 7
dataset: {num_classes: 3, sigma_data: 0.123456789012345}
search: {tau: 0.0125, early_stop: off}
train: {freeze_logvar_head: true}
)");
  const std::string text = dump_config(c);
  RunConfig back = parse_config(text, "dumped");
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.dataset, c.dataset);
  EXPECT_EQ(back.dataset.sigma_data, 0.123456789012345);
  EXPECT_EQ(*back.search.tau_override, 0.0125);
  EXPECT_FALSE(back.search.early_stop.has_value());
  EXPECT_TRUE(back.train.freeze_logvar_head);
}

TEST(Config, DerivedSeedsDiffer) {
  RunConfig c;
  c.seed = 3;
  EXPECT_NE(c.init_seed(), c.train_seed());
  RunConfig d;
  d.seed = 4;
  EXPECT_NE(c.init_seed(), d.init_seed());
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/cfg.yaml"), ConfigError); }

}  // namespace
}  // namespace dfm
