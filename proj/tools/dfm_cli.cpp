#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "dfm/error.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kValidation = 4 };

void add_common(CLI::App* cmd, dfm::cli::CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "YAML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Global seed (overrides the config)");
  cmd->add_option("--out", o.out_dir, "Output directory (overrides DFM_OUT_DIR and the config)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dfm::cli;
  CLI::App app{"Distributional flow matching: train, sample, search, evaluate"};
  app.require_subcommand(1);

  DatagenOptions datagen;
  auto* c_datagen = app.add_subcommand("datagen", "Write the synthetic training set as CSV");
  add_common(c_datagen, datagen.common);
  c_datagen->add_option("--n-per-condition", datagen.n_per_condition);

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train the velocity network");
  add_common(c_train, train.common);
  c_train->add_option("--data", train.data_path, "Dataset CSV from `dfm datagen`")->check(CLI::ExistingFile);
  c_train->add_option("--steps", train.steps);
  c_train->add_option("--log-every", train.log_every, "Write every k-th step to train_log.jsonl");

  SampleOptions sample;
  auto* c_sample = app.add_subcommand("sample", "Integrate trajectories from a checkpoint");
  add_common(c_sample, sample.common);
  c_sample->add_option("--checkpoint", sample.checkpoint)->required()->check(CLI::ExistingFile);
  c_sample->add_option("--cond", sample.conds, "class,pitch,velocity (repeatable)");
  c_sample->add_flag("--all-conditions", sample.all_conditions);
  c_sample->add_option("--n", sample.n, "Samples per condition");
  c_sample->add_option("--tau", sample.tau, "Sampling temperature");
  c_sample->add_flag("--dump", sample.dump, "Also write replayable trajectories");

  SearchOptions search;
  auto* c_search = app.add_subcommand("search", "Best-of-N / guided search and instrument assembly");
  add_common(c_search, search.common);
  c_search->add_option("--checkpoint", search.checkpoint)->required()->check(CLI::ExistingFile);
  c_search->add_option("--cond", search.conds, "class,pitch,velocity (repeatable; several form an instrument)");
  c_search->add_option("--instrument", search.instrument_class, "Class id: one note per pitch");
  c_search->add_option("--instrument-velocity", search.instrument_velocity);
  c_search->add_option("--n", search.n, "Candidates per note");
  c_search->add_option("--objective", search.objective);
  c_search->add_option("--guided-steps", search.guided_steps);
  c_search->add_option("--branch", search.branch);
  c_search->add_option("--lambda", search.lambda);
  c_search->add_option("--tau", search.tau, "Candidate temperature (default: schedule in N)");
  c_search->add_option("--sweep", search.sweep, "guided_steps=1,2,4,8,16");
  c_search->add_option("--sweep-seeds", search.sweep_seeds);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "Compute metrics for a samples CSV");
  add_common(c_eval, eval.common);
  c_eval->add_option("--samples", eval.samples)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--reference", eval.reference)->check(CLI::ExistingFile);

  GradcheckOptions grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_common(c_grad, grad.common);
  c_grad->add_option("--dims", grad.dims)->delimiter(',');
  c_grad->add_option("--seeds", grad.seeds);
  c_grad->add_option("--hidden", grad.hidden);
  c_grad->add_option("--depth", grad.depth);
  c_grad->add_option("--batch", grad.batch);
  c_grad->add_option("--tolerance", grad.tolerance);
  c_grad->add_option("--corrupt", grad.corrupt)->group("");  // test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (c_datagen->parsed()) return run_datagen(datagen);
    if (c_train->parsed()) return run_train(train);
    if (c_sample->parsed()) return run_sample(sample);
    if (c_search->parsed()) return run_search(search);
    if (c_eval->parsed()) return run_eval(eval);
    if (c_grad->parsed()) return run_gradcheck(grad);
  } catch (const dfm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const dfm::InputDomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const dfm::UndefinedScoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const dfm::NumericDomainError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const dfm::ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
