#pragma once

// Subcommands of the `dfm` driver. Each takes fully parsed options, reads
// and writes files only under the resolved output directory, and throws
// dfm::Error subclasses on failure; main() maps those to exit codes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dfm::cli {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;  // empty: DFM_OUT_DIR, then the config's output_dir
};

struct DatagenOptions {
  CommonOptions common;
  std::optional<int> n_per_condition;
};

struct TrainOptions {
  CommonOptions common;
  std::string data_path;  // empty: generate from the config's dataset
  std::optional<int> steps;
  int log_every = 10;
};

struct SampleOptions {
  CommonOptions common;
  std::string checkpoint;
  std::vector<std::string> conds;
  bool all_conditions = false;
  int n = 1;
  std::optional<double> tau;
  bool dump = false;
};

struct SearchOptions {
  CommonOptions common;
  std::string checkpoint;
  std::vector<std::string> conds;
  std::optional<int> instrument_class;
  int instrument_velocity = 1;
  std::optional<int> n;
  std::optional<std::string> objective;
  std::optional<int> guided_steps;
  std::optional<int> branch;
  std::optional<double> lambda;
  std::optional<double> tau;
  std::string sweep;  // "guided_steps=1,2,4"
  int sweep_seeds = 8;
};

struct EvalOptions {
  CommonOptions common;
  std::string samples;
  std::string reference;  // empty: fresh ground-truth draws
};

struct GradcheckOptions {
  CommonOptions common;
  std::vector<int> dims{1, 2, 8};
  int seeds = 20;
  int hidden = 8;
  int depth = 2;
  int batch = 4;
  double tolerance = 1e-4;
  std::string corrupt;
};

/// Return value is the process exit code.
int run_datagen(const DatagenOptions& o);
int run_train(const TrainOptions& o);
int run_sample(const SampleOptions& o);
int run_search(const SearchOptions& o);
int run_eval(const EvalOptions& o);
int run_gradcheck(const GradcheckOptions& o);

}  // namespace dfm::cli
