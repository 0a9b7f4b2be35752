#pragma once

// Run configuration: a YAML document with sections seed, output_dir,
// dataset, net, train, sampler, search, embedding, eval. Unknown keys are
// rejected with their line and column.

#include <cstdint>
#include <filesystem>
#include <string>

#include "dfm/datagen.hpp"
#include "dfm/metrics.hpp"
#include "dfm/net.hpp"
#include "dfm/sampler.hpp"
#include "dfm/search.hpp"
#include "dfm/train.hpp"

namespace dfm {

struct EmbeddingConfig {
  int dim = kDefaultEmbedDim;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::size_t energy_cap = kEnergyDistanceCap;
  int reference_draws = 512;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DatasetSpec dataset = DatasetSpec::default_spec();
  int n_per_condition = 64;
  // data_dim and table sizes always follow the dataset.
  NetShape net{2, 64, 3, 64, 4, 12, 3};
  TrainConfig train;
  SamplerConfig sampler;
  SearchConfig search;
  EmbeddingConfig embedding;
  EvalConfig eval;

  /// Net shape with dataset-derived sizes filled in.
  NetShape net_shape() const;
  Embedder make_embedder() const;
  /// Stream seeds derived from `seed`.
  std::uint64_t init_seed() const;
  std::uint64_t train_seed() const;
};

/// Parses YAML text; `source_name` prefixes diagnostics ("name:line:col: ...").
RunConfig parse_config(const std::string& text, const std::string& source_name = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved YAML that parse_config() reads back to an equal config.
std::string dump_config(const RunConfig& config);

}  // namespace dfm
