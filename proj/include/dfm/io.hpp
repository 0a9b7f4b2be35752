#pragma once

// File formats shared by the CLI and the tests.
//
//   samples CSV:  x0,...,x{d-1},class_id,pitch_id,velocity_id
//   dataset CSV:  "# dfm-dataset v1 spec=<json>" line, then a samples CSV
//   JSON lines:   training log, selection log
//   JSON:         trajectory dumps

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfm/datagen.hpp"
#include "dfm/sampler.hpp"
#include "dfm/search.hpp"
#include "dfm/train.hpp"

namespace dfm {

/// Shortest text that reads back to the same double.
std::string format_double(double v);

struct SampleTable {
  std::vector<std::vector<double>> x;
  std::vector<ConditionSet> conds;
};

void write_samples_csv(std::ostream& out, int data_dim, std::span<const std::vector<double>> samples,
                       std::span<const ConditionSet> conds);
SampleTable read_samples_csv(std::istream& in);
SampleTable read_samples_csv(const std::filesystem::path& path);

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

void write_dataset_csv(std::ostream& out, const DatasetSpec& spec, std::span<const NoteSample> samples);
/// Returns the embedded spec and the samples.
std::pair<DatasetSpec, SampleTable> read_dataset_csv(std::istream& in);

nlohmann::json to_json(const StepStats& stats, long step);
nlohmann::json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scores& scores);
Scores scores_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SelectionLogEntry& entry);
nlohmann::json to_json(const ConditionSet& cond);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dfm
