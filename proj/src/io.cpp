#include "dfm/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dfm/error.hpp"

namespace dfm {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_samples_csv(std::ostream& out, int data_dim, std::span<const std::vector<double>> samples,
                       std::span<const ConditionSet> conds) {
  if (samples.size() != conds.size()) throw InputDomainError("samples and conditions differ in length");
  for (int i = 0; i < data_dim; ++i) out << 'x' << i << ',';
  out << "class_id,pitch_id,velocity_id\n";
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].size() != static_cast<std::size_t>(data_dim)) throw InputDomainError("sample dimension mismatch");
    for (double v : samples[r]) out << format_double(v) << ',';
    out << conds[r].class_id << ',' << conds[r].pitch_id << ',' << conds[r].velocity_id << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputDomainError("samples CSV line " + std::to_string(line_no) + ": cannot parse '" + s + "'");
  }
  return v;
}

}  // namespace

SampleTable read_samples_csv(std::istream& in) {
  SampleTable t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (cols == 0) {
      cols = cells.size();
      if (cols < 4 || cells[cols - 3] != "class_id") {
        throw InputDomainError("samples CSV: unexpected header '" + line + "'");
      }
      continue;
    }
    if (cells.size() != cols) throw InputDomainError("samples CSV line " + std::to_string(line_no) + ": wrong column count");
    std::vector<double> x;
    for (std::size_t i = 0; i + 3 < cols; ++i) x.push_back(parse_number<double>(cells[i], line_no));
    t.x.push_back(std::move(x));
    t.conds.push_back({parse_number<int>(cells[cols - 3], line_no), parse_number<int>(cells[cols - 2], line_no),
                       parse_number<int>(cells[cols - 1], line_no)});
  }
  if (cols == 0) throw InputDomainError("samples CSV: missing header");
  return t;
}

SampleTable read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputDomainError("cannot open " + path.string());
  return read_samples_csv(in);
}

nlohmann::json to_json(const DatasetSpec& s) {
  return {{"data_dim", s.data_dim},
          {"num_classes", s.num_classes},
          {"num_pitches", s.num_pitches},
          {"num_velocities", s.num_velocities},
          {"class_centroids", s.class_centroids},
          {"pitch_axis", s.pitch_axis},
          {"pitch_offsets", s.pitch_offsets},
          {"velocity_axis", s.velocity_axis},
          {"velocity_offsets", s.velocity_offsets},
          {"ambiguity_axis", s.ambiguity_axis},
          {"sigma_data", s.sigma_data},
          {"modes_per_condition", s.modes_per_condition},
          {"bimodal_separation", s.bimodal_separation},
          {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  try {
    j.at("data_dim").get_to(s.data_dim);
    j.at("num_classes").get_to(s.num_classes);
    j.at("num_pitches").get_to(s.num_pitches);
    j.at("num_velocities").get_to(s.num_velocities);
    j.at("class_centroids").get_to(s.class_centroids);
    j.at("pitch_axis").get_to(s.pitch_axis);
    j.at("pitch_offsets").get_to(s.pitch_offsets);
    j.at("velocity_axis").get_to(s.velocity_axis);
    j.at("velocity_offsets").get_to(s.velocity_offsets);
    j.at("ambiguity_axis").get_to(s.ambiguity_axis);
    j.at("sigma_data").get_to(s.sigma_data);
    j.at("modes_per_condition").get_to(s.modes_per_condition);
    j.at("bimodal_separation").get_to(s.bimodal_separation);
    j.at("seed").get_to(s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputDomainError(std::string("bad dataset spec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

void write_dataset_csv(std::ostream& out, const DatasetSpec& spec, std::span<const NoteSample> samples) {
  out << "# dfm-dataset v1 spec=" << to_json(spec).dump() << '\n';
  std::vector<std::vector<double>> x;
  std::vector<ConditionSet> c;
  for (const auto& s : samples) {
    x.push_back(s.x);
    c.push_back(s.cond);
  }
  write_samples_csv(out, spec.data_dim, x, c);
}

std::pair<DatasetSpec, SampleTable> read_dataset_csv(std::istream& in) {
  std::string first;
  const std::string prefix = "# dfm-dataset v1 spec=";
  if (!std::getline(in, first) || first.rfind(prefix, 0) != 0) throw InputDomainError("not a dfm dataset file");
  DatasetSpec spec = dataset_spec_from_json(nlohmann::json::parse(first.substr(prefix.size())));
  return {spec, read_samples_csv(in)};
}

nlohmann::json to_json(const StepStats& s, long step) {
  return {{"step", step},
          {"loss", s.loss},
          {"mean_sigma2", s.mean_sigma2},
          {"grad_norms",
           {{"total", s.grad_norm},
            {"logvar_head", s.logvar_grad_norm},
            {"logvar_head_clipped", s.logvar_grad_norm_clipped}}},
          {"lr", s.lr},
          {"clamp_events", s.clamp_events}};
}

nlohmann::json to_json(const Trajectory& traj) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& p : traj.states) states.push_back({{"t", p.t}, {"x", p.x}});
  return {{"states", states},
          {"sampled_velocities", traj.sampled_velocities},
          {"noise_draws", traj.noise_draws},
          {"cum_log_confidence", traj.cum_log_confidence}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  for (const auto& s : j.at("states")) t.states.push_back({s.at("t").get<double>(), s.at("x").get<std::vector<double>>()});
  j.at("sampled_velocities").get_to(t.sampled_velocities);
  j.at("noise_draws").get_to(t.noise_draws);
  j.at("cum_log_confidence").get_to(t.cum_log_confidence);
  return t;
}

nlohmann::json to_json(const Scores& s) {
  nlohmann::json j{{"prompt", s.prompt}, {"confidence", s.confidence}};
  j["consistency"] = s.consistency ? nlohmann::json(*s.consistency) : nlohmann::json(nullptr);
  j["combined"] = s.combined ? nlohmann::json(*s.combined) : nlohmann::json(nullptr);
  j["combined_loss"] = s.combined_loss ? nlohmann::json(*s.combined_loss) : nlohmann::json(nullptr);
  return j;
}

Scores scores_from_json(const nlohmann::json& j) {
  Scores s;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  s.prompt = j.at("prompt").get<double>();
  s.confidence = j.at("confidence").get<double>();
  s.consistency = opt("consistency");
  s.combined = opt("combined");
  s.combined_loss = opt("combined_loss");
  return s;
}

nlohmann::json to_json(const SelectionLogEntry& e) {
  return {{"note_index", e.note_index}, {"candidate_index", e.candidate_index}, {"scores", to_json(e.scores)},
          {"tau", e.tau},           {"running_best", e.running_best},       {"early_stop", e.early_stop}};
}

nlohmann::json to_json(const ConditionSet& c) {
  return {{"class_id", c.class_id}, {"pitch_id", c.pitch_id}, {"velocity_id", c.velocity_id}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace dfm
