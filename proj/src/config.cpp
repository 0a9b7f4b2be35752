#include "dfm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "dfm/error.hpp"

namespace dfm {

NetShape RunConfig::net_shape() const {
  NetShape s = net;
  s.data_dim = dataset.data_dim;
  s.num_classes = dataset.num_classes;
  s.num_pitches = dataset.num_pitches;
  s.num_velocities = dataset.num_velocities;
  return s;
}

Embedder RunConfig::make_embedder() const { return Embedder(dataset.data_dim, embedding.dim, embedding.seed); }

std::uint64_t RunConfig::init_seed() const { return mix_seed(seed, 1); }
std::uint64_t RunConfig::train_seed() const { return mix_seed(seed, 2); }

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    std::ostringstream out;
    out << source_;
    const YAML::Mark m = node.Mark();
    if (!m.is_null()) out << ":" << m.line + 1 << ":" << m.column + 1;
    out << ": " << msg;
    throw ConfigError(out.str());
  }

  void require_map(const YAML::Node& node, const std::string& section) const {
    if (!node.IsMap()) fail(node, "section '" + section + "' must be a mapping");
  }

  void check_keys(const YAML::Node& node, const std::string& section,
                  std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!ok.contains(key)) {
        fail(kv.first, "unknown key '" + key + "'" + (section.empty() ? "" : " in section '" + section + "'"));
      }
    }
  }

  template <typename T>
  void read(const YAML::Node& parent, const char* key, T& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, std::string("bad value for '") + key + "'");
    }
  }

  void read_vector(const YAML::Node& parent, const char* key, std::vector<double>& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    if (!n.IsSequence()) fail(n, std::string("'") + key + "' must be a list of numbers");
    read(parent, key, out);
  }

 private:
  std::string source_;
};

void parse_dataset(const Parser& p, const YAML::Node& node, RunConfig& cfg) {
  p.require_map(node, "dataset");
  p.check_keys(node, "dataset",
               {"preset", "data_dim", "num_classes", "num_pitches", "num_velocities", "sigma_data",
                "modes_per_condition", "bimodal_separation", "seed", "n_per_condition", "class_centroids",
                "pitch_axis", "pitch_offsets", "velocity_axis", "velocity_offsets", "ambiguity_axis"});
  std::string preset = "default";
  p.read(node, "preset", preset);
  DatasetSpec base;
  if (preset == "default") {
    base = DatasetSpec::default_spec();
  } else if (preset == "bimodal") {
    base = DatasetSpec::bimodal_fixture();
  } else {
    p.fail(node["preset"], "unknown dataset preset '" + preset + "' (expected default or bimodal)");
  }
  int d = base.data_dim, c = base.num_classes, np = base.num_pitches, nv = base.num_velocities;
  double sigma = base.sigma_data;
  p.read(node, "data_dim", d);
  p.read(node, "num_classes", c);
  p.read(node, "num_pitches", np);
  p.read(node, "num_velocities", nv);
  p.read(node, "sigma_data", sigma);
  DatasetSpec spec = base;
  if (d != base.data_dim || c != base.num_classes || np != base.num_pitches || nv != base.num_velocities ||
      sigma != base.sigma_data) {
    if (d < 1 || c < 1 || np < 1 || nv < 1) p.fail(node, "dataset sizes must be positive");
    spec = DatasetSpec::make(d, c, np, nv, sigma, base.seed);
    spec.modes_per_condition = base.modes_per_condition;
    spec.bimodal_separation = base.bimodal_separation;
  }
  p.read(node, "modes_per_condition", spec.modes_per_condition);
  p.read(node, "bimodal_separation", spec.bimodal_separation);
  p.read(node, "seed", spec.seed);
  p.read(node, "n_per_condition", cfg.n_per_condition);
  if (const YAML::Node n = node["class_centroids"]) {
    try {
      spec.class_centroids = n.as<std::vector<std::vector<double>>>();
    } catch (const YAML::Exception&) {
      p.fail(n, "class_centroids must be a list of number lists");
    }
  }
  p.read_vector(node, "pitch_axis", spec.pitch_axis);
  p.read_vector(node, "pitch_offsets", spec.pitch_offsets);
  p.read_vector(node, "velocity_axis", spec.velocity_axis);
  p.read_vector(node, "velocity_offsets", spec.velocity_offsets);
  p.read_vector(node, "ambiguity_axis", spec.ambiguity_axis);
  try {
    spec.validate();
  } catch (const InputDomainError& e) {
    p.fail(node, e.what());
  }
  if (cfg.n_per_condition < 1) p.fail(node, "n_per_condition must be >= 1");
  cfg.dataset = std::move(spec);
}

void parse_net(const Parser& p, const YAML::Node& node, RunConfig& cfg) {
  p.require_map(node, "net");
  p.check_keys(node, "net", {"hidden", "depth", "mlp_hidden"});
  p.read(node, "hidden", cfg.net.hidden);
  p.read(node, "depth", cfg.net.depth);
  p.read(node, "mlp_hidden", cfg.net.mlp_hidden);
  if (cfg.net.hidden < 1 || cfg.net.depth < 0 || cfg.net.mlp_hidden < 1) p.fail(node, "invalid net sizes");
}

void parse_train(const Parser& p, const YAML::Node& node, RunConfig& cfg) {
  p.require_map(node, "train");
  p.check_keys(node, "train",
               {"learning_rate", "beta1", "beta2", "adam_eps", "weight_decay", "steps", "batch_size",
                "num_timesteps", "logvar_clip", "time_sampling", "freeze_logvar_head"});
  TrainConfig& t = cfg.train;
  p.read(node, "learning_rate", t.learning_rate);
  p.read(node, "beta1", t.beta1);
  p.read(node, "beta2", t.beta2);
  p.read(node, "adam_eps", t.adam_eps);
  p.read(node, "weight_decay", t.weight_decay);
  p.read(node, "steps", t.steps);
  p.read(node, "batch_size", t.batch_size);
  p.read(node, "num_timesteps", t.num_timesteps);
  p.read(node, "logvar_clip", t.logvar_clip);
  p.read(node, "freeze_logvar_head", t.freeze_logvar_head);
  std::string ts = t.time_sampling == TimeSampling::kDiscreteGrid ? "grid" : "continuous";
  p.read(node, "time_sampling", ts);
  if (ts == "grid") {
    t.time_sampling = TimeSampling::kDiscreteGrid;
  } else if (ts == "continuous") {
    t.time_sampling = TimeSampling::kContinuous;
  } else {
    p.fail(node["time_sampling"], "time_sampling must be 'grid' or 'continuous'");
  }
  try {
    t.validate();
  } catch (const InputDomainError& e) {
    p.fail(node, e.what());
  }
}

void parse_sampler(const Parser& p, const YAML::Node& node, RunConfig& cfg) {
  p.require_map(node, "sampler");
  p.check_keys(node, "sampler", {"num_steps", "solver", "tau"});
  p.read(node, "num_steps", cfg.sampler.num_steps);
  p.read(node, "tau", cfg.sampler.tau);
  std::string solver(solver_name(cfg.sampler.solver));
  p.read(node, "solver", solver);
  try {
    cfg.sampler.solver = parse_solver(solver);
    cfg.sampler.validate();
  } catch (const InputDomainError& e) {
    p.fail(node, e.what());
  }
}

void parse_search(const Parser& p, const YAML::Node& node, RunConfig& cfg) {
  p.require_map(node, "search");
  p.check_keys(node, "search",
               {"n_candidates", "lambda", "objective", "guided_steps", "branch", "tau", "early_stop"});
  SearchConfig& s = cfg.search;
  p.read(node, "n_candidates", s.n_candidates);
  p.read(node, "lambda", s.lambda);
  p.read(node, "guided_steps", s.guided_steps);
  p.read(node, "branch", s.branch);
  if (node["tau"]) {
    double tau = 0.0;
    p.read(node, "tau", tau);
    s.tau_override = tau;
  }
  std::string objective(objective_name(s.objective));
  p.read(node, "objective", objective);
  if (const YAML::Node es = node["early_stop"]) {
    if (es.IsScalar() && es.as<std::string>() == "off") {
      s.early_stop.reset();
    } else {
      p.require_map(es, "search.early_stop");
      p.check_keys(es, "search.early_stop", {"window", "min_delta"});
      EarlyStop stop;
      p.read(es, "window", stop.window);
      p.read(es, "min_delta", stop.min_delta);
      s.early_stop = stop;
    }
  }
  try {
    s.objective = parse_objective(objective);
    s.validate(cfg.sampler);
  } catch (const InputDomainError& e) {
    p.fail(node, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source_name) {
  Parser p(source_name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream out;
    out << source_name << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(out.str());
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  p.require_map(root, "<root>");
  p.check_keys(root, "", {"seed", "output_dir", "dataset", "net", "train", "sampler", "search", "embedding", "eval"});
  p.read(root, "seed", cfg.seed);
  p.read(root, "output_dir", cfg.output_dir);
  if (root["dataset"]) parse_dataset(p, root["dataset"], cfg);
  if (root["net"]) parse_net(p, root["net"], cfg);
  if (root["train"]) parse_train(p, root["train"], cfg);
  if (root["sampler"]) parse_sampler(p, root["sampler"], cfg);
  if (root["search"]) parse_search(p, root["search"], cfg);
  if (const YAML::Node e = root["embedding"]) {
    p.require_map(e, "embedding");
    p.check_keys(e, "embedding", {"dim", "seed"});
    p.read(e, "dim", cfg.embedding.dim);
    p.read(e, "seed", cfg.embedding.seed);
    if (cfg.embedding.dim < 1) p.fail(e, "embedding dim must be >= 1");
  }
  if (const YAML::Node e = root["eval"]) {
    p.require_map(e, "eval");
    p.check_keys(e, "eval", {"energy_cap", "reference_draws"});
    p.read(e, "energy_cap", cfg.eval.energy_cap);
    p.read(e, "reference_draws", cfg.eval.reference_draws);
    if (cfg.eval.energy_cap < 1 || cfg.eval.reference_draws < 1) p.fail(e, "eval sizes must be >= 1");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string dump_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;

  const DatasetSpec& d = c.dataset;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "data_dim" << YAML::Value << d.data_dim;
  out << YAML::Key << "num_classes" << YAML::Value << d.num_classes;
  out << YAML::Key << "num_pitches" << YAML::Value << d.num_pitches;
  out << YAML::Key << "num_velocities" << YAML::Value << d.num_velocities;
  out << YAML::Key << "sigma_data" << YAML::Value << d.sigma_data;
  out << YAML::Key << "modes_per_condition" << YAML::Value << d.modes_per_condition;
  out << YAML::Key << "bimodal_separation" << YAML::Value << d.bimodal_separation;
  out << YAML::Key << "seed" << YAML::Value << d.seed;
  out << YAML::Key << "n_per_condition" << YAML::Value << c.n_per_condition;
  out << YAML::Key << "class_centroids" << YAML::Value << YAML::BeginSeq;
  for (const auto& centroid : d.class_centroids) out << YAML::Flow << centroid;
  out << YAML::EndSeq;
  out << YAML::Key << "pitch_axis" << YAML::Value << YAML::Flow << d.pitch_axis;
  out << YAML::Key << "pitch_offsets" << YAML::Value << YAML::Flow << d.pitch_offsets;
  out << YAML::Key << "velocity_axis" << YAML::Value << YAML::Flow << d.velocity_axis;
  out << YAML::Key << "velocity_offsets" << YAML::Value << YAML::Flow << d.velocity_offsets;
  out << YAML::Key << "ambiguity_axis" << YAML::Value << YAML::Flow << d.ambiguity_axis;
  out << YAML::EndMap;

  out << YAML::Key << "net" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "hidden" << YAML::Value << c.net.hidden;
  out << YAML::Key << "depth" << YAML::Value << c.net.depth;
  out << YAML::Key << "mlp_hidden" << YAML::Value << c.net.mlp_hidden;
  out << YAML::EndMap;

  const TrainConfig& t = c.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "beta1" << YAML::Value << t.beta1;
  out << YAML::Key << "beta2" << YAML::Value << t.beta2;
  out << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps;
  out << YAML::Key << "weight_decay" << YAML::Value << t.weight_decay;
  out << YAML::Key << "steps" << YAML::Value << t.steps;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "num_timesteps" << YAML::Value << t.num_timesteps;
  out << YAML::Key << "logvar_clip" << YAML::Value << t.logvar_clip;
  out << YAML::Key << "time_sampling" << YAML::Value
      << (t.time_sampling == TimeSampling::kDiscreteGrid ? "grid" : "continuous");
  out << YAML::Key << "freeze_logvar_head" << YAML::Value << t.freeze_logvar_head;
  out << YAML::EndMap;

  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_steps" << YAML::Value << c.sampler.num_steps;
  out << YAML::Key << "solver" << YAML::Value << std::string(solver_name(c.sampler.solver));
  out << YAML::Key << "tau" << YAML::Value << c.sampler.tau;
  out << YAML::EndMap;

  const SearchConfig& s = c.search;
  out << YAML::Key << "search" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_candidates" << YAML::Value << s.n_candidates;
  out << YAML::Key << "lambda" << YAML::Value << s.lambda;
  out << YAML::Key << "objective" << YAML::Value << std::string(objective_name(s.objective));
  out << YAML::Key << "guided_steps" << YAML::Value << s.guided_steps;
  out << YAML::Key << "branch" << YAML::Value << s.branch;
  if (s.tau_override) out << YAML::Key << "tau" << YAML::Value << *s.tau_override;
  out << YAML::Key << "early_stop" << YAML::Value;
  if (s.early_stop) {
    out << YAML::BeginMap;
    out << YAML::Key << "window" << YAML::Value << s.early_stop->window;
    out << YAML::Key << "min_delta" << YAML::Value << s.early_stop->min_delta;
    out << YAML::EndMap;
  } else {
    out << "off";
  }
  out << YAML::EndMap;

  out << YAML::Key << "embedding" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dim" << YAML::Value << c.embedding.dim;
  out << YAML::Key << "seed" << YAML::Value << c.embedding.seed;
  out << YAML::EndMap;

  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "energy_cap" << YAML::Value << c.eval.energy_cap;
  out << YAML::Key << "reference_draws" << YAML::Value << c.eval.reference_draws;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace dfm
