#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dfm/checkpoint.hpp"
#include "dfm/config.hpp"
#include "dfm/error.hpp"
#include "dfm/gradcheck.hpp"
#include "dfm/io.hpp"
#include "dfm/metrics.hpp"
#include "dfm/search.hpp"

namespace dfm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kReferenceStream = 0xe7a1;

struct Run {
  RunConfig cfg;
  fs::path out;
};

Run resolve(const CommonOptions& o) {
  Run r;
  if (!o.config_path.empty()) r.cfg = load_config(o.config_path);
  if (o.seed) r.cfg.seed = *o.seed;
  if (!o.out_dir.empty()) {
    r.cfg.output_dir = o.out_dir;
  } else if (const char* env = std::getenv("DFM_OUT_DIR"); env && *env) {
    r.cfg.output_dir = env;
  }
  r.out = r.cfg.output_dir;
  return r;
}

void prepare(const Run& r, const json& command) {
  std::error_code ec;
  fs::create_directories(r.out, ec);
  if (ec) throw Error("cannot create output directory " + r.out.string() + ": " + ec.message());
  write_text_file(r.out / "resolved_config.yaml", dump_config(r.cfg));
  write_text_file(r.out / "command.json", command.dump(2) + "\n");
}

json common_json(const char* name, const CommonOptions& o) {
  json j{{"command", name}};
  j["config"] = o.config_path;
  return j;
}

ConditionSet parse_cond(const std::string& text) {
  ConditionSet c{};
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> c.class_id >> sep1 >> c.pitch_id >> sep2 >> c.velocity_id) || sep1 != ',' || sep2 != ',' ||
      in.peek() != std::char_traits<char>::eof()) {
    throw InputDomainError("condition '" + text + "' is not of the form class,pitch,velocity");
  }
  return c;
}

std::vector<ConditionSet> parse_conds(const std::vector<std::string>& texts, const DatasetSpec& spec) {
  std::vector<ConditionSet> out;
  for (const auto& t : texts) {
    out.push_back(parse_cond(t));
    spec.check_condition(out.back());
  }
  return out;
}

std::string cond_label(const ConditionSet& c) {
  return "c" + std::to_string(c.class_id) + "-p" + std::to_string(c.pitch_id) + "-v" + std::to_string(c.velocity_id);
}

std::size_t cond_index(const ConditionSet& c, const DatasetSpec& spec) {
  return (static_cast<std::size_t>(c.class_id) * static_cast<std::size_t>(spec.num_pitches) +
          static_cast<std::size_t>(c.pitch_id)) *
             static_cast<std::size_t>(spec.num_velocities) +
         static_cast<std::size_t>(c.velocity_id);
}

NetParams load_matching_checkpoint(const std::string& path, const RunConfig& cfg) {
  if (path.empty()) throw InputDomainError("--checkpoint is required");
  NetParams p = load_checkpoint(path);
  const NetShape want = cfg.net_shape();
  const NetShape& got = p.shape();
  if (got.data_dim != want.data_dim || got.num_classes != want.num_classes || got.num_pitches != want.num_pitches ||
      got.num_velocities != want.num_velocities) {
    throw ConfigError(path + ": checkpoint was trained for a different dataset layout than the config describes");
  }
  return p;
}

std::string samples_csv(int d, const std::vector<std::vector<double>>& xs, const std::vector<ConditionSet>& cs) {
  std::ostringstream out;
  write_samples_csv(out, d, xs, cs);
  return out.str();
}

SampleTable read_table(const std::string& path) {
  if (path.empty()) throw InputDomainError("--samples is required");
  return read_samples_csv(fs::path(path));
}

}  // namespace

int run_datagen(const DatagenOptions& o) {
  Run r = resolve(o.common);
  if (o.n_per_condition) r.cfg.n_per_condition = *o.n_per_condition;
  prepare(r, common_json("datagen", o.common));
  DatasetSpec spec = r.cfg.dataset;
  const auto data = make_dataset(spec, r.cfg.n_per_condition);
  std::ostringstream out;
  write_dataset_csv(out, spec, data);
  write_text_file(r.out / "dataset.csv", out.str());
  std::cout << "wrote " << data.size() << " samples to " << (r.out / "dataset.csv").string() << "\n";
  return 0;
}

int run_train(const TrainOptions& o) {
  Run r = resolve(o.common);
  if (o.steps) r.cfg.train.steps = *o.steps;
  if (o.log_every < 1) throw InputDomainError("--log-every must be >= 1");
  json cmd = common_json("train", o.common);
  cmd["data"] = o.data_path;
  cmd["log_every"] = o.log_every;

  std::vector<NoteSample> data;
  if (o.data_path.empty()) {
    data = make_dataset(r.cfg.dataset, r.cfg.n_per_condition);
  } else {
    std::ifstream in(o.data_path);
    if (!in) throw InputDomainError("cannot open " + o.data_path);
    auto [spec, table] = read_dataset_csv(in);
    r.cfg.dataset = spec;
    for (std::size_t i = 0; i < table.x.size(); ++i) data.push_back({table.x[i], table.conds[i]});
  }
  prepare(r, cmd);

  TrainConfig tc = r.cfg.train;
  tc.seed = r.cfg.train_seed();
  NetParams init = NetParams::initialize(r.cfg.net_shape(), r.cfg.init_seed());

  std::ostringstream log;
  const long last = tc.steps - 1;
  TrainResult result = train(data, std::move(init), tc, [&](long step, const StepStats& s) {
    if (step % o.log_every == 0 || step == last) log << to_json(s, step).dump() << "\n";
  });
  write_text_file(r.out / "train_log.jsonl", log.str());
  save_checkpoint(r.out / "checkpoint.bin", result.params);

  std::cout << "trained " << tc.steps << " steps";
  if (!result.log.empty()) {
    std::cout << ", loss " << format_double(result.log.front().loss) << " -> " << format_double(result.log.back().loss);
  }
  std::cout << "\n";
  return 0;
}

int run_sample(const SampleOptions& o) {
  Run r = resolve(o.common);
  if (o.tau) r.cfg.sampler.tau = *o.tau;
  if (o.n < 0) throw InputDomainError("--n must be >= 0");
  json cmd = common_json("sample", o.common);
  cmd["checkpoint"] = o.checkpoint;
  cmd["conds"] = o.conds;
  cmd["all_conditions"] = o.all_conditions;
  cmd["n"] = o.n;
  cmd["dump"] = o.dump;

  r.cfg.sampler.validate();
  const NetParams params = load_matching_checkpoint(o.checkpoint, r.cfg);
  std::vector<ConditionSet> conds =
      o.all_conditions ? r.cfg.dataset.all_conditions() : parse_conds(o.conds, r.cfg.dataset);
  if (conds.empty()) throw InputDomainError("give at least one --cond or --all-conditions");
  prepare(r, cmd);

  // Row k draws from Rng(seed).child(k).child(0), the stream search uses
  // for note k's first candidate.
  const Rng root(r.cfg.seed);
  std::vector<std::vector<double>> xs;
  std::vector<ConditionSet> cs;
  std::ostringstream dump;
  std::size_t row = 0;
  for (const ConditionSet& c : conds) {
    for (int i = 0; i < o.n; ++i, ++row) {
      Rng stream = root.child(row).child(0);
      Trajectory tr = generate_trajectory(params, c, r.cfg.sampler, stream);
      xs.push_back(tr.final_state());
      cs.push_back(c);
      if (o.dump) dump << json{{"row", row}, {"cond", to_json(c)}, {"trajectory", to_json(tr)}}.dump() << "\n";
    }
  }
  write_text_file(r.out / "samples.csv", samples_csv(params.shape().data_dim, xs, cs));
  if (o.dump) write_text_file(r.out / "trajectories.jsonl", dump.str());
  std::cout << "wrote " << xs.size() << " samples\n";
  return 0;
}

namespace {

std::vector<int> parse_sweep(const std::string& spec, int num_steps) {
  const std::string prefix = "guided_steps=";
  if (spec.rfind(prefix, 0) != 0) throw InputDomainError("--sweep must look like guided_steps=1,2,4");
  std::vector<int> out;
  std::istringstream in(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(in, item, ',')) {
    int g = 0;
    try {
      std::size_t used = 0;
      g = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputDomainError("--sweep: bad guided_steps value '" + item + "'");
    }
    if (g < 0 || g > num_steps) throw InputDomainError("--sweep: guided_steps must lie in [0, num_steps]");
    out.push_back(g);
  }
  if (out.empty()) throw InputDomainError("--sweep: empty list");
  return out;
}

json candidate_json(const SearchCandidate& c) {
  return {{"index", c.index},
          {"sample", c.sample},
          {"scores", to_json(c.scores)},
          {"cum_log_confidence", c.trajectory.cum_log_confidence}};
}

}  // namespace

int run_search(const SearchOptions& o) {
  Run r = resolve(o.common);
  SearchConfig& sc = r.cfg.search;
  if (o.n) sc.n_candidates = *o.n;
  if (o.objective) sc.objective = parse_objective(*o.objective);
  if (o.guided_steps) sc.guided_steps = *o.guided_steps;
  if (o.branch) sc.branch = *o.branch;
  if (o.lambda) sc.lambda = *o.lambda;
  if (o.tau) sc.tau_override = *o.tau;
  sc.validate(r.cfg.sampler);

  json cmd = common_json("search", o.common);
  cmd["checkpoint"] = o.checkpoint;
  cmd["conds"] = o.conds;
  cmd["instrument_class"] = o.instrument_class ? json(*o.instrument_class) : json(nullptr);
  cmd["instrument_velocity"] = o.instrument_velocity;
  cmd["sweep"] = o.sweep;
  cmd["sweep_seeds"] = o.sweep_seeds;

  const NetParams params = load_matching_checkpoint(o.checkpoint, r.cfg);
  const DatasetSpec& spec = r.cfg.dataset;
  std::vector<ConditionSet> conds = parse_conds(o.conds, spec);
  if (o.instrument_class) {
    for (int p = 0; p < spec.num_pitches; ++p) conds.push_back({*o.instrument_class, p, o.instrument_velocity});
    spec.check_condition(conds.back());
  }
  if (conds.empty()) throw InputDomainError("give at least one --cond or --instrument");
  const Embedder embedder = r.cfg.make_embedder();
  const int d = params.shape().data_dim;
  const Rng root(r.cfg.seed);

  if (!o.sweep.empty()) {
    const std::vector<int> steps = parse_sweep(o.sweep, r.cfg.sampler.num_steps);
    if (o.sweep_seeds < 1) throw InputDomainError("--sweep-seeds must be >= 1");
    prepare(r, cmd);
    const auto rows = guided_sweep(params, conds, spec, embedder, sc, r.cfg.sampler, steps, o.sweep_seeds, root);
    std::ostringstream out;
    out << "seed_index,guided_steps,class_id,pitch_id,velocity_id,prompt,confidence\n";
    std::map<int, std::pair<double, int>> mean;
    for (const SweepRow& row : rows) {
      out << row.seed_index << ',' << row.guided_steps << ',' << row.cond.class_id << ',' << row.cond.pitch_id << ','
          << row.cond.velocity_id << ',' << format_double(row.prompt) << ',' << format_double(row.confidence) << '\n';
      mean[row.guided_steps].first += row.prompt;
      mean[row.guided_steps].second += 1;
    }
    write_text_file(r.out / "sweep.csv", out.str());
    for (int g : steps) {
      std::cout << "guided_steps=" << g << " mean_prompt=" << format_double(mean[g].first / mean[g].second) << "\n";
    }
    return 0;
  }

  prepare(r, cmd);
  std::vector<std::vector<double>> xs;
  std::vector<ConditionSet> cs;
  std::ostringstream log;
  json notes = json::array();

  if (conds.size() == 1) {
    SearchContext ctx;
    ctx.text_embedding = embed_condition_text(conds[0], spec, embedder);
    BestOfNResult res = best_of_n(params, conds[0], ctx, embedder, sc, r.cfg.sampler, root.child(0));
    for (const auto& e : res.log) log << to_json(e).dump() << "\n";
    json cands = json::array();
    for (const auto& c : res.candidates) cands.push_back(candidate_json(c));
    notes.push_back({{"note_index", 0},
                     {"cond", to_json(conds[0])},
                     {"winner_index", res.winner.index},
                     {"tau", res.tau},
                     {"prior_samples", json::array()},
                     {"candidates", cands}});
    xs.push_back(res.winner.sample);
    cs.push_back(conds[0]);
  } else {
    InstrumentResult res = generate_instrument(params, conds, spec, embedder, sc, r.cfg.sampler, root);
    for (const auto& e : res.log) log << to_json(e).dump() << "\n";
    std::vector<const NoteResult*> by_order(res.notes.size());
    for (const NoteResult& n : res.notes) by_order[n.generation_index] = &n;
    json priors = json::array();
    for (const NoteResult* n : by_order) {
      json cands = json::array();
      for (const auto& c : n->pool) cands.push_back(candidate_json(c));
      notes.push_back({{"note_index", n->generation_index},
                       {"cond", to_json(n->cond)},
                       {"winner_index", n->winner_index},
                       {"tau", n->tau},
                       {"prior_samples", priors},
                       {"candidates", cands}});
      priors.push_back(n->sample);
    }
    for (const NoteResult& n : res.notes) {
      xs.push_back(n.sample);
      cs.push_back(n.cond);
    }
  }

  json doc{{"objective", std::string(objective_name(sc.objective))},
           {"lambda", sc.lambda},
           {"embedding", {{"dim", r.cfg.embedding.dim}, {"seed", r.cfg.embedding.seed}}},
           {"notes", notes}};
  write_text_file(r.out / "candidates.json", doc.dump(1) + "\n");
  write_text_file(r.out / "selection_log.jsonl", log.str());
  write_text_file(r.out / "winners.csv", samples_csv(d, xs, cs));
  if (xs.size() >= 2) {
    std::vector<ClipFeatures> group(xs.begin(), xs.end());
    std::cout << "notes=" << xs.size() << " tcc=" << format_double(timbre_consistency_loss(group)) << "\n";
  } else {
    std::cout << "winner prompt=" << format_double(prompt_score(embedder(xs[0]), embed_condition_text(cs[0], spec, embedder)))
              << "\n";
  }
  return 0;
}

int run_eval(const EvalOptions& o) {
  Run r = resolve(o.common);
  json cmd = common_json("eval", o.common);
  cmd["samples"] = o.samples;
  cmd["reference"] = o.reference;
  const SampleTable samples = read_table(o.samples);
  const DatasetSpec& spec = r.cfg.dataset;
  for (std::size_t i = 0; i < samples.x.size(); ++i) {
    spec.check_condition(samples.conds[i]);
    if (samples.x[i].size() != static_cast<std::size_t>(spec.data_dim)) {
      throw InputDomainError(o.samples + ": sample dimension does not match the dataset");
    }
  }
  std::optional<SampleTable> reference;
  if (!o.reference.empty()) reference = read_table(o.reference);
  prepare(r, cmd);

  auto key = [](const ConditionSet& c) { return std::tuple{c.class_id, c.pitch_id, c.velocity_id}; };
  std::map<std::tuple<int, int, int>, std::vector<std::vector<double>>> by_cond, ref_by_cond;
  std::map<int, std::vector<ClipFeatures>> by_class;
  for (std::size_t i = 0; i < samples.x.size(); ++i) {
    by_cond[key(samples.conds[i])].push_back(samples.x[i]);
    by_class[samples.conds[i].class_id].push_back(samples.x[i]);
  }
  if (reference) {
    for (std::size_t i = 0; i < reference->x.size(); ++i) ref_by_cond[key(reference->conds[i])].push_back(reference->x[i]);
  }

  std::ostringstream out;
  out << "metric,condition,value,n,seed\n";
  auto row = [&](const char* metric, const std::string& cond, double value, std::size_t n) {
    out << metric << ',' << cond << ',' << format_double(value) << ',' << n << ',' << r.cfg.seed << '\n';
  };
  const Rng ref_root = Rng(r.cfg.seed).child(kReferenceStream);
  for (const auto& [k, xs] : by_cond) {
    const ConditionSet c{std::get<0>(k), std::get<1>(k), std::get<2>(k)};
    std::vector<std::vector<double>> ref;
    if (reference) {
      auto it = ref_by_cond.find(k);
      if (it == ref_by_cond.end()) throw InputDomainError("reference has no rows for " + cond_label(c));
      ref = it->second;
    } else {
      Rng rng = ref_root.child(cond_index(c, spec));
      for (int i = 0; i < r.cfg.eval.reference_draws; ++i) ref.push_back(ground_truth_sampler(spec, c, rng).x);
    }
    row("energy_distance", cond_label(c), energy_distance(xs, ref, r.cfg.eval.energy_cap), xs.size());
  }
  for (const auto& [cls, group] : by_class) {
    if (group.size() >= 2) row("tcc", "class" + std::to_string(cls), timbre_consistency_loss(group), group.size());
  }
  if (!samples.x.empty()) {
    const AttributeDeviation dev = attribute_deviation(samples.x, samples.conds, spec);
    row("attribute_deviation_pitch", "all", dev.pitch, samples.x.size());
    row("attribute_deviation_velocity", "all", dev.velocity, samples.x.size());
  }
  write_text_file(r.out / "metrics.csv", out.str());
  std::cout << out.str();
  return 0;
}

int run_gradcheck(const GradcheckOptions& o) {
  Run r = resolve(o.common);
  if (o.seeds < 1) throw InputDomainError("--seeds must be >= 1");
  if (o.dims.empty()) throw InputDomainError("--dims must list at least one dimension");
  json cmd = common_json("gradcheck", o.common);
  cmd["dims"] = o.dims;
  cmd["seeds"] = o.seeds;
  cmd["hidden"] = o.hidden;
  cmd["depth"] = o.depth;
  cmd["batch"] = o.batch;
  cmd["tolerance"] = o.tolerance;
  if (!o.corrupt.empty()) cmd["corrupt"] = o.corrupt;
  prepare(r, cmd);

  std::ostringstream csv;
  csv << "seed,data_dim,tensor,size,max_rel_error,max_abs_error\n";
  std::map<std::string, double> worst_by_tensor;
  std::vector<std::string> order;
  double worst = 0.0;
  for (int d : o.dims) {
    for (int s = 0; s < o.seeds; ++s) {
      GradCheckOptions g;
      g.data_dim = d;
      g.hidden = o.hidden;
      g.depth = o.depth;
      g.mlp_hidden = o.hidden;
      g.batch = o.batch;
      g.corrupt_tensor = o.corrupt;
      const std::uint64_t seed = mix_seed(r.cfg.seed, static_cast<std::uint64_t>(s));
      const GradCheckReport rep = gradient_check(g, seed);
      worst = std::max(worst, rep.max_rel_error);
      for (const TensorGradError& t : rep.tensors) {
        csv << seed << ',' << d << ',' << t.name << ',' << t.size << ',' << format_double(t.max_rel_error) << ','
            << format_double(t.max_abs_error) << '\n';
        if (!worst_by_tensor.contains(t.name)) order.push_back(t.name);
        worst_by_tensor[t.name] = std::max(worst_by_tensor[t.name], t.max_rel_error);
      }
    }
  }
  write_text_file(r.out / "gradcheck.csv", csv.str());
  for (const std::string& name : order) {
    std::cout << name << " max_rel_error=" << format_double(worst_by_tensor[name])
              << (worst_by_tensor[name] < o.tolerance ? "" : "  <-- FAIL") << "\n";
  }
  const bool ok = worst < o.tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << " max_rel_error=" << format_double(worst)
            << " tolerance=" << format_double(o.tolerance) << "\n";
  if (!ok) throw ValidationError("gradient check failed: max relative error " + format_double(worst));
  return 0;
}

}  // namespace dfm::cli
