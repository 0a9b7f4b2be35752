#include "dfm/search.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"
#include "dfm/metrics.hpp"

namespace dfm {

Embedder::Embedder(int data_dim, int embed_dim, std::uint64_t seed)
    : data_dim_(data_dim), embed_dim_(embed_dim), seed_(seed) {
  if (data_dim < 1 || embed_dim < 1) throw InputDomainError("embedder dimensions must be positive");
  Rng rng = Rng(seed).child(0xe3bed);
  weights_.resize(static_cast<std::size_t>(embed_dim) * static_cast<std::size_t>(data_dim));
  bias_.resize(static_cast<std::size_t>(embed_dim));
  for (double& w : weights_) w = 0.5 * rng.normal();
  for (double& b : bias_) b = 0.5 * rng.normal();
}

Embedding Embedder::operator()(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(data_dim_)) throw InputDomainError("embedder input dimension mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericDomainError("non-finite embedder input");
  }
  const auto e = static_cast<std::size_t>(embed_dim_);
  Embedding out(e);
  kernels::active().gemv(weights_.data(), x.data(), bias_.data(), out.data(), e, x.size());
  for (double& v : out) v = std::tanh(v);
  const double norm = std::sqrt(kernels::dot(out, out));
  // tanh of a random affine map is never identically zero for finite x; the
  // guard covers the measure-zero case.
  if (norm == 0.0) {
    out.assign(e, 0.0);
    out[0] = 1.0;
    return out;
  }
  for (double& v : out) v /= norm;
  return out;
}

Embedding embed_sample(std::span<const double> x, const Embedder& embedder) { return embedder(x); }

Embedding embed_condition_text(const ConditionSet& cond, const DatasetSpec& spec, const Embedder& embedder) {
  if (cond.class_id < 0 || cond.class_id >= spec.num_classes) {
    throw InputDomainError("unknown class id " + std::to_string(cond.class_id));
  }
  return embedder(spec.class_centroids[static_cast<std::size_t>(cond.class_id)]);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(kernels::dot(a, a));
  const double nb = std::sqrt(kernels::dot(b, b));
  if (na == 0.0 || nb == 0.0) throw InputDomainError("cosine of a zero vector");
  return std::clamp(kernels::dot(a, b) / (na * nb), -1.0, 1.0);
}

double consistency_score(const Embedding& candidate, std::span<const Embedding> priors) {
  if (priors.empty()) throw UndefinedScoreError("consistency score needs at least one prior note");
  double sum = 0.0;
  for (const Embedding& p : priors) sum += cosine_similarity(candidate, p);
  return sum / static_cast<double>(priors.size());
}

double prompt_score(const Embedding& candidate, const Embedding& text) { return cosine_similarity(candidate, text); }

double total_score(double consistency, double prompt, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputDomainError("lambda must lie in [0, 1]");
  return lambda * consistency + (1.0 - lambda) * prompt;
}

double combined_loss(double tcc_value, double clap_value, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputDomainError("lambda must lie in [0, 1]");
  if (!(tcc_value >= 0.0)) throw InputDomainError("TCC must be non-negative");
  return lambda * tcc_value + (1.0 - lambda) * (1.0 - clap_value);
}

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::kPromptOnly:
      return "prompt_only";
    case Objective::kConsistencyOnly:
      return "consistency_only";
    case Objective::kCombined:
      return "combined";
    case Objective::kCombinedLoss:
      return "combined_loss";
    case Objective::kConfidence:
      return "confidence";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  for (Objective o : {Objective::kPromptOnly, Objective::kConsistencyOnly, Objective::kCombined,
                      Objective::kCombinedLoss, Objective::kConfidence}) {
    if (name == objective_name(o)) return o;
  }
  throw InputDomainError("unknown objective '" + std::string(name) + "'");
}

bool objective_minimizes(Objective o) { return o == Objective::kCombinedLoss; }

void SearchConfig::validate(const SamplerConfig& sampler) const {
  if (n_candidates < 1) throw InputDomainError("N must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputDomainError("lambda must lie in [0, 1]");
  if (guided_steps < 0 || guided_steps > sampler.num_steps) {
    throw InputDomainError("guided_steps must lie in [0, num_steps]");
  }
  if (branch < 1) throw InputDomainError("branch must be >= 1");
  if (tau_override && !(*tau_override >= 0.0)) throw InputDomainError("tau override must be >= 0");
  if (early_stop && (early_stop->window < 1 || !(early_stop->min_delta >= 0.0))) {
    throw InputDomainError("early stop needs window >= 1 and min_delta >= 0");
  }
}

double SearchConfig::candidate_tau() const { return tau_override ? *tau_override : temperature(n_candidates); }

Scores score_candidate(const Embedding& embedding, std::span<const double> sample, double confidence,
                       const SearchContext& ctx, double lambda) {
  Scores s;
  s.confidence = confidence;
  s.prompt = ctx.text_embedding.empty() ? 0.0 : prompt_score(embedding, ctx.text_embedding);
  if (!ctx.prior_embeddings.empty()) {
    s.consistency = consistency_score(embedding, ctx.prior_embeddings);
    s.combined = total_score(*s.consistency, s.prompt, lambda);
  }
  if (!ctx.prior_samples.empty()) {
    std::vector<ClipFeatures> group(ctx.prior_samples.begin(), ctx.prior_samples.end());
    group.emplace_back(sample.begin(), sample.end());
    s.combined_loss = combined_loss(timbre_consistency_loss(group), s.prompt, lambda);
  }
  return s;
}

double selection_key(const Scores& scores, Objective objective) {
  auto need = [&](const std::optional<double>& v) {
    if (!v) {
      throw UndefinedScoreError("objective '" + std::string(objective_name(objective)) +
                                "' needs at least one prior note");
    }
    return *v;
  };
  switch (objective) {
    case Objective::kPromptOnly:
      return scores.prompt;
    case Objective::kConsistencyOnly:
      return need(scores.consistency);
    case Objective::kCombined:
      return need(scores.combined);
    case Objective::kCombinedLoss:
      return -need(scores.combined_loss);
    case Objective::kConfidence:
      return scores.confidence;
  }
  return 0.0;
}

std::size_t select_best(std::span<const SearchCandidate> candidates, Objective objective) {
  if (candidates.empty()) throw InputDomainError("no candidates to select from");
  std::size_t best = 0;
  double best_key = selection_key(candidates[0].scores, objective);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double k = selection_key(candidates[i].scores, objective);
    if (k > best_key) {
      best = i;
      best_key = k;
    }
  }
  return best;
}

Trajectory guided_integrate(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                            const SearchContext& ctx, const Embedder& embedder, const SearchConfig& search,
                            const SamplerConfig& sampler, Rng& rng) {
  sampler.validate();
  search.validate(sampler);
  const std::size_t d = x0.size();
  if (d != static_cast<std::size_t>(params.shape().data_dim)) {
    throw InputDomainError("initial state has the wrong dimension");
  }
  const int n = sampler.num_steps;
  const int first_guided = n - search.guided_steps;
  const Rng branch_root = rng.child(0x6d1de);

  Trajectory traj;
  traj.states.push_back({0.0, std::vector<double>(x0.begin(), x0.end())});
  for (int k = 0; k < n; ++k) {
    const std::vector<double>& x = traj.states.back().x;
    std::vector<double> eps = rng.normal_vector(d);
    StepOutcome chosen = integrate_step(params, x, k, cond, sampler, eps);

    if (k >= first_guided && search.branch > 1) {
      auto preview_key = [&](const StepOutcome& o) {
        const std::vector<double> preview =
            k + 1 < n ? mean_completion(params, o.x_next, k + 1, cond, sampler) : o.x_next;
        const Scores s = score_candidate(embedder(preview), preview, traj.cum_log_confidence + o.log_density, ctx,
                                         search.lambda);
        return selection_key(s, search.objective);
      };
      double best_key = preview_key(chosen);
      const Rng step_root = branch_root.child(static_cast<std::uint64_t>(k));
      for (int b = 1; b < search.branch; ++b) {
        std::vector<double> alt_eps = step_root.child(static_cast<std::uint64_t>(b)).normal_vector(d);
        StepOutcome alt = integrate_step(params, x, k, cond, sampler, alt_eps);
        const double key = preview_key(alt);
        if (key > best_key) {
          best_key = key;
          chosen = std::move(alt);
          eps = std::move(alt_eps);
        }
      }
    }

    traj.cum_log_confidence += chosen.log_density;
    traj.sampled_velocities.push_back(std::move(chosen.sampled_velocity));
    traj.noise_draws.push_back(std::move(eps));
    traj.states.push_back({grid_time(k + 1, n), std::move(chosen.x_next)});
  }
  return traj;
}

Trajectory guided_generate(const NetParams& params, const ConditionSet& cond, const SearchContext& ctx,
                           const Embedder& embedder, const SearchConfig& search, const SamplerConfig& sampler,
                           Rng& rng) {
  const auto x0 = rng.normal_vector(static_cast<std::size_t>(params.shape().data_dim));
  return guided_integrate(params, x0, cond, ctx, embedder, search, sampler, rng);
}

BestOfNResult best_of_n(const NetParams& params, const ConditionSet& cond, const SearchContext& ctx,
                        const Embedder& embedder, const SearchConfig& search, const SamplerConfig& sampler,
                        const Rng& rng) {
  search.validate(sampler);
  BestOfNResult result;
  result.tau = search.candidate_tau();
  SamplerConfig cfg = sampler;
  cfg.tau = result.tau;

  std::size_t best = 0;
  std::vector<double> running_best;
  for (int j = 0; j < search.n_candidates; ++j) {
    Rng stream = rng.child(static_cast<std::uint64_t>(j));
    SearchCandidate c;
    c.index = static_cast<std::size_t>(j);
    c.trajectory = search.guided_steps > 0 ? guided_generate(params, cond, ctx, embedder, search, cfg, stream)
                                           : generate_trajectory(params, cond, cfg, stream);
    c.sample = c.trajectory.final_state();
    c.embedding = embedder(c.sample);
    c.scores = score_candidate(c.embedding, c.sample, c.trajectory.cum_log_confidence, ctx, search.lambda);
    const double key = selection_key(c.scores, search.objective);
    if (j == 0 || key > running_best.back()) best = static_cast<std::size_t>(j);
    running_best.push_back(j == 0 ? key : std::max(key, running_best.back()));

    SelectionLogEntry entry{ctx.note_index, c.index, c.scores, result.tau, running_best.back(), false};
    result.candidates.push_back(std::move(c));

    if (search.early_stop && j + 1 < search.n_candidates) {
      const auto w = static_cast<std::size_t>(search.early_stop->window);
      const std::size_t count = running_best.size();
      if (count > w && running_best[count - 1] - running_best[count - 1 - w] < search.early_stop->min_delta) {
        entry.early_stop = true;
        result.stopped_early = true;
      }
    }
    result.log.push_back(entry);
    if (result.stopped_early) break;
  }
  result.winner = result.candidates[best];
  return result;
}

InstrumentResult generate_instrument(const NetParams& params, std::span<const ConditionSet> conds,
                                     const DatasetSpec& spec, const Embedder& embedder, const SearchConfig& search,
                                     const SamplerConfig& sampler, const Rng& rng) {
  if (conds.empty()) throw InputDomainError("instrument needs at least one note");
  for (const ConditionSet& c : conds) {
    if (c.class_id != conds.front().class_id) throw InputDomainError("instrument notes must share one class id");
  }
  search.validate(sampler);
  InstrumentResult out;
  SearchContext ctx;
  ctx.text_embedding = embed_condition_text(conds.front(), spec, embedder);

  for (std::size_t m = 0; m < conds.size(); ++m) {
    const Rng note_rng = rng.child(m);
    ctx.note_index = static_cast<int>(m);
    NoteResult note;
    note.cond = conds[m];
    note.generation_index = m;
    if (m == 0) {
      SamplerConfig cfg = sampler;
      cfg.tau = 0.0;
      Rng stream = note_rng.child(0);
      Trajectory traj = generate_trajectory(params, conds[m], cfg, stream);
      note.sample = traj.final_state();
      note.embedding = embedder(note.sample);
      note.scores = score_candidate(note.embedding, note.sample, traj.cum_log_confidence, ctx, search.lambda);
      out.log.push_back({0, 0, note.scores, 0.0, 0.0, false});
      note.pool.push_back({std::move(traj), note.sample, note.embedding, note.scores, 0});
    } else {
      BestOfNResult r = best_of_n(params, conds[m], ctx, embedder, search, sampler, note_rng);
      note.sample = r.winner.sample;
      note.embedding = r.winner.embedding;
      note.scores = r.winner.scores;
      note.candidates_evaluated = r.candidates.size();
      note.winner_index = r.winner.index;
      note.tau = r.tau;
      out.log.insert(out.log.end(), r.log.begin(), r.log.end());
      note.pool = std::move(r.candidates);
    }
    ctx.prior_samples.push_back(note.sample);
    ctx.prior_embeddings.push_back(note.embedding);
    out.notes.push_back(std::move(note));
  }
  std::stable_sort(out.notes.begin(), out.notes.end(),
                   [](const NoteResult& a, const NoteResult& b) { return a.cond.pitch_id < b.cond.pitch_id; });
  return out;
}

std::vector<SweepRow> guided_sweep(const NetParams& params, std::span<const ConditionSet> conds,
                                   const DatasetSpec& spec, const Embedder& embedder, const SearchConfig& search,
                                   const SamplerConfig& sampler, std::span<const int> guided_steps_list, int seeds,
                                   const Rng& rng) {
  if (conds.empty()) throw InputDomainError("sweep needs at least one condition");
  if (seeds < 1) throw InputDomainError("sweep needs at least one seed");
  SamplerConfig cfg = sampler;
  cfg.tau = search.tau_override ? *search.tau_override : temperature(search.branch);
  std::vector<SweepRow> rows;
  for (int s = 0; s < seeds; ++s) {
    const ConditionSet& cond = conds[static_cast<std::size_t>(s) % conds.size()];
    SearchContext ctx;
    ctx.text_embedding = embed_condition_text(cond, spec, embedder);
    for (int g : guided_steps_list) {
      SearchConfig sc = search;
      sc.guided_steps = g;
      Rng stream = rng.child(static_cast<std::uint64_t>(s));
      Trajectory tr = guided_generate(params, cond, ctx, embedder, sc, cfg, stream);
      SweepRow row;
      row.seed_index = s;
      row.guided_steps = g;
      row.cond = cond;
      row.sample = tr.final_state();
      row.prompt = prompt_score(embedder(row.sample), ctx.text_embedding);
      row.confidence = tr.cum_log_confidence;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace dfm
