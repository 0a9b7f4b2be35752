#pragma once

// Test-time search over sampled trajectories: candidate scoring (timbre
// consistency against earlier notes, prompt adherence, their weighted sum,
// the TCC-based combined loss, model confidence), best-of-N selection with
// optional early stopping, greedy per-step guided integration, and
// note-by-note instrument assembly.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dfm/datagen.hpp"
#include "dfm/net.hpp"
#include "dfm/rng.hpp"
#include "dfm/sampler.hpp"

namespace dfm {

/// Unit-norm feature vector.
using Embedding = std::vector<double>;

inline constexpr int kDefaultEmbedDim = 32;

/// Fixed seeded stand-in for an audio embedding model:
/// x -> normalize(tanh(W x + b)), W and b drawn once from N(0, 0.5^2).
class Embedder {
 public:
  Embedder(int data_dim, int embed_dim = kDefaultEmbedDim, std::uint64_t seed = 0);

  Embedding operator()(std::span<const double> x) const;

  int data_dim() const { return data_dim_; }
  int embed_dim() const { return embed_dim_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int data_dim_;
  int embed_dim_;
  std::uint64_t seed_;
  std::vector<double> weights_;  // embed_dim x data_dim
  std::vector<double> bias_;
};

Embedding embed_sample(std::span<const double> x, const Embedder& embedder);
/// Text-prompt stand-in: the embedding of the class centroid.
Embedding embed_condition_text(const ConditionSet& cond, const DatasetSpec& spec, const Embedder& embedder);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Mean cosine between the candidate and every prior note embedding.
/// Throws UndefinedScoreError when there are no priors.
double consistency_score(const Embedding& candidate, std::span<const Embedding> priors);
double prompt_score(const Embedding& candidate, const Embedding& text);
/// lambda * consistency + (1 - lambda) * prompt
double total_score(double consistency, double prompt, double lambda);
/// lambda * tcc + (1 - lambda) * (1 - clap); lower is better.
double combined_loss(double tcc_value, double clap_value, double lambda);

enum class Objective { kPromptOnly, kConsistencyOnly, kCombined, kCombinedLoss, kConfidence };

std::string_view objective_name(Objective o);
Objective parse_objective(std::string_view name);
/// True for objectives that are minimized.
bool objective_minimizes(Objective o);

struct EarlyStop {
  int window = 4;
  double min_delta = 1e-4;
};

struct SearchConfig {
  int n_candidates = 8;
  double lambda = 0.7;
  Objective objective = Objective::kCombined;
  int guided_steps = 0;
  int branch = 8;
  std::optional<double> tau_override;
  std::optional<EarlyStop> early_stop;

  void validate(const SamplerConfig& sampler) const;
  /// tau_override if set, else temperature(n_candidates).
  double candidate_tau() const;
};

struct Scores {
  std::optional<double> consistency;
  double prompt = 0.0;
  std::optional<double> combined;       // weighted total (maximized)
  std::optional<double> combined_loss;  // TCC-based (minimized)
  double confidence = 0.0;
};

/// What a candidate is compared against.
struct SearchContext {
  std::vector<std::vector<double>> prior_samples;
  std::vector<Embedding> prior_embeddings;
  Embedding text_embedding;
  int note_index = 0;
};

Scores score_candidate(const Embedding& embedding, std::span<const double> sample, double confidence,
                       const SearchContext& ctx, double lambda);

/// Value used for selection: larger is better for every objective
/// (minimized objectives are negated). Throws UndefinedScoreError if the
/// objective's score is missing.
double selection_key(const Scores& scores, Objective objective);

struct SearchCandidate {
  Trajectory trajectory;
  std::vector<double> sample;
  Embedding embedding;
  Scores scores;
  std::size_t index = 0;
};

/// Index of the best candidate; ties go to the lower index.
std::size_t select_best(std::span<const SearchCandidate> candidates, Objective objective);

struct SelectionLogEntry {
  int note_index = 0;
  std::size_t candidate_index = 0;
  Scores scores;
  double tau = 0.0;
  double running_best = 0.0;  // best selection key so far
  bool early_stop = false;    // generation halted after this candidate
};

struct BestOfNResult {
  SearchCandidate winner;
  std::vector<SearchCandidate> candidates;
  std::vector<SelectionLogEntry> log;
  double tau = 0.0;
  bool stopped_early = false;
};

/// Generates up to n_candidates trajectories, candidate j on stream
/// rng.child(j), scores them, and returns the extremal one.
BestOfNResult best_of_n(const NetParams& params, const ConditionSet& cond, const SearchContext& ctx,
                        const Embedder& embedder, const SearchConfig& search, const SamplerConfig& sampler,
                        const Rng& rng);

/// Integrates from x0; on each of the last `guided_steps` grid steps it
/// tries `branch` noise draws, previews each resulting state to t=1 with
/// the mean field, and keeps the best preview under the objective.
/// Branch 0 reuses the draw plain integration would have made, so with
/// guided_steps=0 or branch=1 this equals integrate() on the same stream.
Trajectory guided_integrate(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                            const SearchContext& ctx, const Embedder& embedder, const SearchConfig& search,
                            const SamplerConfig& sampler, Rng& rng);

/// Draws x0 from rng, then guided_integrate().
Trajectory guided_generate(const NetParams& params, const ConditionSet& cond, const SearchContext& ctx,
                           const Embedder& embedder, const SearchConfig& search, const SamplerConfig& sampler,
                           Rng& rng);

struct NoteResult {
  ConditionSet cond;
  std::vector<double> sample;
  Embedding embedding;
  std::size_t generation_index = 0;  // position in the requested order
  std::size_t candidates_evaluated = 1;
  std::size_t winner_index = 0;
  double tau = 0.0;
  Scores scores;
  std::vector<SearchCandidate> pool;  // every candidate evaluated for this note
};

struct InstrumentResult {
  std::vector<NoteResult> notes;  // sorted by pitch id
  std::vector<SelectionLogEntry> log;
};

/// First note: plain integration at tau=0. Every later note: best_of_n
/// against the notes accepted so far. Note m uses stream rng.child(m).
/// All conditions must share one class id.
InstrumentResult generate_instrument(const NetParams& params, std::span<const ConditionSet> conds,
                                     const DatasetSpec& spec, const Embedder& embedder, const SearchConfig& search,
                                     const SamplerConfig& sampler, const Rng& rng);

struct SweepRow {
  int seed_index = 0;
  int guided_steps = 0;
  ConditionSet cond;
  double prompt = 0.0;
  double confidence = 0.0;
  std::vector<double> sample;
};

/// For each seed index s and each entry g of guided_steps_list: one guided
/// trajectory for conds[s % conds.size()] with `branch` alternatives on the
/// last g steps, scored by prompt adherence against the class text. Seed s
/// draws from rng.child(s) for every g, so rows differ only in g. tau is
/// search.tau_override or temperature(branch).
std::vector<SweepRow> guided_sweep(const NetParams& params, std::span<const ConditionSet> conds,
                                   const DatasetSpec& spec, const Embedder& embedder, const SearchConfig& search,
                                   const SamplerConfig& sampler, std::span<const int> guided_steps_list, int seeds,
                                   const Rng& rng);

}  // namespace dfm
