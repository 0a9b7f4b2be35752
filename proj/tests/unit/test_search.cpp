#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dfm/datagen.hpp"
#include "dfm/error.hpp"
#include "dfm/metrics.hpp"
#include "dfm/search.hpp"

namespace dfm {
namespace {

using Vec = std::vector<double>;

NetParams test_net(std::uint64_t seed = 1) {
  NetParams p = NetParams::initialize(NetShape{2, 12, 2, 12, 4, 12, 3}, seed);
  for (double& v : p.tensor("logvar_head.w")) v = 0.1;
  p.tensor("logvar_head.b")[0] = 0.0;
  return p;
}

// Test-side cosine, independent of the kernels.
double ref_cos(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

struct SearchFixture {
  DatasetSpec spec = DatasetSpec::default_spec();
  NetParams params = test_net();
  Embedder emb{2, 16, 3};
  SamplerConfig sampler{8, Solver::kRk4, 0.0, 0};
  ConditionSet cond{1, 4, 2};
  SearchContext ctx;

  SearchFixture() {
    ctx.text_embedding = embed_condition_text(cond, spec, emb);
    Rng r(77);
    for (int i = 0; i < 3; ++i) {
      Vec x = r.normal_vector(2);
      ctx.prior_samples.push_back(x);
      ctx.prior_embeddings.push_back(emb(x));
    }
    ctx.note_index = 3;
  }
};

TEST(Scores, ConsistencyFixture) {
  const Embedding e1{1, 0, 0}, e2{0, 1, 0};
  const Embedding cand{1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0};
  const std::vector<Embedding> priors{e1, e2};
  EXPECT_NEAR(consistency_score(cand, priors), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(consistency_score(cand, std::vector<Embedding>{}), UndefinedScoreError);
}

TEST(Scores, TotalAndCombinedLoss) {
  EXPECT_DOUBLE_EQ(total_score(0.4, 0.9, 1.0), 0.4);
  EXPECT_DOUBLE_EQ(total_score(0.4, 0.9, 0.0), 0.9);
  EXPECT_NEAR(total_score(0.5, 1.0, 0.7), 0.65, 1e-15);
  EXPECT_NEAR(combined_loss(0.2, 0.8, 0.7), 0.7 * 0.2 + 0.3 * 0.2, 1e-15);
  EXPECT_THROW(total_score(0, 0, 1.5), InputDomainError);
  EXPECT_THROW(combined_loss(-0.1, 0, 0.5), InputDomainError);
}

TEST(Scores, CosineProperties) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Vec{2, 0}, Vec{5, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vec{1, 0}, Vec{-3, 0}), -1.0);
  EXPECT_THROW(cosine_similarity(Vec{0, 0}, Vec{1, 0}), InputDomainError);
}

TEST(Embedder, DeterministicUnitNorm) {
  Embedder a(3, 8, 5), b(3, 8, 5), c(3, 8, 6);
  const Vec x{0.2, -1.0, 3.0};
  Embedding ea = a(x);
  EXPECT_EQ(ea, b(x));
  EXPECT_NE(ea, c(x));
  EXPECT_NEAR(std::inner_product(ea.begin(), ea.end(), ea.begin(), 0.0), 1.0, 1e-14);
  EXPECT_THROW(a(Vec{1.0}), InputDomainError);
}

TEST(Embedder, ContinuousInInput) {
  Embedder e(2, 32, 0);
  const Vec x{0.5, -0.5};
  Vec y = x;
  y[0] += 1e-7;
  EXPECT_GT(ref_cos(e(x), e(y)), 1 - 1e-10);
}

TEST(Embedder, SeparatesClassesOnDefaultSpec) {
  DatasetSpec spec = DatasetSpec::default_spec();
  Embedder e(2, 32, 0);
  auto data = make_dataset(spec, 4);
  for (int k = 0; k < spec.num_classes; ++k) {
    double own = 0, other = 0;
    int n_own = 0, n_other = 0;
    const Embedding text = embed_condition_text({k, 0, 0}, spec, e);
    for (const NoteSample& s : data) {
      const double c = ref_cos(e(s.x), text);
      if (s.cond.class_id == k) {
        own += c;
        ++n_own;
      } else {
        other += c;
        ++n_other;
      }
    }
    EXPECT_GT(own / n_own, other / n_other + 0.1) << "class " << k;
  }
}

TEST(Selection, KeysAndTies) {
  Scores s;
  s.prompt = 0.3;
  s.confidence = -2;
  EXPECT_THROW(selection_key(s, Objective::kCombined), UndefinedScoreError);
  EXPECT_THROW(selection_key(s, Objective::kConsistencyOnly), UndefinedScoreError);
  s.combined_loss = 0.25;
  EXPECT_EQ(selection_key(s, Objective::kCombinedLoss), -0.25);
  EXPECT_TRUE(objective_minimizes(Objective::kCombinedLoss));
  EXPECT_FALSE(objective_minimizes(Objective::kCombined));

  std::vector<SearchCandidate> c(4);
  for (auto& x : c) x.scores.prompt = 0.5;
  c[2].scores.prompt = 0.7;
  c[3].scores.prompt = 0.7;
  EXPECT_EQ(select_best(c, Objective::kPromptOnly), 2u);
  EXPECT_THROW(select_best(std::vector<SearchCandidate>{}, Objective::kPromptOnly), InputDomainError);
  EXPECT_EQ(parse_objective("combined_loss"), Objective::kCombinedLoss);
  EXPECT_THROW(parse_objective("tcc"), InputDomainError);
}

TEST(BestOfN, WinnerMatchesBruteForceRescoring) {
  SearchFixture s;
  for (Objective obj : {Objective::kPromptOnly, Objective::kConsistencyOnly, Objective::kCombined,
                        Objective::kCombinedLoss, Objective::kConfidence}) {
    SearchConfig cfg;
    cfg.n_candidates = 10;
    cfg.objective = obj;
    const Rng root(123);
    BestOfNResult r = best_of_n(s.params, s.cond, s.ctx, s.emb, cfg, s.sampler, root);
    ASSERT_EQ(r.candidates.size(), 10u);
    EXPECT_DOUBLE_EQ(r.tau, temperature(10));

    // Regenerate every candidate and rescore from scratch.
    SamplerConfig sc = s.sampler;
    sc.tau = temperature(10);
    std::size_t best = 0;
    double best_val = 0;
    for (int j = 0; j < 10; ++j) {
      Rng stream = root.child(static_cast<std::uint64_t>(j));
      Trajectory tr = generate_trajectory(s.params, s.cond, sc, stream);
      const Vec x = tr.final_state();
      EXPECT_EQ(x, r.candidates[static_cast<std::size_t>(j)].sample);
      const Embedding e = s.emb(x);
      double cons = 0;
      for (const auto& p : s.ctx.prior_embeddings) cons += ref_cos(e, p) / 3.0;
      const double prompt = ref_cos(e, s.ctx.text_embedding);
      double tcc = 0;
      std::vector<Vec> g = s.ctx.prior_samples;
      g.push_back(x);
      for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = a + 1; b < g.size(); ++b)
          tcc += (std::fabs(g[a][0] - g[b][0]) + std::fabs(g[a][1] - g[b][1])) / 2.0 / 6.0;
      double val = 0;
      switch (obj) {
        case Objective::kPromptOnly: val = prompt; break;
        case Objective::kConsistencyOnly: val = cons; break;
        case Objective::kCombined: val = 0.7 * cons + 0.3 * prompt; break;
        case Objective::kCombinedLoss: val = -(0.7 * tcc + 0.3 * (1 - prompt)); break;
        case Objective::kConfidence: val = tr.cum_log_confidence; break;
      }
      if (j == 0 || val > best_val) {
        best = static_cast<std::size_t>(j);
        best_val = val;
      }
    }
    EXPECT_EQ(r.winner.index, best) << objective_name(obj);
    EXPECT_EQ(r.winner.sample, r.candidates[best].sample);
  }
}

TEST(BestOfN, WinnerScoresMatchRecomputation) {
  SearchFixture s;
  SearchConfig cfg;
  cfg.n_candidates = 6;
  BestOfNResult r = best_of_n(s.params, s.cond, s.ctx, s.emb, cfg, s.sampler, Rng(5));
  Scores again = score_candidate(s.emb(r.winner.sample), r.winner.sample, r.winner.trajectory.cum_log_confidence,
                                 s.ctx, cfg.lambda);
  EXPECT_EQ(*again.combined, *r.winner.scores.combined);
  EXPECT_EQ(again.prompt, r.winner.scores.prompt);
}

TEST(BestOfN, LambdaExtremesMatchSingleObjectives) {
  SearchFixture s;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SearchConfig base;
    base.n_candidates = 8;
    auto winner = [&](Objective o, double lambda) {
      SearchConfig c = base;
      c.objective = o;
      c.lambda = lambda;
      return best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(seed)).winner.index;
    };
    EXPECT_EQ(winner(Objective::kCombined, 1.0), winner(Objective::kConsistencyOnly, 0.5));
    EXPECT_EQ(winner(Objective::kCombined, 0.0), winner(Objective::kPromptOnly, 0.5));
  }
}

TEST(BestOfN, NestedPoolsNeverGetWorse) {
  SearchFixture s;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double prev = -INFINITY;
    std::vector<Vec> prev_pool;
    for (int n : {1, 2, 4, 8, 16}) {
      SearchConfig c;
      c.n_candidates = n;
      c.tau_override = temperature(16);  // fixed tau keeps pool k a prefix of pool 2k
      BestOfNResult r = best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(seed));
      for (std::size_t i = 0; i < prev_pool.size(); ++i) EXPECT_EQ(r.candidates[i].sample, prev_pool[i]);
      const double key = selection_key(r.winner.scores, c.objective);
      EXPECT_GE(key, prev);
      prev = key;
      prev_pool.clear();
      for (const auto& cand : r.candidates) prev_pool.push_back(cand.sample);
    }
  }
}

TEST(BestOfN, EarlyStopping) {
  SearchFixture s;
  SearchConfig c;
  c.n_candidates = 16;
  c.early_stop = EarlyStop{2, 1e9};  // no improvement can clear this bar
  BestOfNResult r = best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(1));
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.candidates.size(), 3u);
  EXPECT_TRUE(r.log.back().early_stop);
  EXPECT_EQ(r.winner.index, select_best(r.candidates, c.objective));

  c.early_stop = EarlyStop{2, 0.0};
  BestOfNResult none = best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(1));
  // Stops only after a window with no change at all.
  EXPECT_EQ(none.winner.index, select_best(none.candidates, c.objective));
  for (std::size_t i = 0; i < none.log.size(); ++i) EXPECT_EQ(none.log[i].candidate_index, i);

  c.early_stop.reset();
  BestOfNResult full = best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(1));
  EXPECT_EQ(full.candidates.size(), 16u);
  EXPECT_FALSE(full.stopped_early);
  // The truncated pool is a prefix of the full one.
  for (std::size_t i = 0; i < r.candidates.size(); ++i) EXPECT_EQ(r.candidates[i].sample, full.candidates[i].sample);
  double prev = -INFINITY;
  for (const auto& e : full.log) {
    EXPECT_GE(e.running_best, prev);
    prev = e.running_best;
  }
}

TEST(BestOfN, ConsistencyObjectiveNeedsPriors) {
  SearchFixture s;
  s.ctx.prior_embeddings.clear();
  s.ctx.prior_samples.clear();
  SearchConfig c;
  c.objective = Objective::kConsistencyOnly;
  EXPECT_THROW(best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(0)), UndefinedScoreError);
  c.objective = Objective::kPromptOnly;
  EXPECT_NO_THROW(best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(0)));
}

TEST(BestOfN, SingleCandidateEqualsPlainSampling) {
  SearchFixture s;
  SearchConfig c;
  c.n_candidates = 1;
  BestOfNResult r = best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(9));
  SamplerConfig sc = s.sampler;
  sc.tau = temperature(1);
  Rng stream = Rng(9).child(0);
  EXPECT_TRUE(r.winner.trajectory == generate_trajectory(s.params, s.cond, sc, stream));
}

TEST(BestOfN, ConfigValidation) {
  SearchFixture s;
  SearchConfig c;
  c.n_candidates = 0;
  EXPECT_THROW(best_of_n(s.params, s.cond, s.ctx, s.emb, c, s.sampler, Rng(0)), InputDomainError);
  c = SearchConfig{};
  c.guided_steps = 9;
  EXPECT_THROW(c.validate(s.sampler), InputDomainError);
  c = SearchConfig{};
  c.branch = 0;
  EXPECT_THROW(c.validate(s.sampler), InputDomainError);
}

TEST(Guided, DegenerateSettingsEqualPlainIntegration) {
  SearchFixture s;
  SamplerConfig sc = s.sampler;
  sc.tau = 0.05;
  const Vec x0{0.4, -0.2};
  Rng plain_rng(3);
  Trajectory plain = integrate(s.params, x0, s.cond, sc, plain_rng);
  for (auto [g, b] : {std::pair{0, 8}, std::pair{8, 1}, std::pair{4, 1}}) {
    SearchConfig c;
    c.guided_steps = g;
    c.branch = b;
    Rng rng(3);
    Trajectory tr = guided_integrate(s.params, x0, s.cond, s.ctx, s.emb, c, sc, rng);
    EXPECT_TRUE(tr == plain) << g << " " << b;
  }
}

TEST(Guided, EachGuidedStepKeepsBestPreview) {
  SearchFixture s;
  SamplerConfig sc = s.sampler;
  sc.tau = 0.5;
  SearchConfig c;
  c.objective = Objective::kPromptOnly;
  c.guided_steps = 1;
  c.branch = 6;
  const Vec x0{0.1, 0.9};
  Rng rng(4);
  Trajectory guided = guided_integrate(s.params, x0, s.cond, s.ctx, s.emb, c, sc, rng);
  Rng plain_rng(4);
  Trajectory plain = integrate(s.params, x0, s.cond, sc, plain_rng);
  // Only the last step is guided; it starts from the same state and keeps
  // a final state at least as good as the plain draw.
  EXPECT_EQ(guided.states[7].x, plain.states[7].x);
  EXPECT_GE(prompt_score(s.emb(guided.final_state()), s.ctx.text_embedding),
            prompt_score(s.emb(plain.final_state()), s.ctx.text_embedding));
  Rng replay_rng(4);
  EXPECT_TRUE(guided_integrate(s.params, x0, s.cond, s.ctx, s.emb, c, sc, replay_rng) == guided);
  EXPECT_TRUE(replay(s.params, x0, s.cond, sc, guided.noise_draws) == guided);
}

TEST(Instrument, AssemblesSortedNotesFromOneClass) {
  SearchFixture s;
  std::vector<ConditionSet> conds{{2, 7, 1}, {2, 0, 1}, {2, 11, 0}, {2, 3, 2}};
  SearchConfig c;
  c.n_candidates = 4;
  InstrumentResult r = generate_instrument(s.params, conds, s.spec, s.emb, c, s.sampler, Rng(8));
  ASSERT_EQ(r.notes.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(r.notes[i - 1].cond.pitch_id, r.notes[i].cond.pitch_id);
  // The first requested note is a tau=0 draw on stream child(0).child(0).
  SamplerConfig zero = s.sampler;
  zero.tau = 0.0;
  Rng first = Rng(8).child(0).child(0);
  const Vec expect = generate(s.params, conds[0], zero, first);
  EXPECT_EQ(r.notes[2].sample, expect);
  EXPECT_EQ(r.notes[2].cond, conds[0]);
  EXPECT_EQ(r.notes[2].candidates_evaluated, 1u);
  EXPECT_EQ(r.notes[0].candidates_evaluated, 4u);
  EXPECT_EQ(r.log.size(), 1u + 3u * 4u);

  InstrumentResult again = generate_instrument(s.params, conds, s.spec, s.emb, c, s.sampler, Rng(8));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(again.notes[i].sample, r.notes[i].sample);

  conds.push_back({1, 5, 0});
  EXPECT_THROW(generate_instrument(s.params, conds, s.spec, s.emb, c, s.sampler, Rng(8)), InputDomainError);
}

}  // namespace
}  // namespace dfm
