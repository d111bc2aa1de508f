#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "edugamma/bfgs.hpp"
#include "edugamma/fitter.hpp"
#include "test_support.hpp"

using namespace edugamma;
using testing_support::Gen;

namespace {

AttainmentRecord record_with(CategoryShares s, double dp = 6.0, double ds = 6.0) {
  AttainmentRecord r;
  r.key = {"TST", 1990, Sex::total, AgeGroup::age15plus};
  r.shares = s;
  r.dur_primary = dp;
  r.dur_secondary = ds;
  return r;
}

/// Exact targets generated from known parameters at thresholds (1, dp, dp+ds, dp+ds+4).
FitTargets targets_from(const GGParams& g, double dp = 6.0, double ds = 6.0) {
  FitTargets t;
  t.thresholds = {1.0, dp, dp + ds, dp + ds + 4.0};
  for (std::size_t j = 0; j < 4; ++j) t.cdf_targets[j] = gg::cdf(g, t.thresholds[j]);
  t.surv_target = gg::survival(g, t.thresholds[3]);
  return t;
}

double max_target_error(const FitResult& r, const FitTargets& t) {
  double worst = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    worst = std::max(worst, std::abs(gg::cdf(r.params, t.thresholds[j]) - t.cdf_targets[j]));
  }
  return std::max(worst, std::abs(gg::survival(r.params, t.thresholds[3]) - t.surv_target));
}

}  // namespace

TEST(BuildTargets, RunningSumsAtCumulativeThresholds) {
  const auto t = build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}));
  EXPECT_EQ(t.thresholds, (std::array<double, 4>{1, 6, 12, 16}));
  EXPECT_NEAR(t.cdf_targets[0], 0.3, 1e-15);
  EXPECT_NEAR(t.cdf_targets[1], 0.7, 1e-15);
  EXPECT_NEAR(t.cdf_targets[2], 0.9, 1e-15);
  EXPECT_NEAR(t.cdf_targets[3], 0.96, 1e-15);
  EXPECT_NEAR(t.surv_target, 0.04, 1e-15);
  EXPECT_TRUE(t.flags.empty());
}

TEST(BuildTargets, RenormalizesNearUnitSums) {
  const auto t = build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.039}));
  EXPECT_TRUE(t.flags.has(FitFlag::renormalized_input));
  EXPECT_NEAR(t.cdf_targets[0], 0.3 / 0.999, 1e-15);
  EXPECT_NEAR(t.surv_target, 0.039 / 0.999, 1e-15);
  EXPECT_NEAR(t.cdf_targets[3] + t.surv_target, 1.0, 1e-9);
}

TEST(BuildTargets, ClipsTinyNegativeShares) {
  const auto t = build_targets(record_with({0.3, 0.4, 0.2, 0.1, -5e-7}));
  EXPECT_TRUE(t.flags.has(FitFlag::renormalized_input));
  EXPECT_EQ(t.surv_target, 0.0);
  EXPECT_EQ(t.cdf_targets[3], 1.0);
}

TEST(BuildTargets, DegenerateFlags) {
  const auto ill = build_targets(record_with({1, 0, 0, 0, 0}));
  EXPECT_TRUE(ill.flags.has(FitFlag::degenerate_illiterate));
  EXPECT_EQ(ill.cdf_targets, (std::array<double, 4>{1, 1, 1, 1}));
  EXPECT_EQ(ill.surv_target, 0.0);
  const auto top = build_targets(record_with({0, 0, 0, 0, 1}));
  EXPECT_TRUE(top.flags.has(FitFlag::degenerate_tertiary));
}

TEST(BuildTargets, RejectsInvalidRecords) {
  EXPECT_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.1, -1e-3})), InvalidRecord);
  EXPECT_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.02})), InvalidRecord);  // 0.98
  EXPECT_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.1, 0.02})), InvalidRecord);   // 1.02
  EXPECT_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}, 2.5, 6.0)), InvalidRecord);
  EXPECT_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}, 6.0, 10.5)), InvalidRecord);
  EXPECT_NO_THROW(build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}, 3.0, 10.0)));
}

TEST(BuildTargets, InvariantsOnRandomShares) {
  Gen gen(7);
  for (int i = 0; i < 500; ++i) {
    std::array<double, 5> raw{};
    double sum = 0.0;
    for (double& v : raw) sum += (v = gen.uniform(0.0, 1.0));
    const double target_sum = gen.uniform(0.9991, 1.0009);
    for (double& v : raw) v *= target_sum / sum;
    const auto t = build_targets(record_with({raw[0], raw[1], raw[2], raw[3], raw[4]}, gen.uniform(3, 10),
                                             gen.uniform(3, 10)));
    for (std::size_t j = 1; j < 4; ++j) {
      ASSERT_GT(t.thresholds[j], t.thresholds[j - 1]);
      ASSERT_GE(t.cdf_targets[j], t.cdf_targets[j - 1]);
    }
    ASSERT_NEAR(t.cdf_targets[3] + t.surv_target, 1.0, 1e-9);
  }
}

TEST(Objective, Examples) {
  const auto t = targets_from({1, 5, 1});
  EXPECT_NEAR(t.cdf_targets[0], 0.18126924692201815, 1e-15);
  EXPECT_NEAR(t.cdf_targets[1], 0.6988057880877979, 1e-15);
  EXPECT_NEAR(t.cdf_targets[2], 0.9092820467105875, 1e-15);
  EXPECT_NEAR(t.cdf_targets[3], 0.9592377960216338, 1e-15);
  EXPECT_NEAR(t.surv_target, 0.04076220397836621, 1e-15);
  EXPECT_LE(objective({1, 5, 1}, t), 1e-20);
  EXPECT_NEAR(objective({1, 10, 1}, t), 0.16495753625947454, 1e-12);
}

TEST(Objective, SurvivalLowerBound) {
  FitTargets t;
  t.thresholds = {1, 6, 12, 16};
  t.cdf_targets = {0, 0, 0, 0};
  t.surv_target = 1.0;
  Gen gen(3);
  for (int i = 0; i < 200; ++i) {
    const auto g = gen.params();
    const double s = gg::survival(g, 16.0);
    EXPECT_GE(objective(g, t), (s - 1.0) * (s - 1.0));
  }
}

TEST(Objective, NonFiniteParametersGiveInfinity) {
  const auto t = targets_from({1, 5, 1});
  EXPECT_TRUE(std::isinf(detail::objective_raw(std::nan(""), 5, 1, t)));
  EXPECT_TRUE(std::isinf(detail::objective_raw(1, -5, 1, t)));
  EXPECT_TRUE(std::isinf(detail::objective_raw(1, 5, std::numeric_limits<double>::infinity(), t)));
}

TEST(MomentStart, Examples) {
  const auto t = build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}));
  const auto [p1, b1] = moment_start(1.0, t);
  // pseudo-sample (0.5, 3.5, 9, 14, 18): m = 4.91, v = 21.7869
  EXPECT_NEAR(p1, 4.91 * 4.91 / 21.7869, 1e-12);
  EXPECT_NEAR(p1, 1.1065410866162695, 1e-12);
  EXPECT_NEAR(b1, 4.437250509164969, 1e-12);
  const auto [p2, b2] = moment_start(2.0, t);
  EXPECT_NEAR(p2, 0.36505895783357056, 1e-12);
  EXPECT_NEAR(b2, 11.212467113976405, 1e-12);
}

TEST(MomentStart, DegenerateVarianceFallsBack) {
  const auto t = build_targets(record_with({0, 1, 0, 0, 0}));
  for (double a : {0.5, 1.0, 3.0}) {
    const auto [p0, b0] = moment_start(a, t);
    EXPECT_EQ(p0, 1.0);
    EXPECT_NEAR(b0, std::pow(std::pow(3.5, a), 1.0 / a), 1e-12);
  }
}

TEST(GridFit, RecoversExponential) {
  const auto t = targets_from({1, 5, 1});
  const auto r = grid_fit(t);
  EXPECT_NEAR(gg::mean(r.params), 5.0, 1e-3);
  EXPECT_LE(r.rss, 1e-12);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.n_restarts_tried, 100);
}

TEST(GridFit, RecoversGeneralizedGamma) {
  const auto t = targets_from({2, 8, 1.5});
  const auto r = grid_fit(t);
  EXPECT_LE(r.rss, 1e-12);
  EXPECT_LE(max_target_error(r, t), 1e-6);
}

TEST(GridFit, DegenerateIlliterate) {
  const auto t = build_targets(record_with({1, 0, 0, 0, 0}));
  const auto r = grid_fit(t);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(gg::mean(r.params), 1.0);
  EXPECT_TRUE(r.flags.has(FitFlag::degenerate_illiterate));
}

TEST(GridFit, RssConsistentWithObjective) {
  Gen gen(11);
  for (int i = 0; i < 10; ++i) {
    const auto t = targets_from(gen.params());
    const auto r = grid_fit(t);
    EXPECT_NEAR(r.rss, objective(r.params, t), 1e-12);
    EXPECT_GT(r.params.a(), 0.0);
    EXPECT_GT(r.params.beta(), 0.0);
    EXPECT_GT(r.params.p(), 0.0);
  }
}

TEST(GridFit, BestRestartIsNoWorseThanAnyRestart) {
  const auto t = build_targets(record_with({0.3, 0.4, 0.2, 0.06, 0.04}));
  FitConfig cfg;
  cfg.grid_step = 1.0;
  cfg.grid_min = 0.5;
  cfg.grid_max = 10.5;
  const auto best = grid_fit(t, cfg);
  optimize::BfgsOptions opt;
  auto f = [&t](const std::array<double, 3>& th) {
    return detail::objective_raw(std::exp(th[0]), std::exp(th[1]), std::exp(th[2]), t);
  };
  for (double a0 : cfg.grid()) {
    const auto [p0, b0] = moment_start(a0, t);
    const auto run = optimize::bfgs_minimize<3>(f, {std::log(a0), std::log(b0), std::log(p0)}, opt);
    EXPECT_LE(best.rss, run.value + 1e-15) << "a0=" << a0;
  }
}

TEST(GridFit, RecoveryOnRandomDesign) {
  Gen gen(2024);
  int good = 0;
  constexpr int kCases = 40;
  for (int i = 0; i < kCases; ++i) {
    const auto t = targets_from(gen.params());
    const auto r = grid_fit(t);
    if (r.rss <= 1e-8 && max_target_error(r, t) <= 1e-4) ++good;
  }
  EXPECT_GE(good, 38) << good << " of " << kCases;
}

TEST(GridFit, Deterministic) {
  const auto t = build_targets(record_with({0.25, 0.35, 0.25, 0.1, 0.05}, 5, 7));
  const auto a = grid_fit(t);
  const auto b = grid_fit(t);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.rss, b.rss);
  EXPECT_EQ(a.grid_a_start, b.grid_a_start);
}

TEST(GridFit, RejectsBadGrid) {
  FitConfig cfg;
  cfg.grid_step = 0.0;
  EXPECT_THROW(grid_fit(targets_from({1, 5, 1}), cfg), DomainError);
}

TEST(FitAll, EmptyInput) {
  const auto out = fit_all({}, {}, 4);
  EXPECT_TRUE(out.results.empty());
  EXPECT_TRUE(out.errors.empty());
}

TEST(FitAll, MatchesIndividualFits) {
  const std::vector<AttainmentRecord> recs = {record_with({0.3, 0.4, 0.2, 0.06, 0.04}),
                                              record_with({0.05, 0.3, 0.4, 0.15, 0.1}, 5, 7)};
  const auto out = fit_all(recs, {}, 2);
  ASSERT_EQ(out.results.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto single = grid_fit(build_targets(recs[i]));
    ASSERT_TRUE(out.results[i].has_value());
    EXPECT_EQ(out.results[i]->params, single.params);
    EXPECT_EQ(out.results[i]->rss, single.rss);
  }
}

TEST(FitAll, CollectsErrorsWithoutAborting) {
  const std::vector<AttainmentRecord> recs = {record_with({0.3, 0.4, 0.2, 0.06, 0.04}),
                                              record_with({0.5, 0.5, 0.5, 0, 0}),
                                              record_with({0.1, 0.4, 0.3, 0.1, 0.1})};
  const auto out = fit_all(recs, {}, 3);
  ASSERT_EQ(out.errors.size(), 1u);
  EXPECT_EQ(out.errors[0].index, 1u);
  EXPECT_TRUE(out.results[0].has_value());
  EXPECT_FALSE(out.results[1].has_value());
  EXPECT_TRUE(out.results[2].has_value());
}

TEST(FitAll, HundredRecordsIndependentOfThreadsAndRuns) {
  Gen gen(99);
  std::vector<AttainmentRecord> recs;
  FitConfig cfg;
  cfg.grid_step = 1.0;  // coarse grid keeps the batch quick
  for (int i = 0; i < 100; ++i) {
    const auto g = gen.params();
    const auto t = targets_from(g);
    auto r = record_with({t.cdf_targets[0], t.cdf_targets[1] - t.cdf_targets[0],
                          t.cdf_targets[2] - t.cdf_targets[1], t.cdf_targets[3] - t.cdf_targets[2], t.surv_target});
    r.key.country = "C" + std::to_string(i);
    recs.push_back(r);
  }
  const auto one = fit_all(recs, cfg, 1);
  const auto again = fit_all(recs, cfg, 1);
  const auto four = fit_all(recs, cfg, 4);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ASSERT_TRUE(one.results[i] && four.results[i] && again.results[i]);
    EXPECT_EQ(one.results[i]->params, four.results[i]->params) << i;
    EXPECT_EQ(one.results[i]->rss, four.results[i]->rss) << i;
    EXPECT_EQ(one.results[i]->params, again.results[i]->params) << i;
  }
}

TEST(Gof, TypeSevenQuartiles) {
  const std::vector<std::pair<std::string, double>> five = {
      {"g", 0.005}, {"g", 0.001}, {"g", 0.004}, {"g", 0.002}, {"g", 0.003}};
  const auto rows = gof_quartiles(five);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 5u);
  EXPECT_DOUBLE_EQ(rows[0].q1, 0.002);
  EXPECT_DOUBLE_EQ(rows[0].median, 0.003);
  EXPECT_DOUBLE_EQ(rows[0].q3, 0.004);

  const std::vector<std::pair<std::string, double>> single = {{"h", 0.01}};
  const auto one = gof_quartiles(single);
  EXPECT_EQ(one[0].q1, 0.01);
  EXPECT_EQ(one[0].median, 0.01);
  EXPECT_EQ(one[0].q3, 0.01);

  EXPECT_DOUBLE_EQ(quantile_type7({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_THROW(gof_quartiles({}), DomainError);
}

TEST(Gof, GroupsByYearAndSex) {
  CellKey k{"X", 1970, Sex::female, AgeGroup::age25plus};
  EXPECT_EQ(year_sex_key(k), "1970:female");
  EXPECT_EQ(k.id(), "X:1970:female:25plus");
}

TEST(Flags, RoundTripThroughText) {
  FitFlags f;
  EXPECT_EQ(f.to_string(), "");
  f.set(FitFlag::renormalized_input);
  f.set(FitFlag::degenerate_illiterate);
  EXPECT_EQ(f.to_string(), "degenerate_illiterate|renormalized_input");
  EXPECT_EQ(FitFlags::parse(f.to_string()), f);
  EXPECT_FALSE(FitFlags::parse("bogus").has_value());
}
