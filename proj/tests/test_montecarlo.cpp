#include <doctest.h>

#include "properties.hpp"

#include "synthctl/montecarlo.hpp"

#include <vector>

using namespace synthctl;

namespace {

CellSpec small_cell(Index reps) {
  CellSpec c;
  c.name = "small";
  GroupedFactorConfig g;
  g.sigma = 0.5;
  c.dgp = g;
  c.replications = reps;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_SUITE("montecarlo") {
  TEST_CASE("one replication equals a direct estimate on the same draw") {
    const CellSpec c = small_cell(1);
    const ReplicationResult r = run_replication(c, 0);
    const Draw d = draw(c.dgp, c.seed, 0);
    const auto direct = estimate(d.panel, c.estimator);
    CHECK(r.estimate.weights.w == direct.weights.w);
    CHECK(r.pre_rmse == direct.pre_rmse);
    CHECK(r.post_rmse == direct.post_rmse);
    REQUIRE(r.w2);
    CHECK(*r.w2 == direct.weights.w(0));

    const SimulationSummary s = run_cell(c);
    CHECK(s.replications_completed == 1);
    CHECK(s.mean_post_rmse == r.post_rmse);
    CHECK(s.se_post_rmse == 0.0);
  }

  TEST_CASE("error path is counterfactual minus the untreated outcome") {
    CellSpec c = small_cell(1);
    c.effect = {EffectShape::constant, 2.0};
    const ReplicationResult r = run_replication(c, 3);
    const Draw d = draw(c.dgp, c.seed, 3);
    const Eigen::VectorXd expected = r.estimate.counterfactual - d.panel.treated().transpose();
    CHECK((r.error_path - expected).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r.effect_path + r.error_path).tail(10).array().isApprox(Eigen::ArrayXd::Constant(10, 2.0), 1e-12));
  }

  TEST_CASE("zero noise twin cell has zero error") {
    CellSpec c = small_cell(50);
    auto g = std::get<GroupedFactorConfig>(c.dgp);
    g.sigma = 0.0;
    c.dgp = g;
    const SimulationSummary s = run_cell(c, 2);
    CHECK(s.mean_post_rmse == 0.0);
    CHECK(s.mean_pre_rmse == 0.0);
    CHECK(*s.mean_w2 == 1.0);
  }

  TEST_CASE("bit-identical across worker counts") {
    const props::Outcome r = props::determinism(400);
    INFO(r.detail);
    CHECK(r.ok);
  }

  TEST_CASE("summary statistics are consistent with the replications") {
    const CellSpec c = small_cell(200);
    const SimulationSummary s = run_cell(c, 3);
    double sum = 0;
    std::vector<double> post;
    for (std::uint64_t r = 0; r < 200; ++r) {
      const double v = run_replication(c, r).post_rmse;
      post.push_back(v);
      sum += v;
    }
    CHECK(s.mean_post_rmse == doctest::Approx(sum / 200.0).epsilon(1e-12));
    CHECK(s.se_post_rmse > 0.0);
    CHECK(s.band_lo.size() == 30);
    CHECK((s.band_lo.array() <= s.band_hi.array()).all());
    CHECK(s.failures == 0);
    CHECK(s.descriptor.donors == 19);
  }

  TEST_CASE("too many solver failures abort the cell") {
    CellSpec c;
    c.name = "capped";
    GroupedFactorConfig g;
    g.n_groups = 100;
    c.dgp = g;
    c.replications = 20;
    c.estimator.solver.max_iterations = 1;
    CHECK_THROWS_AS(run_cell(c), HarnessError);
  }

  TEST_CASE("sample quantiles") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    CHECK(sorted_quantile(x, 0.0) == 1.0);
    CHECK(sorted_quantile(x, 1.0) == 5.0);
    CHECK(sorted_quantile(x, 0.5) == 3.0);
    CHECK(sorted_quantile(x, 0.25) == 2.0);
    CHECK(sorted_quantile(x, 0.1) == doctest::Approx(1.4));
    const std::vector<double> one{7};
    CHECK(sorted_quantile(one, 0.975) == 7.0);
  }

  TEST_CASE("suite order does not change per-cell results") {
    CellSpec a = small_cell(30);
    CellSpec b = small_cell(30);
    b.name = "other";
    b.seed = 99;
    const std::vector<CellSpec> ab{a, b}, ba{b, a};
    const auto x = run_suite(ab, 2);
    const auto y = run_suite(ba, 2);
    CHECK(x[0].mean_post_rmse == y[1].mean_post_rmse);
    CHECK(x[1].mean_post_rmse == y[0].mean_post_rmse);
  }

  TEST_CASE("cell validation") {
    CellSpec c = small_cell(0);
    CHECK_THROWS_AS(c.validate(), InvalidSpecification);
    c = small_cell(10);
    c.backdate = 20;
    CHECK_THROWS_AS(c.validate(), InvalidSpecification);
    c.backdate = 0;
    CHECK_THROWS_AS(c.validate(), InvalidSpecification);
    c.backdate = 10;
    CHECK_NOTHROW(c.validate());
  }
}
