#include <doctest.h>

#include "synthctl/panel.hpp"

#include <limits>

using namespace synthctl;

namespace {

Panel<double> panel_3x5(Index t0) {
  Eigen::MatrixXd y(3, 5);
  y << 1, 2, 3, 4, 5,  //
      2, 3, 4, 5, 6,   //
      0, 1, 0, 1, 0;
  return Panel<double>(y, t0);
}

}  // namespace

TEST_SUITE("panel") {
  TEST_CASE("panel invariants") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 4);
    CHECK_NOTHROW(Panel<double>(y, 2));
    CHECK_THROWS_AS(Panel<double>(y, 0), InvalidSpecification);
    CHECK_THROWS_AS(Panel<double>(y, 4), InvalidSpecification);
    CHECK_THROWS_AS(Panel<double>(Eigen::MatrixXd::Zero(1, 4), 2), InvalidSpecification);
    y(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Panel<double>(y, 2), NumericInputError);
  }

  TEST_CASE("default labels and ids are 1-based labels, 0-based ids") {
    const Panel<double> p = panel_3x5(3);
    CHECK(p.donors() == 2);
    CHECK(p.unit_labels() == std::vector<std::string>{"1", "2", "3"});
    CHECK(p.unit_ids() == std::vector<Index>{0, 1, 2});
    CHECK(p.period_labels().front() == 1);
    CHECK(p.period_labels().back() == 5);
  }

  TEST_CASE("select_donors keeps identities") {
    const Panel<double> p = panel_3x5(3);
    const std::vector<Index> keep{1};
    const Panel<double> q = p.select_donors(keep);
    CHECK(q.donors() == 1);
    CHECK(q.unit_ids() == std::vector<Index>{0, 2});
    CHECK(q.outcomes().row(1) == p.outcomes().row(2));
  }

  TEST_CASE("default predictor spec takes every pre-treatment outcome") {
    const Panel<double> p = panel_3x5(3);
    const PredictorSet<double> x = build_predictors(p);
    CHECK(x.size() == 3);
    CHECK(x.x1 == Eigen::Vector3d(1, 2, 3));
    CHECK(x.x0.cols() == 2);
    CHECK(x.labels == std::vector<std::string>{"Y_pre_t1", "Y_pre_t2", "Y_pre_t3"});
    CHECK(x.outcome_only());
  }

  TEST_CASE("covariate rows follow outcome rows") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(4, 6);
    const Panel<double> p(y, 4);
    Eigen::MatrixXd z(4, 2);
    z << 1, 10, 2, 20, 3, 30, 4, 40;
    PredictorSpec spec;
    spec.covariate_columns = {0, 1};
    const PredictorSet<double> x = build_predictors(p, &z, spec);
    CHECK(x.size() == 6);
    CHECK(x.labels ==
          std::vector<std::string>{"Y_pre_t1", "Y_pre_t2", "Y_pre_t3", "Y_pre_t4", "Z_1", "Z_2"});
    CHECK(x.x1(4) == 1);
    CHECK(x.x0(5, 2) == 40);
    CHECK(x.covariate_rows == 2);
    CHECK_FALSE(x.outcome_only());
  }

  TEST_CASE("inverse-variance weights with zero-variance fallback") {
    // Donor outcomes all equal 7; covariate values 1, 3, 5 across donors have
    // sample variance ((1-3)^2 + 0 + (5-3)^2) / 2 = 4.
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(4, 3, 7.0);
    y.row(0) << 1, 2, 3;
    const Panel<double> p(y, 2);
    Eigen::MatrixXd z(4, 1);
    z << 0, 1, 3, 5;
    PredictorSpec spec;
    spec.covariate_columns = {0};
    const PredictorSet<double> x = build_predictors(p, &z, spec);
    CHECK(x.v(0) == 1.0);
    CHECK(x.v(1) == 1.0);
    CHECK(x.v(2) == doctest::Approx(0.25).epsilon(1e-15));

    spec.weighting = PredictorWeighting::unit;
    CHECK(build_predictors(p, &z, spec).v == Eigen::Vector3d::Ones());
  }

  TEST_CASE("predictor spec errors") {
    const Panel<double> p = panel_3x5(3);
    PredictorSpec spec;
    spec.periods = {1, 4};
    CHECK_THROWS_AS(build_predictors(p, spec), InvalidSpecification);
    spec.periods = {0};
    CHECK_THROWS_AS(build_predictors(p, spec), InvalidSpecification);
    PredictorSpec cov;
    cov.covariate_columns = {0};
    CHECK_THROWS_AS(build_predictors(p, cov), InvalidSpecification);
    Eigen::MatrixXd z = Eigen::MatrixXd::Ones(3, 1);
    cov.covariate_columns = {1};
    CHECK_THROWS_AS(build_predictors(p, &z, cov), InvalidSpecification);
    Eigen::MatrixXd short_z = Eigen::MatrixXd::Ones(2, 1);
    cov.covariate_columns = {0};
    CHECK_THROWS_AS(build_predictors(p, &short_z, cov), InvalidSpecification);
  }

  TEST_CASE("post-treatment periods never enter the predictors") {
    const Panel<double> p = panel_3x5(2);
    const PredictorSet<double> x = build_predictors(p);
    CHECK(*std::max_element(x.periods.begin(), x.periods.end()) <= p.t0());
  }

  TEST_CASE("donor permutation permutes predictor columns") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(5, 8);
    const Panel<double> p(y, 6);
    const std::vector<Index> perm{3, 0, 2, 1};
    const Panel<double> q = p.select_donors(perm);
    const PredictorSet<double> a = build_predictors(p);
    const PredictorSet<double> b = build_predictors(q);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      CHECK(b.x0.col(static_cast<Index>(i)) == a.x0.col(perm[i]));
    }
    CHECK(a.v.isApprox(b.v, 1e-14));
  }

  TEST_CASE("weight vector feasibility") {
    WeightVector<double> w{Eigen::Vector3d(0.2, 0.3, 0.5), std::nullopt, true};
    CHECK(w.feasible());
    w.w(0) = -1e-6;
    CHECK_FALSE(w.feasible());
    w.constrained = false;
    CHECK(w.feasible());
  }

  TEST_CASE("window rmse") {
    const Eigen::Vector4d e(3, 4, 1, 1);
    CHECK(window_rmse<double>(e, 0, 2) == doctest::Approx(std::sqrt(12.5)));
    CHECK(window_rmse<double>(e, 2, 4) == 1.0);
    CHECK_THROWS_AS(window_rmse<double>(e, 2, 2), InvalidSpecification);
  }
}
