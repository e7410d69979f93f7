#include "synthctl/montecarlo.hpp"

#include "synthctl/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace synthctl {

void CellSpec::validate() const {
  if (replications < 1) throw InvalidSpecification("cell '" + name + "': replications must be >= 1");
  std::visit([](const auto& c) { c.validate(); }, dgp);
  estimator.solver.validate();
  const DgpDescriptor d = describe(dgp);
  if (backdate && (*backdate < 1 || *backdate >= d.t0)) {
    throw InvalidSpecification("cell '" + name + "': backdate must satisfy 1 <= t0b < t0");
  }
  if (estimator.trim) estimator.trim->resolve(d.donors);
}

ReplicationResult run_replication(const CellSpec& cell, std::uint64_t replication) {
  Draw d = draw(cell.dgp, cell.seed, replication);
  const Eigen::VectorXd untreated = d.panel.treated().transpose();
  const Panel<double> observed = apply_effect(d.panel, cell.effect);

  EstimatorSpec spec = cell.estimator;
  const Eigen::MatrixXd* covariates = nullptr;
  if (d.covariates) {
    // Every generated observed covariate enters the predictors.
    covariates = &*d.covariates;
    spec.predictor_spec.covariate_columns.clear();
    for (Index c = 0; c < d.covariates->cols(); ++c) spec.predictor_spec.covariate_columns.push_back(c);
  }

  ReplicationResult out;
  if (cell.backdate) {
    BackdateReport<double> report = backdate(observed, covariates, spec, *cell.backdate);
    out.pre_rmse = report.pre_rmse;
    out.post_rmse = report.post_rmse;
    out.estimate.weights = report.weights_backdated;
    out.estimate.counterfactual = report.counterfactual;
    out.estimate.effect = report.effect_path;
    out.estimate.pre_rmse = report.pre_rmse;
    out.estimate.post_rmse = report.post_rmse;
    out.estimate.donor_ids = report.donor_ids;
  } else {
    out.estimate = estimate(observed, covariates, spec);
    out.pre_rmse = out.estimate.pre_rmse;
    out.post_rmse = out.estimate.post_rmse;
  }

  if (out.estimate.weights.constrained) {
    double w2 = 0.0;
    for (std::size_t i = 0; i < out.estimate.donor_ids.size(); ++i) {
      if (out.estimate.donor_ids[i] == 1) w2 = out.estimate.weights.w(static_cast<Index>(i));
    }
    out.w2 = w2;
  }
  out.error_path = out.estimate.counterfactual - untreated;
  out.effect_path = out.estimate.effect;
  return out;
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidSpecification("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

struct Slot {
  bool ok = false;
  ReplicationResult result;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  if (x.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

SimulationSummary run_cell(const CellSpec& cell, unsigned jobs) {
  cell.validate();
  const auto reps = static_cast<std::size_t>(cell.replications);
  std::vector<Slot> slots(reps);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
      try {
        slots[r].result = run_replication(cell, r);
        slots[r].ok = true;
      } catch (const ConvergenceError&) {
        slots[r].ok = false;
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(reps)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  SimulationSummary s;
  s.name = cell.name;
  s.descriptor = describe(cell.dgp);
  s.reference = cell.reference;

  std::vector<const ReplicationResult*> done;
  done.reserve(reps);
  for (const Slot& slot : slots) {
    if (slot.ok) done.push_back(&slot.result);
  }
  s.replications_completed = static_cast<Index>(done.size());
  s.failures = static_cast<Index>(reps - done.size());
  if (done.empty() || static_cast<double>(s.failures) > kMaxFailureRate * static_cast<double>(reps)) {
    throw HarnessError("cell '" + cell.name + "': " + std::to_string(s.failures) + " of " +
                       std::to_string(reps) + " replications failed to converge");
  }

  const Index t0 = s.descriptor.t0;
  std::vector<double> pre, post, w2, post_effect;
  for (const ReplicationResult* r : done) {
    pre.push_back(r->pre_rmse);
    post.push_back(r->post_rmse);
    if (r->w2) w2.push_back(*r->w2);
    post_effect.push_back(r->effect_path.tail(r->effect_path.size() - t0).mean());
  }
  const MeanSe pre_ms = mean_se(pre), post_ms = mean_se(post);
  s.mean_pre_rmse = pre_ms.mean;
  s.se_pre_rmse = pre_ms.se;
  s.mean_post_rmse = post_ms.mean;
  s.se_post_rmse = post_ms.se;
  const MeanSe effect_ms = mean_se(post_effect);
  s.mean_post_effect = effect_ms.mean;
  s.se_post_effect = effect_ms.se;
  if (w2.size() == done.size()) {
    const MeanSe w2_ms = mean_se(w2);
    s.mean_w2 = w2_ms.mean;
    s.se_w2 = w2_ms.se;
  }

  const Index T = s.descriptor.t_total;
  s.band_lo.resize(T);
  s.band_hi.resize(T);
  s.mean_effect.resize(T);
  s.se_effect.resize(T);
  std::vector<double> column(done.size());
  for (Index t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < done.size(); ++i) column[i] = done[i]->effect_path(t);
    const MeanSe e = mean_se(column);
    s.mean_effect(t) = e.mean;
    s.se_effect(t) = e.se;
    for (std::size_t i = 0; i < done.size(); ++i) column[i] = done[i]->error_path(t);
    std::sort(column.begin(), column.end());
    s.band_lo(t) = sorted_quantile(column, 0.025);
    s.band_hi(t) = sorted_quantile(column, 0.975);
  }
  return s;
}

std::vector<SimulationSummary> run_suite(std::span<const CellSpec> suite, unsigned jobs) {
  if (suite.empty()) throw InvalidSpecification("suite is empty");
  std::vector<SimulationSummary> out;
  out.reserve(suite.size());
  for (const CellSpec& cell : suite) out.push_back(run_cell(cell, jobs));
  return out;
}

}  // namespace synthctl
