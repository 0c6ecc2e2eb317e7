#include "coed/oed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coed/rng.hpp"

namespace coed::oed {

double CriterionSpec::full_value(const bayes::Design& d) const {
  double v = evaluator(d);
  return std::isfinite(invariant_offset) ? invariant_offset + v : v;
}

CriterionSpec coed_criterion(const lowrank::FrozenSVD& f, double sigma) {
  CriterionSpec c;
  c.kind = CriterionKind::CoedFrozen;
  c.name = "goal_trace";
  c.sigma = sigma;
  c.invariant_offset = f.trace_prior_goal;
  c.evaluator = [fp = &f](const bayes::Design& d) {
    return lowrank::eval_coed_frozen(*fp, d).psi_minus;
  };
  return c;
}

CriterionSpec classical_criterion(const lowrank::FrozenSVD& f, double sigma, double trace_prior) {
  CriterionSpec c;
  c.kind = CriterionKind::ClassicalA;
  c.name = "posterior_trace";
  c.sigma = sigma;
  c.invariant_offset = trace_prior;
  c.evaluator = [fp = &f](const bayes::Design& d) {
    return lowrank::eval_classical_A_frozen(*fp, d);
  };
  return c;
}

GreedyResult greedy_select(const CriterionSpec& crit, int k, int n_s, bool parallel) {
  if (n_s < 1 || k < 1 || k > n_s) {
    throw std::invalid_argument("greedy_select: need 1 <= k <= candidate count");
  }
  GreedyResult res;
  res.w.w = Vec::Zero(n_s);
  res.w.sigma = crit.sigma;
  std::vector<char> used(n_s, 0);
  std::vector<double> vals(n_s);
  for (int stage = 0; stage < k; ++stage) {
    std::fill(vals.begin(), vals.end(), std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int j = 0; j < n_s; ++j) {
      if (used[j]) continue;
      bayes::Design d = res.w;
      d.w[j] = 1.0;
      vals[j] = crit.evaluator(d);
    }
    res.evaluations += n_s - stage;
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n_s; ++j) {
      if (!used[j] && vals[j] < best_val) {
        best_val = vals[j];
        best = j;
      }
    }
    if (best < 0) throw NumericalError("greedy_select: no finite criterion value in stage");
    used[best] = 1;
    res.w.w[best] = 1.0;
    res.selected.push_back(best);
    res.criterion_trace.push_back(best_val);
  }
  return res;
}

std::vector<bayes::Design> random_designs(int n_samples, int k, int n_s, double sigma,
                                          uint64_t seed) {
  if (k > n_s) throw std::invalid_argument("random_designs: k exceeds candidate count");
  std::vector<bayes::Design> out;
  out.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    rng::Stream s = rng::Stream::substream(seed, "random-design", static_cast<uint64_t>(i));
    out.push_back(bayes::Design::from_indices(n_s, rng::sample_indices(s, n_s, k), sigma));
  }
  return out;
}

double fraction_beaten(double value, const std::vector<double>& population) {
  if (population.empty()) return 0.0;
  long worse = std::count_if(population.begin(), population.end(),
                             [&](double v) { return v > value; });
  return static_cast<double>(worse) / static_cast<double>(population.size());
}

ComparisonTable compare_designs(const std::vector<std::pair<std::string, bayes::Design>>& named,
                                const std::vector<bayes::Design>& random_sample,
                                const std::vector<CriterionSpec>& crits) {
  ComparisonTable t;
  const int rows = static_cast<int>(named.size());
  const int cols = static_cast<int>(crits.size());
  t.values = Mat::Zero(rows, cols);
  t.percentiles = Mat::Zero(rows, cols);
  for (const auto& c : crits) t.criteria.push_back(c.name);
  std::vector<std::vector<double>> pop(cols);
  for (int c = 0; c < cols; ++c) {
    pop[c].reserve(random_sample.size());
    for (const auto& d : random_sample) pop[c].push_back(crits[c].full_value(d));
  }
  for (int r = 0; r < rows; ++r) {
    t.labels.push_back(named[r].first);
    for (int c = 0; c < cols; ++c) {
      t.values(r, c) = crits[c].full_value(named[r].second);
      t.percentiles(r, c) = fraction_beaten(t.values(r, c), pop[c]);
    }
  }
  return t;
}

}  // namespace coed::oed
