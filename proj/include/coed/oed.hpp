#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "coed/bayes.hpp"
#include "coed/lowrank.hpp"
#include "coed/types.hpp"

namespace coed::oed {

enum class CriterionKind { ClassicalA, CoedFrozen, CoedSpectral };

// A design criterion in minus form (design-dependent part, to minimize).
// When the design-invariant offset is known, full values = offset + value.
struct CriterionSpec {
  CriterionKind kind = CriterionKind::CoedFrozen;
  std::string name;
  std::function<double(const bayes::Design&)> evaluator;
  double invariant_offset = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;

  double full_value(const bayes::Design& d) const;
};

// Criteria backed by the frozen factorization; f must outlive the spec.
CriterionSpec coed_criterion(const lowrank::FrozenSVD& f, double sigma);
CriterionSpec classical_criterion(const lowrank::FrozenSVD& f, double sigma,
                                  double trace_prior = std::numeric_limits<double>::quiet_NaN());

struct GreedyResult {
  std::vector<int> selected;           // in pick order
  bayes::Design w;                     // the final design
  std::vector<double> criterion_trace; // best value after each stage
  long evaluations = 0;
};

// Stagewise argmin over the remaining candidates. Candidate scores are
// written into per-index slots and reduced serially, so ties break to the
// lowest index and the result does not depend on thread count.
GreedyResult greedy_select(const CriterionSpec& crit, int k, int n_s, bool parallel = true);

// Uniform k-subsets without replacement, one reproducible substream each.
std::vector<bayes::Design> random_designs(int n_samples, int k, int n_s, double sigma,
                                          uint64_t seed);

// Fraction of the population with strictly worse (larger) criterion value.
double fraction_beaten(double value, const std::vector<double>& population);

struct ComparisonTable {
  std::vector<std::string> criteria;
  std::vector<std::string> labels;
  Mat values;       // labels x criteria, full values where offsets are known
  Mat percentiles;  // share of the random population each design beats
};

ComparisonTable compare_designs(const std::vector<std::pair<std::string, bayes::Design>>& named,
                                const std::vector<bayes::Design>& random_sample,
                                const std::vector<CriterionSpec>& crits);

}  // namespace coed::oed
