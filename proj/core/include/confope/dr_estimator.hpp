#pragma once

#include <cstdint>
#include <functional>

#include "confope/linear_minimax.hpp"
#include "confope/types.hpp"

namespace confope {

// Correction term of the doubly-robust identity for one tuple:
//   (1-gamma)^-1 f(A,O-) [ {R + gamma sum_a' g(a',O+)} pi^e(A|O) - g(A,O) ].
double dr_contribution(const BridgeFunction& f, const BridgeFunction& g,
                       const TransitionTuple& tuple, const Policy& target,
                       double gamma);

// J(f,g) = E_{nu_O}[sum_a g(a,o~)] + E_D[correction]. The identity holds
// exactly when either bridge is correct; plugging in both gives the
// doubly-robust estimator. std_error is the per-tuple sample deviation of
// the full integrand (absent for weighted population datasets, which carry
// no sampling noise).
ValueEstimate dr_estimate(const BridgeFunction& f, const BridgeFunction& g,
                          const TupleDataset& data, const Policy& target);

struct BridgePair {
  BridgeFunction weight;  // f, plugged into the correction factor
  BridgeFunction value;   // g, anchors the nu_O term
};

using FitProcedure = std::function<BridgePair(const TupleDataset&)>;

// Two-fold cross-fitting: tuples are shuffled by split_seed, the first
// ceil(n/2) form fold one, bridges fitted on each fold are evaluated on the
// other, and the two estimates are averaged. Both folds keep the complete
// initial-observation distribution.
ValueEstimate cross_fit_dr(const TupleDataset& data, const FitProcedure& fit,
                           std::uint64_t split_seed, const Policy& target);

}  // namespace confope
