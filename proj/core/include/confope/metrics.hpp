#pragma once

#include <vector>

namespace confope {

// |mean(estimates / truth) - 1|; truth must be nonzero.
double relative_bias(const std::vector<double>& estimates, double truth);

// mean(((estimate - truth) / truth)^2); truth must be nonzero.
double relative_mse(const std::vector<double>& estimates, double truth);

// Two standard errors of estimates/truth across replications (the labeled
// CI half-width used by the sweep summaries).
double ci_halfwidth(const std::vector<double>& estimates, double truth);

}  // namespace confope
