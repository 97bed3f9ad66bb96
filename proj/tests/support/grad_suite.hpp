#pragma once

// The gradient suite shared by the unit tests and the acceptance binary:
// one case per differentiable operation, plus composite layers and the full
// joint training loss.

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace l2s::testing {

struct GradCase {
  std::string name;
  std::function<GradCheckResult(Rng&)> run;
};

std::vector<GradCase> GradientCases();

}  // namespace l2s::testing
