#pragma once

#include <string>
#include <vector>

#include "l2s/training.hpp"

namespace l2s::io {

// Standalone SVG with one polyline per loss component on a log10 y axis.
// Non-positive values are clamped to the smallest positive value plotted.
std::string LossCurveSvg(const std::vector<training::StepRecord>& history);

}  // namespace l2s::io
