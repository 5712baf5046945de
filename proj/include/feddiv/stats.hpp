#pragma once

#include <span>
#include <vector>

namespace feddiv {

// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation (Pearson correlation of average ranks). Returns 0
// when either input is constant. Inputs must have equal length >= 2.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace feddiv
