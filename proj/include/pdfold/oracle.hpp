#pragma once

#include <cstdint>
#include <vector>

#include "pdfold/rna.hpp"

namespace pdfold {

struct OracleResult {
    PairSet pairs;
    double objective = 0.0;
    long nodes_explored = 0;
};

// Exhaustive search is only sane for short instances.
constexpr int kExactDecodeMaxLen = 16;

// Globally optimal matching over mask-admissible cells maximizing
// sum of (u[i][j] - s) over chosen pairs; branch-and-bound over candidate
// pairs sorted by descending weight. Pairs with nonpositive weight never
// improve the objective and are not considered. Throws for L > 16.
OracleResult exact_decode(const Mat& u, double s, const ConstraintMask& mask);

// Optimal *nested* matching for the same objective, O(L^3) interval DP.
// Traceback prefers leaving the right end unpaired on ties, then the
// smallest pairing partner.
OracleResult nested_decode(const Mat& u, double s, const ConstraintMask& mask);

struct OracleTrialReport {
    std::vector<double> ratios;  // rounded solver objective / exact optimum, per trial
    int trials = 0;
    int passed = 0;       // ratio >= ratio_threshold
    double pass_rate = 0.0;
    double mean_ratio = 0.0;
    double min_ratio = 1.0;
};

// Seeded randomized comparison of the convergent solver against the exact
// decoder on masked score landscapes: symmetric scores drawn uniformly in
// [s-1, s+3] on admissible cells, default solver hyperparameters. Objectives
// are compared at rho = 0 on the rounded output; trials whose exact optimum
// is 0 pass trivially.
OracleTrialReport oracle_vs_solver_trials(int trials, int min_len, int max_len,
                                          std::uint64_t seed, double ratio_threshold);

}  // namespace pdfold
