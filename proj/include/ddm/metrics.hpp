#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddm/target.hpp"

namespace ddm {

enum class W1Method { Exact1D, ExactAssignment, Sliced };

std::string method_name(W1Method m);

struct W1Estimate {
    double value = 0.0;
    W1Method method = W1Method::Exact1D;
    int n_projections = 0;  // Sliced only
    double std_err = 0.0;   // over directions (Sliced) or bootstrap replicates
};

// Sorted pairing between equal-size samples.
W1Estimate w1_1d(std::vector<double> a, std::vector<double> b);

// Minimum-cost perfect matching on Euclidean costs; columns are points, n = m <= 1024.
W1Estimate w1_exact(const Cloud& a, const Cloud& b);

// Mean of w1_1d over n_proj random unit directions; direction j is drawn from derive_seed(seed, j).
W1Estimate w1_sliced(const Cloud& a, const Cloud& b, int n_proj, std::uint64_t seed);

/**
 * d = 1: Exact1D. d <= 8 and n <= 1024: ExactAssignment. Otherwise Sliced with 256 directions.
 * Unequal sizes: the larger cloud is resampled with replacement to the smaller size 16 times
 * and the median is reported.
 */
W1Estimate w1(const Cloud& a, const Cloud& b, std::uint64_t seed);

// Optimal assignment for a square cost matrix; returns col index per row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

struct SupportDistance {
    double mean = 0.0;
    double max = 0.0;
};

SupportDistance support_distance(const Cloud& samples, const CompactTarget& target);

}  // namespace ddm
