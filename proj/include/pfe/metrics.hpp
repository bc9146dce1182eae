#pragma once

#include <cstdint>
#include <vector>

#include "pfe/matrix.hpp"

namespace pfe {

struct GaussianStats {
  Vec mean;
  Matrix covariance;  // ridge-regularized, symmetric
  std::size_t sample_count = 0;
};

// Sample mean plus unbiased covariance with ridge * I added for sqrt stability.
GaussianStats fit_gaussian(const std::vector<Vec>& samples, double ridge = 1e-6);

// Squared Frechet distance between two Gaussians:
//   |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2).
// Tiny negative results (>= -1e-8) clamp to zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Frechet distance between Gaussians fitted to the two embedding sets. Lower
// means the generated set matches the background distribution more closely.
double fad_score(const std::vector<Vec>& background, const std::vector<Vec>& generated);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

// Average ranks (1-based) with ties sharing the mean of their rank range.
Vec average_ranks(const Vec& values);

// Spearman rank correlation with a two-sided seeded permutation p-value,
// p = (exceedances + 1) / (permutations + 1).
SpearmanResult spearman_srcc(const Vec& x, const Vec& y, std::size_t permutations = 10000,
                             std::uint64_t seed = 1234);

// Earth mover's distance between two 1-D samples via the CDF-difference
// integral; for equal sizes this is the mean absolute difference of the
// sorted lists.
double emd_1d(const Vec& a, const Vec& b);

double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace pfe
