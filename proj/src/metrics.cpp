#include "pfe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pfe/rng.hpp"

namespace pfe {

namespace {

double pearson(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw std::invalid_argument("spearman_srcc: constant input leaves the correlation undefined");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

GaussianStats fit_gaussian(const std::vector<Vec>& samples, double ridge) {
  if (samples.size() < 2) {
    throw std::invalid_argument("fit_gaussian: need at least 2 samples, got " +
                                std::to_string(samples.size()));
  }
  const std::size_t d = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != d) {
      throw std::invalid_argument("fit_gaussian: samples have inconsistent lengths");
    }
  }
  GaussianStats stats;
  stats.sample_count = samples.size();
  stats.mean.assign(d, 0.0);
  for (const auto& s : samples) axpy(1.0, s, stats.mean);
  for (auto& x : stats.mean) x /= static_cast<double>(samples.size());

  stats.covariance = Matrix(d, d);
  Vec centered(d);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) centered[i] = s[i] - stats.mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      for (std::size_t j = i; j < d; ++j) {
        stats.covariance(i, j) += ci * centered[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(samples.size() - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = stats.covariance(i, j) * inv;
      stats.covariance(i, j) = v;
      stats.covariance(j, i) = v;
    }
    stats.covariance(i, i) += ridge;
  }
  return stats;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  const std::size_t d = a.mean.size();
  if (b.mean.size() != d || a.covariance.rows != d || b.covariance.rows != d) {
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  }
  double result = squared_distance(a.mean, b.mean);
  for (std::size_t i = 0; i < d; ++i) {
    result += a.covariance(i, i) + b.covariance(i, i);
  }
  const Matrix root_a = sym_matrix_sqrt(a.covariance);
  Matrix inner = matmul(matmul(root_a, b.covariance), root_a);
  // Round-off can leave the product slightly asymmetric; fold it back.
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = v;
      inner(j, i) = v;
    }
  }
  const Matrix cross = sym_matrix_sqrt(inner);
  for (std::size_t i = 0; i < d; ++i) result -= 2.0 * cross(i, i);
  if (result < 0.0) {
    if (result < -1e-8) {
      throw std::runtime_error("frechet_distance: distance came out negative (" +
                               std::to_string(result) + "), matrix sqrt likely failed");
    }
    result = 0.0;
  }
  return result;
}

double fad_score(const std::vector<Vec>& background, const std::vector<Vec>& generated) {
  return frechet_distance(fit_gaussian(background), fit_gaussian(generated));
}

Vec average_ranks(const Vec& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  Vec ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based mean rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman_srcc(const Vec& x, const Vec& y, std::size_t permutations,
                             std::uint64_t seed) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("spearman_srcc: input lengths differ");
  }
  if (x.size() < 3) {
    throw std::invalid_argument("spearman_srcc: need at least 3 pairs, got " +
                                std::to_string(x.size()));
  }
  const Vec rx = average_ranks(x);
  Vec ry = average_ranks(y);
  SpearmanResult result;
  result.rho = pearson(rx, ry);

  const double threshold = std::abs(result.rho) - 1e-12;
  Rng rng(derive_seed(seed, fnv1a64("spearman_srcc")));
  std::size_t exceed = 0;
  for (std::size_t p = 0; p < permutations; ++p) {
    rng.shuffle(ry);
    if (std::abs(pearson(rx, ry)) >= threshold) ++exceed;
  }
  result.p_value = static_cast<double>(exceed + 1) / static_cast<double>(permutations + 1);
  return result;
}

double emd_1d(const Vec& a, const Vec& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("emd_1d: empty input");
  }
  Vec sa = a;
  Vec sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double wa = 1.0 / static_cast<double>(sa.size());
  const double wb = 1.0 / static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double cdf_gap = 0.0;  // F_a(x) - F_b(x) on the current segment
  double prev = std::min(sa.front(), sb.front());
  double total = 0.0;
  while (ia < sa.size() || ib < sb.size()) {
    double next;
    if (ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) {
      next = sa[ia];
    } else {
      next = sb[ib];
    }
    total += std::abs(cdf_gap) * (next - prev);
    while (ia < sa.size() && sa[ia] == next) {
      cdf_gap += wa;
      ++ia;
    }
    while (ib < sb.size() && sb[ib] == next) {
      cdf_gap -= wb;
      ++ib;
    }
    prev = next;
  }
  return total;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero vector");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace pfe
