#include "pfe/matrix.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfe {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.data); }

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec scaled(const Vec& v, double s) {
  Vec out(v);
  for (double& x : out) x *= s;
  return out;
}

Vec vec_sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_sub: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vec vec_add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_add: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void matvec_into(const Matrix& w, const Vec& x, Vec& out) {
  if (w.cols != x.size())
    throw std::invalid_argument("matvec: matrix is " + std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + " but vector has length " +
                                std::to_string(x.size()));
  out.assign(w.rows, 0.0);
  const double* row = w.data.data();
  for (std::size_t i = 0; i < w.rows; ++i, row += w.cols) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

Vec matvec(const Matrix& w, const Vec& x) {
  Vec out;
  matvec_into(w, x, out);
  return out;
}

void matvec_transpose_into(const Matrix& w, const Vec& x, Vec& out) {
  if (w.rows != x.size())
    throw std::invalid_argument("matvec_transpose: matrix is " + std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + " but vector has length " +
                                std::to_string(x.size()));
  out.assign(w.cols, 0.0);
  const double* row = w.data.data();
  for (std::size_t i = 0; i < w.rows; ++i, row += w.cols) {
    const double xi = x[i];
    for (std::size_t j = 0; j < w.cols; ++j) out[j] += row[j] * xi;
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows));
  Matrix c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

double max_abs_asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.cols; ++j)
      worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  return worst;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymEigen sym_eigen(const Matrix& input, double sym_tol) {
  if (input.rows != input.cols)
    throw std::invalid_argument("sym_eigen: matrix is " + std::to_string(input.rows) + "x" +
                                std::to_string(input.cols) + ", expected square");
  if (max_abs_asymmetry(input) > sym_tol)
    throw std::invalid_argument("sym_eigen: matrix asymmetry " +
                                std::to_string(max_abs_asymmetry(input)) + " exceeds tolerance");
  const std::size_t n = input.rows;
  Matrix a = input;
  // symmetrize away roundoff below the tolerance
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = avg;
      a(j, i) = avg;
    }
  Matrix v = Matrix::identity(n);

  const double scale = frobenius_norm(a) + 1.0;
  const double target = 1e-14 * scale;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_diagonal_norm(a) > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEigen out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = std::move(v);
  return out;
}

Matrix sym_matrix_sqrt(const Matrix& a, double sym_tol) {
  SymEigen eig = sym_eigen(a, sym_tol);
  const std::size_t n = a.rows;
  Vec roots(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = eig.values[i];
    if (w < 0.0) {
      if (w < -1e-10)
        throw std::invalid_argument("sym_matrix_sqrt: eigenvalue " + std::to_string(w) +
                                    " below PSD tolerance");
      w = 0.0;
    }
    roots[i] = std::sqrt(w);
  }
  // S = V diag(sqrt(w)) V^T
  Matrix s(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += eig.vectors(i, k) * roots[k] * eig.vectors(j, k);
      s(i, j) = acc;
      s(j, i) = acc;
    }
  return s;
}

}  // namespace pfe
