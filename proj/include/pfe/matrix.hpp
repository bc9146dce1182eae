#pragma once

// Dense row-major matrices and vector arithmetic in double precision, plus a
// cyclic-Jacobi eigensolver for symmetric matrices and the PSD matrix square
// root built on it. Dimensions in this project stay small (d <= 256), so a
// BLAS dependency would buy nothing.

#include <cstddef>
#include <vector>

namespace pfe {

using Vec = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // row-major, length rows * cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }

  static Matrix identity(std::size_t n);
};

bool all_finite(const Vec& v);
bool all_finite(const Matrix& m);

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);
double squared_distance(const Vec& a, const Vec& b);
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x
Vec scaled(const Vec& v, double s);
Vec vec_sub(const Vec& a, const Vec& b);
Vec vec_add(const Vec& a, const Vec& b);

Vec matvec(const Matrix& w, const Vec& x);
void matvec_into(const Matrix& w, const Vec& x, Vec& out);
void matvec_transpose_into(const Matrix& w, const Vec& x, Vec& out);  // out = W^T x
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
double frobenius_norm(const Matrix& m);
double max_abs_asymmetry(const Matrix& m);

struct SymEigen {
  Vec values;      // values[k] pairs with column k of vectors
  Matrix vectors;  // orthogonal, A = V diag(values) V^T
};

/// Cyclic Jacobi rotations. Throws std::invalid_argument if the input is not
/// symmetric within sym_tol or not square.
SymEigen sym_eigen(const Matrix& a, double sym_tol = 1e-8);

/// Square root of a symmetric PSD matrix. Eigenvalues in [-1e-10, 0) are
/// clamped to zero; anything more negative throws.
Matrix sym_matrix_sqrt(const Matrix& a, double sym_tol = 1e-8);

}  // namespace pfe
