#pragma once

// Dense square-matrix helpers sized for embedding covariance work: a plain
// row-major value type, a symmetric eigensolver (Householder tridiagonal
// reduction followed by QL with implicit shifts), and the PSD matrix square
// root built on top of it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "icd/error.hpp"

namespace icd {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Matrix identity(size_t n) {
    Matrix m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }

  double& operator()(size_t i, size_t j) { return a_[i * cols_ + j]; }
  double operator()(size_t i, size_t j) const { return a_[i * cols_ + j]; }

  Matrix operator*(const Matrix& rhs) const {
    Matrix out(rows_, rhs.cols_);
    for (size_t i = 0; i < rows_; ++i) {
      for (size_t k = 0; k < cols_; ++k) {
        double v = (*this)(i, k);
        if (v == 0.0) continue;
        for (size_t j = 0; j < rhs.cols_; ++j) out(i, j) += v * rhs(k, j);
      }
    }
    return out;
  }

  Matrix operator+(const Matrix& rhs) const {
    Matrix out = *this;
    for (size_t i = 0; i < a_.size(); ++i) out.a_[i] += rhs.a_[i];
    return out;
  }

  Matrix operator-(const Matrix& rhs) const {
    Matrix out = *this;
    for (size_t i = 0; i < a_.size(); ++i) out.a_[i] -= rhs.a_[i];
    return out;
  }

  Matrix transposed() const {
    Matrix out(cols_, rows_);
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  double trace() const {
    double t = 0.0;
    for (size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = i + 1; j < cols_; ++j)
        m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    return m;
  }

  void symmetrize() {
    for (size_t i = 0; i < rows_; ++i) {
      for (size_t j = i + 1; j < cols_; ++j) {
        double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = v;
        (*this)(j, i) = v;
      }
    }
  }

 private:
  size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors; A = V diag(values) V^T
};

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form.
// On entry V holds the matrix; on exit V holds the accumulated
// transformation, d the diagonal and e the off-diagonal.
inline void tridiagonalize(Matrix& V, std::vector<double>& d, std::vector<double>& e) {
  const size_t n = d.size();
  for (size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (size_t i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (size_t k = j + 1; k < i; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      double hh = f / (h + h);
      for (size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (size_t k = j; k < i; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    double h = d[i + 1];
    if (h != 0.0) {
      for (size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// QL iteration with implicit shifts on the tridiagonal produced above.
inline void ql_implicit(Matrix& V, std::vector<double>& d, std::vector<double>& e) {
  const size_t n = d.size();
  for (size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0, tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    size_t m = l;
    while (m < n && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int iter = 0;
      do {
        ++iter;
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        double dl1 = d[l + 1];
        double h = g - d[l];
        for (size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        double el1 = e[l + 1], s = 0.0, s2 = 0.0;
        for (size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (size_t k = 0; k < n; ++k) {
            h = V(k, i + 1);
            V(k, i + 1) = s * V(k, i) + c * h;
            V(k, i) = c * V(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1 && iter < 64);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

// Eigendecomposition of a symmetric matrix; eigenvalues ascending.
inline SymEigen sym_eigen(const Matrix& a) {
  if (a.rows() != a.cols()) throw EvaluationError("sym_eigen: matrix not square");
  const size_t n = a.rows();
  SymEigen out;
  out.vectors = a;
  out.vectors.symmetrize();
  out.values.assign(n, 0.0);
  if (n == 0) return out;
  std::vector<double> e(n, 0.0);
  if (n == 1) {
    out.values[0] = a(0, 0);
    out.vectors = Matrix::identity(1);
    return out;
  }
  detail::tridiagonalize(out.vectors, out.values, e);
  detail::ql_implicit(out.vectors, out.values, e);

  // Sort ascending, carrying eigenvector columns along.
  for (size_t i = 0; i + 1 < n; ++i) {
    size_t k = i;
    for (size_t j = i + 1; j < n; ++j)
      if (out.values[j] < out.values[k]) k = j;
    if (k != i) {
      std::swap(out.values[i], out.values[k]);
      for (size_t r = 0; r < n; ++r) {
        double tmp = out.vectors(r, i);
        out.vectors(r, i) = out.vectors(r, k);
        out.vectors(r, k) = tmp;
      }
    }
  }
  return out;
}

// Symmetric PSD square root via eigendecomposition; negative eigenvalues
// from round-off are clamped to zero. Rejects visibly asymmetric input.
inline Matrix matrix_sqrt_psd(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw EvaluationError("matrix_sqrt_psd: matrix not square");
  const double tol = 1e-8 * std::max(1.0, sigma.max_abs());
  if (sigma.max_asymmetry() > tol) {
    throw EvaluationError("matrix_sqrt_psd: input is not symmetric within tolerance");
  }
  SymEigen eig = sym_eigen(sigma);
  const size_t n = sigma.rows();
  Matrix scaled = eig.vectors;  // V * diag(sqrt(max(lambda, 0)))
  for (size_t j = 0; j < n; ++j) {
    double s = eig.values[j] > 0.0 ? std::sqrt(eig.values[j]) : 0.0;
    for (size_t i = 0; i < n; ++i) scaled(i, j) *= s;
  }
  Matrix root = scaled * eig.vectors.transposed();
  root.symmetrize();
  return root;
}

}  // namespace icd
