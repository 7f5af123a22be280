#pragma once

// Naive reference implementations used as oracles for the kernel tests.
// Plain triple loops on full matrices; deliberately shares no code with
// hsdla::kernels beyond the matrix type.

#include <complex>
#include <random>

#include "hsdla/complex_matrix.hpp"
#include "hsdla/kernels.hpp"

namespace naive {

using hsdla::ComplexMatrix;
using hsdla::cplx;

inline ComplexMatrix op(const ComplexMatrix& m, hsdla::kernels::Trans t) {
  if (t == hsdla::kernels::Trans::None) return m;
  ComplexMatrix out(m.cols(), m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) out(j, i) = std::conj(m(i, j));
  }
  return out;
}

inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l < a.cols(); ++l) s += a(i, l) * b(l, j);
      c(i, j) = s;
    }
  }
  return c;
}

inline void gemm(cplx alpha, const ComplexMatrix& a, hsdla::kernels::Trans ta,
                 const ComplexMatrix& b, hsdla::kernels::Trans tb, cplx beta,
                 ComplexMatrix& c) {
  const ComplexMatrix p = matmul(op(a, ta), op(b, tb));
  for (std::size_t j = 0; j < c.cols(); ++j) {
    for (std::size_t i = 0; i < c.rows(); ++i) {
      c(i, j) = alpha * p(i, j) + (beta == cplx(0.0) ? cplx(0.0) : beta * c(i, j));
    }
  }
}

/// Full Hermitian matrix from a lower-authoritative one.
inline ComplexMatrix hermitize(const ComplexMatrix& lower) {
  ComplexMatrix f(lower.rows(), lower.cols());
  for (std::size_t j = 0; j < f.cols(); ++j) {
    for (std::size_t i = 0; i < f.rows(); ++i) {
      if (i > j) {
        f(i, j) = lower(i, j);
      } else if (i == j) {
        f(i, j) = lower(i, j).real();
      } else {
        f(i, j) = std::conj(lower(j, i));
      }
    }
  }
  return f;
}

/// Lower triangle of alpha A^H B + conj(alpha) B^H A + beta C. The product's
/// diagonal is realified before the beta term is applied, matching the
/// library's convention.
inline void her2k_lower(cplx alpha, const ComplexMatrix& a,
                        const ComplexMatrix& b, double beta, ComplexMatrix& c) {
  using hsdla::kernels::Trans;
  const ComplexMatrix p1 = matmul(op(a, Trans::ConjTrans), b);
  const ComplexMatrix p2 = matmul(op(b, Trans::ConjTrans), a);
  for (std::size_t j = 0; j < c.cols(); ++j) {
    for (std::size_t i = j; i < c.rows(); ++i) {
      cplx v = alpha * p1(i, j) + std::conj(alpha) * p2(i, j);
      if (i == j) v = v.real();
      if (beta != 0.0) v += beta * c(i, j);
      c(i, j) = v;
    }
  }
}

inline void herk_lower(double alpha, const ComplexMatrix& a, double beta,
                       ComplexMatrix& c) {
  her2k_lower(cplx(alpha / 2.0), a, a, beta, c);
}

inline void herkx_lower(cplx alpha, const ComplexMatrix& a,
                        const ComplexMatrix& b, double beta, ComplexMatrix& c) {
  using hsdla::kernels::Trans;
  const ComplexMatrix p = matmul(op(a, Trans::ConjTrans), b);
  for (std::size_t j = 0; j < c.cols(); ++j) {
    for (std::size_t i = j; i < c.rows(); ++i) {
      cplx v = alpha * p(i, j);
      if (i == j) v = v.real();
      if (beta != 0.0) v += beta * c(i, j);
      c(i, j) = v;
    }
  }
}

/// In-place B := alpha op(T) B for lower-triangular T.
inline void trmm_left_lower(hsdla::kernels::Trans trans, cplx alpha,
                            const ComplexMatrix& t, ComplexMatrix& b) {
  ComplexMatrix tl(t.rows(), t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) {
    for (std::size_t i = j; i < t.rows(); ++i) tl(i, j) = t(i, j);
  }
  const ComplexMatrix p = matmul(op(tl, trans), b);
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, j) = alpha * p(i, j);
  }
}

inline ComplexMatrix random_matrix(std::size_t r, std::size_t c,
                                   std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  ComplexMatrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = cplx(d(eng), d(eng));
  return m;
}

/// Random Hermitian positive-definite matrix (lower authoritative).
inline hsdla::HermitianView random_hpd(std::size_t n, std::uint64_t seed) {
  const ComplexMatrix m = random_matrix(n, n, seed);
  hsdla::HermitianView h(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l < n; ++l) s += std::conj(m(l, i)) * m(l, j);
      h(i, j) = i == j ? s.real() + double(n) : s;
    }
  }
  return h;
}

inline double max_abs_diff_lower(const ComplexMatrix& x, const ComplexMatrix& y) {
  double m = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = j; i < x.rows(); ++i) {
      m = std::max(m, std::abs(x(i, j) - y(i, j)));
    }
  }
  return m;
}

inline double max_abs_diff(const ComplexMatrix& x, const ComplexMatrix& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m = std::max(m, std::abs(x.data()[i] - y.data()[i]));
  }
  return m;
}

}  // namespace naive
