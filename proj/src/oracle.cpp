#include "hsdla/oracle.hpp"

namespace hsdla::oracle {

namespace {

// Deliberately plain triple loops, sharing nothing with the kernels module.

ComplexMatrix full_from_lower(const HermitianView& h) {
  const std::size_t n = h.order();
  ComplexMatrix f(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    f(j, j) = cplx(h(j, j).real(), 0.0);
    for (std::size_t i = j + 1; i < n; ++i) {
      f(i, j) = h(i, j);
      f(j, i) = std::conj(h(i, j));
    }
  }
  return f;
}

ComplexMatrix mul(const ComplexMatrix& x, const ComplexMatrix& y) {
  ComplexMatrix c(x.rows(), y.cols());
  for (std::size_t j = 0; j < y.cols(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l < x.cols(); ++l) s += x(i, l) * y(l, j);
      c(i, j) = s;
    }
  }
  return c;
}

ComplexMatrix mul_ch(const ComplexMatrix& x, const ComplexMatrix& y) {
  // x^H y
  ComplexMatrix c(x.cols(), y.cols());
  for (std::size_t j = 0; j < y.cols(); ++j) {
    for (std::size_t i = 0; i < x.cols(); ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l < x.rows(); ++l) {
        s += std::conj(x(l, i)) * y(l, j);
      }
      c(i, j) = s;
    }
  }
  return c;
}

ComplexMatrix conj_t(const ComplexMatrix& x) {
  ComplexMatrix c(x.cols(), x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) c(j, i) = std::conj(x(i, j));
  }
  return c;
}

void accumulate(ComplexMatrix& acc, const ComplexMatrix& term) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc.data()[i] += term.data()[i];
  }
}

void check_size(const ProblemInstance& p) {
  if (p.n_g > kMaxNg) {
    throw ConfigError("oracle refuses N_G > " + std::to_string(kMaxNg) +
                      " (got " + std::to_string(p.n_g) + ")");
  }
}

}  // namespace

HermitianView direct_S(const ProblemInstance& p) {
  check_size(p);
  ComplexMatrix s(p.n_g, p.n_g);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    const ComplexMatrix aa = unstack_block(p.A, a, p.n_l);
    const ComplexMatrix ba = unstack_block(p.B, a, p.n_l);
    accumulate(s, mul_ch(aa, aa));
    ComplexMatrix ub(p.n_l, p.n_g);
    for (std::size_t j = 0; j < p.n_g; ++j) {
      for (std::size_t i = 0; i < p.n_l; ++i) ub(i, j) = p.U[a][i] * ba(i, j);
    }
    accumulate(s, mul_ch(ub, ub));
  }
  return HermitianView(std::move(s));
}

HermitianView direct_H(const ProblemInstance& p) {
  check_size(p);
  ComplexMatrix h(p.n_g, p.n_g);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    const ComplexMatrix aa = unstack_block(p.A, a, p.n_l);
    const ComplexMatrix ba = unstack_block(p.B, a, p.n_l);
    const ComplexMatrix taa = full_from_lower(p.T_AA[a]);
    const ComplexMatrix tbb = full_from_lower(p.T_BB[a]);
    const ComplexMatrix tba = conj_t(p.T_AB[a]);
    accumulate(h, mul_ch(aa, mul(taa, aa)));
    accumulate(h, mul_ch(aa, mul(p.T_AB[a], ba)));
    accumulate(h, mul_ch(ba, mul(tba, aa)));
    accumulate(h, mul_ch(ba, mul(tbb, ba)));
  }
  return HermitianView(std::move(h));
}

HermitianView direct_H_grouped(const ProblemInstance& p) {
  check_size(p);
  ComplexMatrix h(p.n_g, p.n_g);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    const ComplexMatrix aa = unstack_block(p.A, a, p.n_l);
    const ComplexMatrix ba = unstack_block(p.B, a, p.n_l);
    const ComplexMatrix taa = full_from_lower(p.T_AA[a]);
    const ComplexMatrix tbb = full_from_lower(p.T_BB[a]);
    const ComplexMatrix tba = conj_t(p.T_AB[a]);

    // Z_a = T^[BA] A_a + 1/2 T^[BB] B_a
    ComplexMatrix z = mul(tba, aa);
    const ComplexMatrix half = mul(tbb, ba);
    for (std::size_t i = 0; i < z.size(); ++i) {
      z.data()[i] += 0.5 * half.data()[i];
    }
    accumulate(h, mul_ch(ba, z));
    accumulate(h, mul_ch(z, ba));
    accumulate(h, mul_ch(aa, mul(taa, aa)));
  }
  return HermitianView(std::move(h));
}

}  // namespace hsdla::oracle
