#include <doctest.h>

#include <cmath>

#include "hsdla/complex_matrix.hpp"
#include "hsdla/flop_ledger.hpp"

using namespace hsdla;

TEST_CASE("ComplexMatrix is column-major") {
  ComplexMatrix m(3, 2);
  m(2, 1) = cplx(5.0, -1.0);
  CHECK(m.data()[1 * 3 + 2] == cplx(5.0, -1.0));
  CHECK(m.col(1)[2] == cplx(5.0, -1.0));
  CHECK(m.ld() == 3);
}

TEST_CASE("fill and all_finite") {
  ComplexMatrix m(2, 2);
  m.fill(cplx(1.0, 2.0));
  CHECK(m(1, 1) == cplx(1.0, 2.0));
  CHECK(m.all_finite());
  m(0, 1) = cplx(std::nan(""), 0.0);
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("stacking round trip and bounds") {
  std::vector<ComplexMatrix> blocks;
  for (int a = 0; a < 3; ++a) {
    ComplexMatrix b(2, 4);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = cplx(a, double(i));
    blocks.push_back(b);
  }
  const ComplexMatrix stacked = stack_blocks(blocks);
  CHECK(stacked.rows() == 6);
  CHECK(stacked.cols() == 4);
  for (int a = 0; a < 3; ++a) {
    const ComplexMatrix back = unstack_block(stacked, a, 2);
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back.data()[i] == blocks[a].data()[i]);
    }
  }
  CHECK_THROWS_AS(unstack_block(stacked, 3, 2), DimensionError);
  ComplexMatrix dst(6, 4);
  ComplexMatrix wrong(2, 5);
  CHECK_THROWS_AS(stack_block_into(dst, 0, wrong), DimensionError);
}

TEST_CASE("HermitianView mirror conjugates and realifies the diagonal") {
  HermitianView h(3);
  h(0, 0) = cplx(1.0, 0.5);  // imaginary residue dropped by mirror
  h(1, 0) = cplx(2.0, -3.0);
  h(2, 1) = cplx(0.0, 4.0);
  h.mirror();
  CHECK(h(0, 0) == cplx(1.0, 0.0));
  CHECK(h(0, 1) == std::conj(h(1, 0)));
  CHECK(h(1, 2) == std::conj(h(2, 1)));
}

TEST_CASE("poison_upper hits exactly the strict upper triangle") {
  HermitianView h(3);
  h.matrix().fill(cplx(1.0, 1.0));
  h.poison_upper();
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (i < j) {
        CHECK(std::isnan(h(i, j).real()));
      } else {
        CHECK(h(i, j) == cplx(1.0, 1.0));
      }
    }
  }
}

TEST_CASE("frobenius helpers") {
  ComplexMatrix x(2, 1), y(2, 1);
  x(0, 0) = cplx(3.0, 0.0);
  x(1, 0) = cplx(0.0, 4.0);
  CHECK(frobenius_norm(x) == doctest::Approx(5.0));
  y = x;
  CHECK(rel_frobenius_error(x, y) == 0.0);
  y(0, 0) += 0.5;
  CHECK(rel_frobenius_error(x, y) == doctest::Approx(0.5 / frobenius_norm(y)));

  // lower-restricted error ignores upper-triangle garbage
  ComplexMatrix a(2, 2), b(2, 2);
  a(0, 0) = b(0, 0) = cplx(1.0);
  a(1, 0) = b(1, 0) = cplx(2.0);
  a(1, 1) = b(1, 1) = cplx(3.0);
  a(0, 1) = cplx(999.0);
  b(0, 1) = cplx(-999.0);
  CHECK(rel_frobenius_error_lower(a, b) == 0.0);
}

TEST_CASE("flop ledger accumulates per kernel and in total") {
  FlopLedger l;
  l.add("gemm", 100);
  l.add("gemm", 20);
  l.add("herk", 5);
  CHECK(l.count("gemm") == 120);
  CHECK(l.count("herk") == 5);
  CHECK(l.count("missing") == 0);
  CHECK(l.total() == 125);

  FlopLedger m;
  m.add("herk", 5);
  m.add("gemm", 120);
  CHECK(l == m);
  m.add("gemm", 1);
  CHECK_FALSE(l == m);
}
