#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "hsdla/errors.hpp"

namespace hsdla {

using cplx = std::complex<double>;

/// Dense column-major complex double-precision matrix. The universal operand.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return data_[j * rows_ + i];
  }

  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }
  cplx* col(std::size_t j) { return data_.data() + j * rows_; }
  const cplx* col(std::size_t j) const { return data_.data() + j * rows_; }

  // Leading dimension; equals rows() for an owning matrix.
  std::size_t ld() const { return rows_; }

  bool same_shape(const ComplexMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(cplx v);
  bool all_finite() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<cplx> data_;
};

/// Square matrix whose lower triangle is authoritative. The upper triangle is
/// undefined until mirror() is called; kernels never read or write it.
class HermitianView {
 public:
  HermitianView() = default;
  explicit HermitianView(std::size_t n) : m_(n, n) {}
  explicit HermitianView(ComplexMatrix m);

  std::size_t order() const { return m_.rows(); }
  ComplexMatrix& matrix() { return m_; }
  const ComplexMatrix& matrix() const { return m_; }

  cplx& operator()(std::size_t i, std::size_t j) { return m_(i, j); }
  const cplx& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  // Fill the upper triangle with the conjugate of the lower and drop any
  // imaginary residue on the diagonal.
  void mirror();

  // Overwrite the strict upper triangle with NaN. Used by triangle-contract
  // tests; any kernel that touches the upper triangle becomes visible.
  void poison_upper();

 private:
  ComplexMatrix m_;
};

/// Concatenate equally-shaped blocks rowwise; block a occupies rows
/// [a*block_rows, (a+1)*block_rows).
ComplexMatrix stack_blocks(const std::vector<ComplexMatrix>& blocks);

/// In-place stacking: write `block` into rows [index*block.rows(), ...) of dst.
void stack_block_into(ComplexMatrix& dst, std::size_t index,
                      const ComplexMatrix& block);

/// Row-slice extraction, the inverse of stacking.
ComplexMatrix unstack_block(const ComplexMatrix& stacked, std::size_t index,
                            std::size_t block_rows);

double frobenius_norm(const ComplexMatrix& x);

/// ||X - Y||_F / max(||Y||_F, 1e-300)
double rel_frobenius_error(const ComplexMatrix& x, const ComplexMatrix& y);

/// Same, restricted to the lower triangle (for Hermitian results whose upper
/// triangle is undefined).
double rel_frobenius_error_lower(const ComplexMatrix& x, const ComplexMatrix& y);

}  // namespace hsdla
