#include "hsdla/complex_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsdla {

namespace {

std::size_t checked_elems(std::size_t rows, std::size_t cols) {
  if (rows != 0 && cols > std::numeric_limits<std::size_t>::max() / rows / sizeof(cplx)) {
    throw SizingError("matrix allocation overflows: " + std::to_string(rows) +
                      " x " + std::to_string(cols));
  }
  return rows * cols;
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(checked_elems(rows, cols)) {}

void ComplexMatrix::fill(cplx v) { std::fill(data_.begin(), data_.end(), v); }

bool ComplexMatrix::all_finite() const {
  for (const cplx& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

HermitianView::HermitianView(ComplexMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw DimensionError("HermitianView requires a square matrix");
  }
}

void HermitianView::mirror() {
  const std::size_t n = order();
  for (std::size_t j = 0; j < n; ++j) {
    m_(j, j) = cplx(m_(j, j).real(), 0.0);
    for (std::size_t i = j + 1; i < n; ++i) m_(j, i) = std::conj(m_(i, j));
  }
}

void HermitianView::poison_upper() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = order();
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) m_(i, j) = cplx(nan, nan);
}

ComplexMatrix stack_blocks(const std::vector<ComplexMatrix>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t br = blocks.front().rows();
  const std::size_t bc = blocks.front().cols();
  ComplexMatrix out(br * blocks.size(), bc);
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    stack_block_into(out, a, blocks[a]);
  }
  return out;
}

void stack_block_into(ComplexMatrix& dst, std::size_t index,
                      const ComplexMatrix& block) {
  if (block.cols() != dst.cols() ||
      (index + 1) * block.rows() > dst.rows()) {
    throw DimensionError("stack_block_into: block does not fit destination");
  }
  const std::size_t r0 = index * block.rows();
  for (std::size_t j = 0; j < block.cols(); ++j) {
    std::copy(block.col(j), block.col(j) + block.rows(), dst.col(j) + r0);
  }
}

ComplexMatrix unstack_block(const ComplexMatrix& stacked, std::size_t index,
                            std::size_t block_rows) {
  if ((index + 1) * block_rows > stacked.rows()) {
    throw DimensionError("unstack_block: slice out of range");
  }
  ComplexMatrix out(block_rows, stacked.cols());
  const std::size_t r0 = index * block_rows;
  for (std::size_t j = 0; j < stacked.cols(); ++j) {
    std::copy(stacked.col(j) + r0, stacked.col(j) + r0 + block_rows, out.col(j));
  }
  return out;
}

double frobenius_norm(const ComplexMatrix& x) {
  double s = 0.0;
  const cplx* p = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(p[i]);
  return std::sqrt(s);
}

double rel_frobenius_error(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (!x.same_shape(y)) throw DimensionError("rel_frobenius_error: shape mismatch");
  double diff = 0.0;
  const cplx* px = x.data();
  const cplx* py = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) diff += std::norm(px[i] - py[i]);
  return std::sqrt(diff) / std::max(frobenius_norm(y), 1e-300);
}

double rel_frobenius_error_lower(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (!x.same_shape(y) || x.rows() != x.cols()) {
    throw DimensionError("rel_frobenius_error_lower: shape mismatch");
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = j; i < x.rows(); ++i) {
      diff += std::norm(x(i, j) - y(i, j));
      ref += std::norm(y(i, j));
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

}  // namespace hsdla
