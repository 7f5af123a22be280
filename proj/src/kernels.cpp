#include "hsdla/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hsdla::kernels {

int resolve_threads(const KernelConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("HSDLA_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

namespace detail {

void parallel_for(std::size_t num_tasks, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (num_tasks == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)),
                            num_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < num_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= num_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

cplx dotc(std::size_t k, const cplx* a, const cplx* b) {
  // Two independent accumulator pairs to break the FP dependency chain.
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  double cr0 = 0.0, ci0 = 0.0, cr1 = 0.0, ci1 = 0.0;
  std::size_t l = 0;
  for (; l + 1 < k; l += 2) {
    const double ar0 = pa[2 * l], ai0 = pa[2 * l + 1];
    const double br0 = pb[2 * l], bi0 = pb[2 * l + 1];
    cr0 += ar0 * br0 + ai0 * bi0;
    ci0 += ar0 * bi0 - ai0 * br0;
    const double ar1 = pa[2 * l + 2], ai1 = pa[2 * l + 3];
    const double br1 = pb[2 * l + 2], bi1 = pb[2 * l + 3];
    cr1 += ar1 * br1 + ai1 * bi1;
    ci1 += ar1 * bi1 - ai1 * br1;
  }
  for (; l < k; ++l) {
    const double ar = pa[2 * l], ai = pa[2 * l + 1];
    const double br = pb[2 * l], bi = pb[2 * l + 1];
    cr0 += ar * br + ai * bi;
    ci0 += ar * bi - ai * br;
  }
  return {cr0 + cr1, ci0 + ci1};
}

namespace {

inline cplx combine(cplx alpha, cplx prod, cplx beta, const cplx* old) {
  cplx v = alpha * prod;
  if (beta != cplx(0.0)) v += beta * *old;  // beta == 0: never read C
  return v;
}

void gemm_ctn_cols(std::size_t m, std::size_t k, cplx alpha, const cplx* a,
                   std::size_t lda, const cplx* b, std::size_t ldb, cplx beta,
                   cplx* c, std::size_t ldc, std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    const cplx* bj = b + j * ldb;
    cplx* cj = c + j * ldc;
    for (std::size_t i = 0; i < m; ++i) {
      cj[i] = combine(alpha, dotc(k, a + i * lda, bj), beta, &cj[i]);
    }
  }
}

void herk_cols(std::size_t n, std::size_t k, double alpha, const cplx* a,
               std::size_t lda, double beta, cplx* c, std::size_t ldc,
               std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    const cplx* aj = a + j * lda;
    cplx* cj = c + j * ldc;
    for (std::size_t i = j; i < n; ++i) {
      cplx v = alpha * dotc(k, a + i * lda, aj);
      if (i == j) v = cplx(v.real(), 0.0);
      if (beta != 0.0) v += beta * cj[i];
      cj[i] = v;
    }
  }
}

void her2k_cols(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                std::size_t lda, const cplx* b, std::size_t ldb, double beta,
                cplx* c, std::size_t ldc, std::size_t j0, std::size_t j1) {
  const cplx alphac = std::conj(alpha);
  for (std::size_t j = j0; j < j1; ++j) {
    const cplx* aj = a + j * lda;
    const cplx* bj = b + j * ldb;
    cplx* cj = c + j * ldc;
    for (std::size_t i = j; i < n; ++i) {
      cplx v = alpha * dotc(k, a + i * lda, bj) +
               alphac * dotc(k, b + i * ldb, aj);
      if (i == j) v = cplx(v.real(), 0.0);
      if (beta != 0.0) v += beta * cj[i];
      cj[i] = v;
    }
  }
}

void herkx_cols(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                std::size_t lda, const cplx* b, std::size_t ldb, double beta,
                cplx* c, std::size_t ldc, std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    const cplx* bj = b + j * ldb;
    cplx* cj = c + j * ldc;
    for (std::size_t i = j; i < n; ++i) {
      cplx v = alpha * dotc(k, a + i * lda, bj);
      if (i == j) v = cplx(v.real(), 0.0);
      if (beta != 0.0) v += beta * cj[i];
      cj[i] = v;
    }
  }
}

void hemm_cols(std::size_t n, cplx alpha, const cplx* h, std::size_t ldh,
               const cplx* b, std::size_t ldb, cplx beta, cplx* c,
               std::size_t ldc, std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    const cplx* bj = b + j * ldb;
    cplx* cj = c + j * ldc;
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l <= i; ++l) s += h[l * ldh + i] * bj[l];
      for (std::size_t l = i + 1; l < n; ++l) {
        s += std::conj(h[i * ldh + l]) * bj[l];
      }
      cj[i] = combine(alpha, s, beta, &cj[i]);
    }
  }
}

// Column-panel task split shared by all blocked variants.
void run_panels(std::size_t n, const KernelConfig& cfg,
                const std::function<void(std::size_t, std::size_t)>& panel) {
  const std::size_t block = std::max<std::size_t>(cfg.block, 1);
  const std::size_t tasks = (n + block - 1) / block;
  parallel_for(tasks, resolve_threads(cfg), [&](std::size_t t) {
    panel(t * block, std::min(n, (t + 1) * block));
  });
}

}  // namespace

void gemm_ctn(std::size_t m, std::size_t n, std::size_t k, cplx alpha,
              const cplx* a, std::size_t lda, const cplx* b, std::size_t ldb,
              cplx beta, cplx* c, std::size_t ldc) {
  gemm_ctn_cols(m, k, alpha, a, lda, b, ldb, beta, c, ldc, 0, n);
}

void herk_ctn_lower(std::size_t n, std::size_t k, double alpha, const cplx* a,
                    std::size_t lda, double beta, cplx* c, std::size_t ldc) {
  herk_cols(n, k, alpha, a, lda, beta, c, ldc, 0, n);
}

void her2k_ctn_lower(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                     std::size_t lda, const cplx* b, std::size_t ldb,
                     double beta, cplx* c, std::size_t ldc) {
  her2k_cols(n, k, alpha, a, lda, b, ldb, beta, c, ldc, 0, n);
}

void herkx_ctn_lower(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                     std::size_t lda, const cplx* b, std::size_t ldb,
                     double beta, cplx* c, std::size_t ldc) {
  herkx_cols(n, k, alpha, a, lda, b, ldb, beta, c, ldc, 0, n);
}

void hemm_left_lower(std::size_t n, std::size_t m, cplx alpha, const cplx* h,
                     std::size_t ldh, const cplx* b, std::size_t ldb, cplx beta,
                     cplx* c, std::size_t ldc) {
  hemm_cols(n, alpha, h, ldh, b, ldb, beta, c, ldc, 0, m);
}

}  // namespace detail

namespace {

using detail::parallel_for;

// Materialize conj(X^T) so every gemm reduces to the A^H B core.
ComplexMatrix conj_transpose(const ComplexMatrix& x) {
  ComplexMatrix out(x.cols(), x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) out(j, i) = std::conj(x(i, j));
  }
  return out;
}

void scale_in_place(ComplexMatrix& c, cplx beta) {
  if (beta == cplx(1.0)) return;
  cplx* p = c.data();
  for (std::size_t i = 0; i < c.size(); ++i) {
    p[i] = (beta == cplx(0.0)) ? cplx(0.0) : beta * p[i];
  }
}

void scale_lower_in_place(HermitianView& c, double beta) {
  if (beta == 1.0) return;
  const std::size_t n = c.order();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i) {
      c(i, j) = (beta == 0.0) ? cplx(0.0) : beta * c(i, j);
    }
  }
}

}  // namespace

void gemm(cplx alpha, const ComplexMatrix& a, Trans ta, const ComplexMatrix& b,
          Trans tb, cplx beta, ComplexMatrix& c, FlopLedger* ledger,
          const KernelConfig& cfg) {
  const std::size_t m = ta == Trans::None ? a.rows() : a.cols();
  const std::size_t k = ta == Trans::None ? a.cols() : a.rows();
  const std::size_t kb = tb == Trans::None ? b.rows() : b.cols();
  const std::size_t n = tb == Trans::None ? b.cols() : b.rows();
  if (k != kb || c.rows() != m || c.cols() != n) {
    throw DimensionError("gemm: nonconforming dimensions");
  }
  if (ledger) ledger->add("gemm", 8ull * m * n * k);
  if (alpha == cplx(0.0)) {
    scale_in_place(c, beta);
    return;
  }

  // Reduce every trans combination to the k-major A^H B core.
  const ComplexMatrix* pa = &a;
  const ComplexMatrix* pb = &b;
  ComplexMatrix at, bt;
  if (ta == Trans::None) {
    at = conj_transpose(a);
    pa = &at;
  }
  if (tb == Trans::ConjTrans) {
    bt = conj_transpose(b);
    pb = &bt;
  }

  auto panel = [&](std::size_t j0, std::size_t j1) {
    detail::gemm_ctn_cols(m, k, alpha, pa->data(), pa->ld(), pb->data(),
                          pb->ld(), beta, c.data(), c.ld(), j0, j1);
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(n, cfg, panel);
  } else {
    panel(0, n);
  }
}

void hemm(Side side, cplx alpha, const HermitianView& a, const ComplexMatrix& b,
          cplx beta, ComplexMatrix& c, FlopLedger* ledger,
          const KernelConfig& cfg) {
  if (side != Side::Left) throw DimensionError("hemm: only Side::Left supported");
  const std::size_t n = a.order();
  const std::size_t m = b.cols();
  if (b.rows() != n || c.rows() != n || c.cols() != m) {
    throw DimensionError("hemm: nonconforming dimensions");
  }
  if (ledger) ledger->add("hemm", 8ull * n * n * m);
  if (alpha == cplx(0.0)) {
    scale_in_place(c, beta);
    return;
  }
  auto panel = [&](std::size_t j0, std::size_t j1) {
    detail::hemm_cols(n, alpha, a.matrix().data(), a.matrix().ld(), b.data(),
                      b.ld(), beta, c.data(), c.ld(), j0, j1);
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(m, cfg, panel);
  } else {
    panel(0, m);
  }
}

void herk(double alpha, const ComplexMatrix& a, double beta, HermitianView& c,
          FlopLedger* ledger, const KernelConfig& cfg) {
  const std::size_t k = a.rows();
  const std::size_t n = a.cols();
  if (c.order() != n) throw DimensionError("herk: nonconforming dimensions");
  if (ledger) ledger->add("herk", 4ull * k * n * n);
  if (alpha == 0.0) {
    scale_lower_in_place(c, beta);
    return;
  }
  auto panel = [&](std::size_t j0, std::size_t j1) {
    detail::herk_cols(n, k, alpha, a.data(), a.ld(), beta, c.matrix().data(),
                      c.matrix().ld(), j0, j1);
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(n, cfg, panel);
  } else {
    panel(0, n);
  }
}

void her2k(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
           double beta, HermitianView& c, FlopLedger* ledger,
           const KernelConfig& cfg) {
  const std::size_t k = a.rows();
  const std::size_t n = a.cols();
  if (!a.same_shape(b) || c.order() != n) {
    throw DimensionError("her2k: nonconforming dimensions");
  }
  if (ledger) ledger->add("her2k", 8ull * k * n * n);
  if (alpha == cplx(0.0)) {
    scale_lower_in_place(c, beta);
    return;
  }
  auto panel = [&](std::size_t j0, std::size_t j1) {
    detail::her2k_cols(n, k, alpha, a.data(), a.ld(), b.data(), b.ld(), beta,
                       c.matrix().data(), c.matrix().ld(), j0, j1);
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(n, cfg, panel);
  } else {
    panel(0, n);
  }
}

void herkx(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
           double beta, HermitianView& c, FlopLedger* ledger,
           const KernelConfig& cfg) {
  const std::size_t k = a.rows();
  const std::size_t n = a.cols();
  if (!a.same_shape(b) || c.order() != n) {
    throw DimensionError("herkx: nonconforming dimensions");
  }
  if (ledger) ledger->add("herkx", 4ull * k * n * n);
  if (alpha == cplx(0.0)) {
    scale_lower_in_place(c, beta);
    return;
  }
  auto panel = [&](std::size_t j0, std::size_t j1) {
    detail::herkx_cols(n, k, alpha, a.data(), a.ld(), b.data(), b.ld(), beta,
                       c.matrix().data(), c.matrix().ld(), j0, j1);
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(n, cfg, panel);
  } else {
    panel(0, n);
  }
}

void trmm(Side side, Trans trans, cplx alpha, const ComplexMatrix& t,
          ComplexMatrix& b, FlopLedger* ledger, const KernelConfig& cfg) {
  if (side != Side::Left) throw DimensionError("trmm: only Side::Left supported");
  const std::size_t n = t.rows();
  if (t.cols() != n || b.rows() != n) {
    throw DimensionError("trmm: nonconforming dimensions");
  }
  if (ledger) ledger->add("trmm", 4ull * n * n * b.cols());

  auto panel = [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      cplx* bj = b.col(j);
      if (trans == Trans::ConjTrans) {
        // y[i] = sum_{l >= i} conj(T[l,i]) b[l]; ascending i never rereads
        // an overwritten entry.
        for (std::size_t i = 0; i < n; ++i) {
          cplx s = 0.0;
          const cplx* ti = t.col(i);
          for (std::size_t l = i; l < n; ++l) s += std::conj(ti[l]) * bj[l];
          bj[i] = alpha * s;
        }
      } else {
        // y[i] = sum_{l <= i} T[i,l] b[l]; descending i.
        for (std::size_t ii = n; ii-- > 0;) {
          cplx s = 0.0;
          for (std::size_t l = 0; l <= ii; ++l) s += t(ii, l) * bj[l];
          bj[ii] = alpha * s;
        }
      }
    }
  };
  if (cfg.variant == Variant::BlockedParallel) {
    detail::run_panels(b.cols(), cfg, panel);
  } else {
    panel(0, b.cols());
  }
}

PotrfResult potrf(const HermitianView& a, FlopLedger* ledger) {
  const std::size_t n = a.order();
  if (ledger) ledger->add("potrf", 4ull * n * n * n / 3);
  ComplexMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (std::size_t p = 0; p < j; ++p) d -= std::norm(l(j, p));
    if (!(d > 0.0) || !std::isfinite(d)) return {std::nullopt, j};
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * std::conj(l(j, p));
      l(i, j) = s / ljj;
    }
  }
  PotrfResult r;
  r.factor = std::move(l);
  return r;
}

void diag_scale(std::span<const double> u, const ComplexMatrix& b,
                ComplexMatrix& x, FlopLedger* ledger) {
  if (u.size() != b.rows()) {
    throw DimensionError("diag_scale: scale length does not match row count");
  }
  if (!x.same_shape(b)) x = ComplexMatrix(b.rows(), b.cols());
  if (ledger) ledger->add("scaling", 2ull * b.rows() * b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    const cplx* bj = b.col(j);
    cplx* xj = x.col(j);
    for (std::size_t i = 0; i < b.rows(); ++i) xj[i] = u[i] * bj[i];
  }
}

}  // namespace hsdla::kernels
