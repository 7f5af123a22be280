#include "hsdla/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <utility>

#include "hsdla/hybrid_dynamic.hpp"

namespace hsdla::pipeline {

const char* variant_name(Variant v) {
  return v == Variant::Original ? "original" : "refined";
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Cpu: return "cpu";
    case Strategy::Static: return "static";
    case Strategy::Dynamic: return "dynamic";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::Original;
  if (s == "refined") return Variant::Refined;
  throw ConfigError("unknown variant: " + s);
}

Strategy parse_strategy(const std::string& s) {
  if (s == "cpu") return Strategy::Cpu;
  if (s == "static") return Strategy::Static;
  if (s == "dynamic") return Strategy::Dynamic;
  throw ConfigError("unknown strategy: " + s);
}

namespace {

using Clock = std::chrono::steady_clock;

/// Running total / high-water mark of live temporary allocations.
class TempTracker {
 public:
  void alloc(std::size_t b) {
    cur_ += b;
    peak_ = std::max(peak_, cur_);
  }
  void release(std::size_t b) { cur_ -= b; }
  std::size_t peak() const { return peak_; }

 private:
  std::size_t cur_ = 0, peak_ = 0;
};

std::size_t bytes_of(const ComplexMatrix& m) { return m.size() * sizeof(cplx); }

struct PhaseScope {
  HSResult& r;
  const char* name;
  Clock::time_point t0 = Clock::now();
  ~PhaseScope() {
    r.phases.push_back(
        {name, std::chrono::duration<double>(Clock::now() - t0).count()});
  }
};

void check_config(const PipelineConfig& cfg) {
  if (cfg.strategy != Strategy::Cpu && cfg.pool == nullptr) {
    throw ConfigError("static/dynamic strategies need a device pool");
  }
  if (cfg.strategy == Strategy::Static && cfg.split_ratio <= 0.0) {
    throw ConfigError("static strategy needs split ratio m > 0");
  }
}

// The three big triangular updates go through the configured strategy; the
// per-atom N_L-sized work always runs on the CPU kernels directly.

void big_herk(const PipelineConfig& cfg, double alpha, const ComplexMatrix& a,
              double beta, HermitianView& c, HSResult& r) {
  switch (cfg.strategy) {
    case Strategy::Cpu:
      kernels::herk(alpha, a, beta, c, &r.ledger, cfg.kernel);
      break;
    case Strategy::Static:
      hybrid::herk_static(alpha, a, beta, c,
                          hybrid::make_split(c.order(), a.rows(), cfg.split_ratio),
                          *cfg.pool, &r.ledger, &r.warnings, cfg.log);
      break;
    case Strategy::Dynamic:
      hybrid::herk_dynamic(alpha, a, beta, c, *cfg.pool, cfg.block_override,
                           &r.ledger, cfg.log);
      break;
  }
}

void big_her2k(const PipelineConfig& cfg, cplx alpha, const ComplexMatrix& a,
               const ComplexMatrix& b, double beta, HermitianView& c,
               HSResult& r) {
  switch (cfg.strategy) {
    case Strategy::Cpu:
      kernels::her2k(alpha, a, b, beta, c, &r.ledger, cfg.kernel);
      break;
    case Strategy::Static:
      hybrid::her2k_static(alpha, a, b, beta, c,
                           hybrid::make_split(c.order(), a.rows(), cfg.split_ratio),
                           *cfg.pool, &r.ledger, &r.warnings, cfg.log);
      break;
    case Strategy::Dynamic:
      hybrid::her2k_dynamic(alpha, a, b, beta, c, *cfg.pool, cfg.block_override,
                            &r.ledger, cfg.log);
      break;
  }
}

void big_herkx(const PipelineConfig& cfg, cplx alpha, const ComplexMatrix& a,
               const ComplexMatrix& b, double beta, HermitianView& c,
               HSResult& r) {
  switch (cfg.strategy) {
    case Strategy::Cpu:
      kernels::herkx(alpha, a, b, beta, c, &r.ledger, cfg.kernel);
      break;
    case Strategy::Static:
      hybrid::herkx_static(alpha, a, b, beta, c,
                           hybrid::make_split(c.order(), a.rows(), cfg.split_ratio),
                           *cfg.pool, &r.ledger, &r.warnings, cfg.log);
      break;
    case Strategy::Dynamic:
      hybrid::herkx_dynamic(alpha, a, b, beta, c, *cfg.pool, cfg.block_override,
                            &r.ledger, cfg.log);
      break;
  }
}

void big_gemm(const PipelineConfig& cfg, const ComplexMatrix& a,
              const ComplexMatrix& b, ComplexMatrix& c, HSResult& r) {
  if (cfg.strategy == Strategy::Dynamic) {
    hybrid::gemm_dynamic(cplx(1.0), a, b, cplx(0.0), c, *cfg.pool,
                         cfg.block_override, &r.ledger, cfg.log);
  } else {
    // no static split is defined for a full rectangular product
    kernels::gemm(cplx(1.0), a, kernels::Trans::ConjTrans, b,
                  kernels::Trans::None, cplx(0.0), c, &r.ledger, cfg.kernel);
  }
}

/// dst := rows [index*dst.rows(), ...) of src (inverse of stack_block_into,
/// reusing dst's storage).
void load_block(ComplexMatrix& dst, const ComplexMatrix& src, std::size_t index) {
  const std::size_t br = dst.rows();
  if (dst.cols() != src.cols() || (index + 1) * br > src.rows()) {
    throw DimensionError("load_block: slice out of range");
  }
  for (std::size_t j = 0; j < dst.cols(); ++j) {
    std::copy_n(src.col(j) + index * br, br, dst.col(j));
  }
}

ComplexMatrix copy_rows(const ComplexMatrix& src, std::size_t row0,
                        std::size_t nrows) {
  ComplexMatrix out(nrows, src.cols());
  for (std::size_t j = 0; j < src.cols(); ++j) {
    std::copy_n(src.col(j) + row0, nrows, out.col(j));
  }
  return out;
}

std::vector<double> stacked_scales(const ProblemInstance& p) {
  std::vector<double> u;
  u.reserve(p.n_atoms * p.n_l);
  for (const auto& ua : p.U) u.insert(u.end(), ua.begin(), ua.end());
  return u;
}

// Z_a = T^[BA] A_a + 1/2 T^[BB] B_a into z, reusing a_slice as scratch.
void compute_z(const ProblemInstance& p, std::size_t a, ComplexMatrix& a_slice,
               ComplexMatrix& b_slice, ComplexMatrix& z, FlopLedger& ledger,
               const kernels::KernelConfig& kc) {
  load_block(a_slice, p.A, a);
  load_block(b_slice, p.B, a);
  kernels::gemm(cplx(1.0), p.T_AB[a], kernels::Trans::ConjTrans, a_slice,
                kernels::Trans::None, cplx(0.0), z, &ledger, kc);
  kernels::hemm(kernels::Side::Left, cplx(0.5), p.T_BB[a], b_slice, cplx(1.0),
                z, &ledger, kc);
}

}  // namespace

HSResult build_hs_original(const ProblemInstance& p, const PipelineConfig& cfg) {
  check_config(cfg);
  const std::size_t na = p.n_atoms, nl = p.n_l, ng = p.n_g;
  const std::size_t rows = na * nl;

  HSResult r;
  r.H = HermitianView(ng);
  r.S = HermitianView(ng);
  TempTracker mem;

  // The two full-size working buffers: A holds the Z stack, later the
  // compressed non-HPD A_a stack; B holds the B copy, then U B, then B_T/B_B.
  ComplexMatrix work_a(rows, ng), work_b(rows, ng);
  mem.alloc(bytes_of(work_a));
  mem.alloc(bytes_of(work_b));

  ComplexMatrix a_slice(nl, ng), b_slice(nl, ng), z(nl, ng);
  mem.alloc(3 * bytes_of(z));

  {
    PhaseScope t{r, "z_loop"};
    for (std::size_t a = 0; a < na; ++a) {
      compute_z(p, a, a_slice, b_slice, z, r.ledger, cfg.kernel);
      stack_block_into(work_a, a, z);
      stack_block_into(work_b, a, b_slice);
    }
  }
  {
    PhaseScope t{r, "her2k"};
    big_her2k(cfg, cplx(1.0), work_a, work_b, 0.0, r.H, r);
  }
  {
    PhaseScope t{r, "s"};
    // restore both buffers, then S = A^H A; B = U B; S += B^H B
    work_a = p.A;
    work_b = p.B;
    big_herk(cfg, 1.0, work_a, 0.0, r.S, r);
    kernels::diag_scale(stacked_scales(p), work_b, work_b, &r.ledger);
    big_herk(cfg, 1.0, work_b, 1.0, r.S, r);
  }

  std::size_t n_hpd = 0;
  {
    PhaseScope t{r, "chol_loop"};
    std::vector<kernels::PotrfResult> chol;
    chol.reserve(na);
    for (std::size_t a = 0; a < na; ++a) {
      chol.push_back(kernels::potrf(p.T_AA[a], &r.ledger));
      if (chol.back().ok()) ++n_hpd;
    }
    std::size_t s = 0, f = 0;
    for (std::size_t a = 0; a < na; ++a) {
      load_block(a_slice, p.A, a);
      if (chol[a].ok()) {
        z = a_slice;
        kernels::trmm(kernels::Side::Left, kernels::Trans::ConjTrans, cplx(1.0),
                      *chol[a].factor, z, &r.ledger, cfg.kernel);
        stack_block_into(work_b, s++, z);  // B_T at the top of B
      } else {
        kernels::hemm(kernels::Side::Left, cplx(1.0), p.T_AA[a], a_slice,
                      cplx(0.0), z, &r.ledger, cfg.kernel);
        stack_block_into(work_b, n_hpd + f, z);  // B_B below B_T
        stack_block_into(work_a, f++, a_slice);  // compressed into A
      }
    }
  }
  const std::size_t n_fail = na - n_hpd;
  {
    PhaseScope t{r, "h_aa_update"};
    if (n_hpd > 0) {
      ComplexMatrix b_t = copy_rows(work_b, 0, n_hpd * nl);
      mem.alloc(bytes_of(b_t));
      big_herk(cfg, 1.0, b_t, 1.0, r.H, r);
      mem.release(bytes_of(b_t));
    }
    if (n_fail > 0) {
      ComplexMatrix b_b = copy_rows(work_b, n_hpd * nl, n_fail * nl);
      ComplexMatrix a_f = copy_rows(work_a, 0, n_fail * nl);
      ComplexMatrix full(ng, ng);  // the redundant full product of line 28
      mem.alloc(bytes_of(b_b) + bytes_of(a_f) + bytes_of(full));
      big_gemm(cfg, a_f, b_b, full, r);
      for (std::size_t j = 0; j < ng; ++j) {
        for (std::size_t i = j; i < ng; ++i) r.H(i, j) += full(i, j);
      }
      mem.release(bytes_of(b_b) + bytes_of(a_f) + bytes_of(full));
    }
  }

  r.peak_temp_bytes = mem.peak();
  return r;
}

HSResult build_hs_refined(const ProblemInstance& p, const PipelineConfig& cfg) {
  check_config(cfg);
  const std::size_t na = p.n_atoms, nl = p.n_l, ng = p.n_g;
  const std::size_t rows = na * nl;

  HSResult r;
  r.H = HermitianView(ng);
  r.S = HermitianView(ng);
  TempTracker mem;

  ComplexMatrix x(rows, ng);  // the single full-size temporary
  mem.alloc(bytes_of(x));
  ComplexMatrix a_slice(nl, ng), b_slice(nl, ng), z(nl, ng);
  mem.alloc(3 * bytes_of(z));

  {
    PhaseScope t{r, "s"};
    big_herk(cfg, 1.0, p.A, 0.0, r.S, r);
    kernels::diag_scale(stacked_scales(p), p.B, x, &r.ledger);
    big_herk(cfg, 1.0, x, 1.0, r.S, r);
  }
  {
    PhaseScope t{r, "z_loop"};
    for (std::size_t a = 0; a < na; ++a) {
      compute_z(p, a, a_slice, b_slice, z, r.ledger, cfg.kernel);
      stack_block_into(x, a, z);
    }
  }
  {
    PhaseScope t{r, "her2k"};
    big_her2k(cfg, cplx(1.0), x, p.B, 0.0, r.H, r);
  }
  {
    PhaseScope t{r, "hemm_loop"};
    for (std::size_t a = 0; a < na; ++a) {
      load_block(a_slice, p.A, a);
      kernels::hemm(kernels::Side::Left, cplx(1.0), p.T_AA[a], a_slice,
                    cplx(0.0), z, &r.ledger, cfg.kernel);
      stack_block_into(x, a, z);
    }
  }
  {
    PhaseScope t{r, "herkx"};
    big_herkx(cfg, cplx(1.0), p.A, x, 1.0, r.H, r);
  }

  r.peak_temp_bytes = mem.peak();
  return r;
}

HSResult build_hs(const ProblemInstance& p, const PipelineConfig& cfg) {
  return cfg.variant == Variant::Original ? build_hs_original(p, cfg)
                                          : build_hs_refined(p, cfg);
}

FlopLedger flop_model(const ProblemInstance& p, Variant variant) {
  const std::uint64_t na = p.n_atoms, nl = p.n_l, ng = p.n_g;
  std::uint64_t n_hpd = 0;
  for (bool f : p.hpd_flags) n_hpd += f ? 1 : 0;
  const std::uint64_t n_fail = na - n_hpd;

  FlopLedger m;
  // shared: Z loop (gemm + hemm per atom), her2k, S (two herk + scaling)
  m.add("gemm", 8 * na * nl * nl * ng);
  m.add("hemm", 8 * na * nl * nl * ng);
  m.add("her2k", 8 * na * nl * ng * ng);
  m.add("herk", 8 * na * nl * ng * ng);
  m.add("scaling", 2 * na * nl * ng);
  if (variant == Variant::Original) {
    m.add("potrf", na * (4 * nl * nl * nl / 3));
    if (n_hpd > 0) {
      m.add("trmm", 4 * n_hpd * nl * nl * ng);
      m.add("herk", 4 * n_hpd * nl * ng * ng);
    }
    if (n_fail > 0) {
      m.add("hemm", 8 * n_fail * nl * nl * ng);
      m.add("gemm", 8 * n_fail * nl * ng * ng);
    }
  } else {
    m.add("hemm", 8 * na * nl * nl * ng);
    m.add("herkx", 4 * na * nl * ng * ng);
  }
  return m;
}

}  // namespace hsdla::pipeline
