#include <doctest.h>

#include <cmath>

#include "hsdla/oracle.hpp"
#include "hsdla/pipeline.hpp"
#include "naive_ref.hpp"

using namespace hsdla;
using namespace hsdla::pipeline;
using hsdla::device::DevicePool;
using hsdla::device::parse_device_spec;

namespace {

PipelineConfig cpu_config(Variant v) {
  PipelineConfig cfg;
  cfg.variant = v;
  cfg.strategy = Strategy::Cpu;
  cfg.kernel = {kernels::Variant::Reference, 128, 1};
  return cfg;
}

double rel_lower(const HermitianView& x, const HermitianView& y) {
  return rel_frobenius_error_lower(x.matrix(), y.matrix());
}

}  // namespace

TEST_CASE("original equals refined across seeds and hpd mixes") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t na = 4, nl = 5, ng = 32;
    const std::size_t not_hpd = seed % (na + 1);  // 0..4 non-HPD atoms
    const ProblemInstance p = generate_problem(na, nl, ng, seed, not_hpd);
    const HSResult o = build_hs_original(p, cpu_config(Variant::Original));
    const HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
    CHECK(rel_lower(o.H, r.H) < 1e-11);
    CHECK(rel_lower(o.S, r.S) < 1e-11);
  }
}

TEST_CASE("refined matches the oracle at several desk scales") {
  const std::size_t dims[3][3] = {{2, 3, 16}, {4, 7, 64}, {8, 5, 128}};
  for (const auto& d : dims) {
    const std::size_t na = d[0], nl = d[1], ng = d[2];
    const ProblemInstance p = generate_problem(na, nl, ng, 99, na / 2);
    const HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
    const double tol = 1e-10 * std::sqrt(double(ng));
    CHECK(rel_lower(r.H, oracle::direct_H(p)) < tol);
    CHECK(rel_lower(r.S, oracle::direct_S(p)) < tol);
  }
}

TEST_CASE("strategy equivalence for both variants") {
  const ProblemInstance p = generate_problem(3, 4, 48, 11, 1);
  for (Variant v : {Variant::Original, Variant::Refined}) {
    const HSResult base = build_hs(p, cpu_config(v));
    for (Strategy s : {Strategy::Static, Strategy::Dynamic}) {
      DevicePool pool({parse_device_spec("sim:rate=2"),
                       parse_device_spec("sim:rate=1.5,queue=1")});
      pool.set_calibrated_cpu_rate(1e9);
      PipelineConfig cfg = cpu_config(v);
      cfg.strategy = s;
      cfg.pool = &pool;
      cfg.split_ratio = 3.5;
      cfg.block_override = 16;
      const HSResult got = build_hs(p, cfg);
      CHECK(rel_lower(got.H, base.H) < 1e-11);
      CHECK(rel_lower(got.S, base.S) < 1e-11);
      CHECK(got.ledger == base.ledger);  // strategy-invariant accounting
    }
  }
}

TEST_CASE("flop model at unit dims totals 46") {
  const ProblemInstance p = generate_problem(1, 1, 1, 1, 0);
  const FlopLedger m = flop_model(p, Variant::Refined);
  CHECK(m.total() == 46);
  CHECK(m.count("gemm") == 8);
  CHECK(m.count("hemm") == 16);
  CHECK(m.count("her2k") == 8);
  CHECK(m.count("herk") == 8);
  CHECK(m.count("scaling") == 2);
  CHECK(m.count("herkx") == 4);
}

TEST_CASE("flop model her2k phase for the NaCl K_max=2.5 sizes") {
  ProblemInstance dims;  // only the sizes matter for the model
  dims.n_atoms = 512;
  dims.n_l = 49;
  dims.n_g = 2256;
  dims.hpd_flags.assign(512, true);
  const FlopLedger m = flop_model(dims, Variant::Refined);
  CHECK(m.count("her2k") == 1021490233344ull);  // 8 * 512 * 49 * 2256^2
}

TEST_CASE("measured ledger equals the model exactly, both variants") {
  for (std::size_t not_hpd : {std::size_t(0), std::size_t(2), std::size_t(4)}) {
    const ProblemInstance p = generate_problem(4, 6, 40, 21, not_hpd);
    const HSResult o = build_hs_original(p, cpu_config(Variant::Original));
    const HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
    CHECK(o.ledger == flop_model(p, Variant::Original));
    CHECK(r.ledger == flop_model(p, Variant::Refined));

    // closed-form difference, including the redundant-upper-triangle removal
    const std::uint64_t na = 4, nl = 6, ng = 40;
    const std::uint64_t n_hpd = na - not_hpd;
    const std::int64_t delta =
        std::int64_t(4 * not_hpd * nl * ng * ng + na * (4 * nl * nl * nl / 3)) -
        std::int64_t(4 * n_hpd * nl * nl * ng);
    CHECK(std::int64_t(o.ledger.total()) - std::int64_t(r.ledger.total()) == delta);
  }
}

TEST_CASE("memory claim: refined uses at most half plus slack") {
  const std::size_t na = 8, nl = 16, ng = 256;
  const ProblemInstance p = generate_problem(na, nl, ng, 31, na / 2);
  const HSResult o = build_hs_original(p, cpu_config(Variant::Original));
  const HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
  CHECK(o.peak_temp_bytes >= 2 * 16 * na * nl * ng);  // both backup buffers
  CHECK(r.peak_temp_bytes <= o.peak_temp_bytes / 2 + 32 * nl * ng);
  // the refined temp is the single stacking buffer plus per-atom scratch
  CHECK(r.peak_temp_bytes < 16 * na * nl * ng + 4 * 16 * nl * ng);
}

TEST_CASE("all-HPD and no-HPD edge cases still match the oracle") {
  for (std::size_t not_hpd : {std::size_t(0), std::size_t(3)}) {
    const ProblemInstance p = generate_problem(3, 4, 24, 41, not_hpd);
    const HSResult o = build_hs_original(p, cpu_config(Variant::Original));
    const double tol = 1e-10 * std::sqrt(24.0);
    CHECK(rel_lower(o.H, oracle::direct_H(p)) < tol);
    CHECK(rel_lower(o.S, oracle::direct_S(p)) < tol);
  }
}

TEST_CASE("pipelines never touch the upper triangles of H and S") {
  const ProblemInstance p = generate_problem(3, 4, 20, 51, 1);
  for (Variant v : {Variant::Original, Variant::Refined}) {
    const HSResult res = build_hs(p, cpu_config(v));
    for (std::size_t j = 1; j < p.n_g; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        CHECK(res.H(i, j) == cplx(0.0));  // still the freshly-zeroed value
        CHECK(res.S(i, j) == cplx(0.0));
      }
    }
  }
}

TEST_CASE("H and S are Hermitian after mirror; S is positive semidefinite") {
  const ProblemInstance p = generate_problem(4, 5, 32, 61, 2);
  HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
  r.H.mirror();
  r.S.mirror();
  for (std::size_t j = 0; j < p.n_g; ++j) {
    for (std::size_t i = 0; i < p.n_g; ++i) {
      CHECK(std::abs(r.H(i, j) - std::conj(r.H(j, i))) == 0.0);
    }
  }
  // S + eps I is HPD for a tiny eps relative to ||S||
  const double shift = 1e-8 * frobenius_norm(r.S.matrix());
  HermitianView s(p.n_g);
  s.matrix() = r.S.matrix();
  for (std::size_t i = 0; i < p.n_g; ++i) s(i, i) += shift;
  CHECK(kernels::potrf(s).ok());
}

TEST_CASE("phase wall times are reported for every phase") {
  const ProblemInstance p = generate_problem(2, 3, 16, 71, 1);
  const HSResult r = build_hs_refined(p, cpu_config(Variant::Refined));
  REQUIRE(r.phases.size() == 5);
  CHECK(r.phases[0].name == "s");
  CHECK(r.phases[4].name == "herkx");
  const HSResult o = build_hs_original(p, cpu_config(Variant::Original));
  REQUIRE(o.phases.size() == 5);
  CHECK(o.phases[3].name == "chol_loop");
}

TEST_CASE("config validation") {
  const ProblemInstance p = generate_problem(1, 2, 4, 81, 0);
  PipelineConfig cfg = cpu_config(Variant::Refined);
  cfg.strategy = Strategy::Dynamic;  // no pool
  CHECK_THROWS_AS(build_hs(p, cfg), ConfigError);
}
