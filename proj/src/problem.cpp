#include "hsdla/problem.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace hsdla {

namespace {

// mt19937_64 has a standard-specified output sequence; the mapping to doubles
// below is our own, so generation is bit-reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  cplx symmetric_cplx() { return {uniform(-1.0, 1.0), uniform(-1.0, 1.0)}; }

 private:
  std::mt19937_64 eng_;
};

void fill_random(ComplexMatrix& m, Rng& rng) {
  // Column-major fill order is part of the reproducibility contract.
  cplx* p = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = rng.symmetric_cplx();
}

// G = M^H M, full matrix (small n_l x n_l operands only).
ComplexMatrix gram(const ComplexMatrix& m) {
  const std::size_t n = m.cols();
  ComplexMatrix g(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < m.rows(); ++k) {
        s += std::conj(m(k, i)) * m(k, j);
      }
      g(i, j) = s;
    }
  }
  return g;
}

// Power-iteration estimate of the largest eigenvalue of Hermitian PSD g.
double lambda_max_estimate(const ComplexMatrix& g) {
  const std::size_t n = g.rows();
  std::vector<cplx> v(n, cplx(1.0, 0.0)), w(n);
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g(i, j) * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += std::norm(w[i]);
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  return lambda;
}

std::size_t checked_total(std::size_t n_atoms, std::size_t n_l, std::size_t n_g) {
  const std::size_t max = std::numeric_limits<std::size_t>::max() / sizeof(cplx) / 4;
  if (n_l != 0 && n_atoms > max / n_l) throw SizingError("n_atoms * n_l overflows");
  const std::size_t rows = n_atoms * n_l;
  if (n_g != 0 && rows > max / n_g) throw SizingError("problem allocation overflows");
  return rows * n_g;
}

}  // namespace

ProblemInstance generate_problem(std::size_t n_atoms, std::size_t n_l,
                                 std::size_t n_g, std::uint64_t seed,
                                 std::size_t n_not_hpd) {
  if (n_atoms < 1 || n_l < 1 || n_g < 1) {
    throw DimensionError("generate_problem: all dims must be >= 1");
  }
  if (n_not_hpd > n_atoms) {
    throw DimensionError("generate_problem: n_not_hpd > n_atoms");
  }
  checked_total(n_atoms, n_l, n_g);

  Rng rng(seed);
  ProblemInstance p;
  p.n_atoms = n_atoms;
  p.n_l = n_l;
  p.n_g = n_g;
  p.A = ComplexMatrix(n_atoms * n_l, n_g);
  p.B = ComplexMatrix(n_atoms * n_l, n_g);
  fill_random(p.A, rng);
  fill_random(p.B, rng);

  const std::size_t n_hpd = n_atoms - n_not_hpd;
  p.T_AA.reserve(n_atoms);
  p.T_AB.reserve(n_atoms);
  p.T_BB.reserve(n_atoms);
  p.U.reserve(n_atoms);
  p.hpd_flags.resize(n_atoms);

  for (std::size_t a = 0; a < n_atoms; ++a) {
    ComplexMatrix m(n_l, n_l);
    fill_random(m, rng);
    ComplexMatrix g = gram(m);
    const bool hpd = a < n_hpd;
    p.hpd_flags[a] = hpd;
    if (hpd) {
      for (std::size_t i = 0; i < n_l; ++i) g(i, i) += 1.0;
    } else {
      // Shift past lambda_max so every eigenvalue (and the first Cholesky
      // pivot) is strictly negative.
      const double s = 1.05 * lambda_max_estimate(g) + 1.0;
      for (std::size_t i = 0; i < n_l; ++i) g(i, i) -= s;
    }
    p.T_AA.emplace_back(std::move(g));

    ComplexMatrix tab(n_l, n_l);
    fill_random(tab, rng);
    p.T_AB.push_back(std::move(tab));

    ComplexMatrix r(n_l, n_l);
    fill_random(r, rng);
    ComplexMatrix tbb(n_l, n_l);
    for (std::size_t j = 0; j < n_l; ++j) {
      for (std::size_t i = 0; i < n_l; ++i) {
        tbb(i, j) = 0.5 * (r(i, j) + std::conj(r(j, i)));
      }
    }
    p.T_BB.emplace_back(std::move(tbb));

    std::vector<double> u(n_l);
    for (double& x : u) x = rng.uniform(0.5, 1.5);
    p.U.push_back(std::move(u));
  }
  return p;
}

// --------------------------- Binary file format ----------------------------

namespace {

constexpr char kMagic[4] = {'H', 'S', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_raw(std::ofstream& os, const void* p, std::size_t bytes) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& is, void* p, std::size_t bytes) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("problem file truncated");
}

void write_matrix(std::ofstream& os, const ComplexMatrix& m) {
  // (real, imag) interleave in column-major order; std::complex<double>
  // guarantees exactly that layout.
  write_raw(os, m.data(), m.size() * sizeof(cplx));
}

void read_matrix(std::ifstream& is, ComplexMatrix& m) {
  read_raw(is, m.data(), m.size() * sizeof(cplx));
}

}  // namespace

void save_problem(const ProblemInstance& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_raw(os, kMagic, 4);
  write_raw(os, &kVersion, 4);
  const std::uint64_t dims[3] = {p.n_atoms, p.n_l, p.n_g};
  write_raw(os, dims, sizeof(dims));
  std::vector<std::uint8_t> flags((p.n_atoms + 7) / 8, 0);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    if (p.hpd_flags[a]) flags[a / 8] |= static_cast<std::uint8_t>(1u << (a % 8));
  }
  write_raw(os, flags.data(), flags.size());
  write_matrix(os, p.A);
  write_matrix(os, p.B);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    write_matrix(os, p.T_AA[a].matrix());
    write_matrix(os, p.T_AB[a]);
    write_matrix(os, p.T_BB[a].matrix());
  }
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    write_raw(os, p.U[a].data(), p.n_l * sizeof(double));
  }
  if (!os) throw IoError("write failed: " + path);
}

ProblemInstance load_problem(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  read_raw(is, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad magic: " + path);
  std::uint32_t version = 0;
  read_raw(is, &version, 4);
  if (version != kVersion) {
    throw IoError("unsupported format version " + std::to_string(version));
  }
  std::uint64_t dims[3];
  read_raw(is, dims, sizeof(dims));

  ProblemInstance p;
  p.n_atoms = dims[0];
  p.n_l = dims[1];
  p.n_g = dims[2];
  checked_total(p.n_atoms, p.n_l, p.n_g);

  std::vector<std::uint8_t> flags((p.n_atoms + 7) / 8);
  read_raw(is, flags.data(), flags.size());
  p.hpd_flags.resize(p.n_atoms);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    p.hpd_flags[a] = (flags[a / 8] >> (a % 8)) & 1u;
  }

  p.A = ComplexMatrix(p.n_atoms * p.n_l, p.n_g);
  p.B = ComplexMatrix(p.n_atoms * p.n_l, p.n_g);
  read_matrix(is, p.A);
  read_matrix(is, p.B);
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    ComplexMatrix taa(p.n_l, p.n_l), tab(p.n_l, p.n_l), tbb(p.n_l, p.n_l);
    read_matrix(is, taa);
    read_matrix(is, tab);
    read_matrix(is, tbb);
    p.T_AA.emplace_back(std::move(taa));
    p.T_AB.push_back(std::move(tab));
    p.T_BB.emplace_back(std::move(tbb));
  }
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    std::vector<double> u(p.n_l);
    read_raw(is, u.data(), p.n_l * sizeof(double));
    p.U.push_back(std::move(u));
  }
  return p;
}

// -------------------------------- Presets ----------------------------------

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"nacl-2.5", 512, 49, 2256},   {"nacl-3.0", 512, 49, 3893},
      {"nacl-3.5", 512, 49, 6217},   {"nacl-4.0", 512, 49, 9273},
      {"auag-2.5", 108, 121, 3275},  {"auag-3.0", 108, 121, 5638},
      {"auag-3.5", 108, 121, 8970},  {"auag-4.0", 108, 121, 13379},
      {"tio2-2.5", 384, 81, 7094},   {"tio2-3.0", 384, 81, 12293},
      {"tio2-3.5", 384, 81, 19553},  {"tio2-4.0", 384, 81, 29144},
  };
  return table;
}

std::optional<Preset> find_preset(const std::string& name, double scale) {
  for (const Preset& p : presets()) {
    if (p.name == name) {
      auto sc = [scale](std::size_t d) {
        return static_cast<std::size_t>(
            std::ceil(static_cast<double>(d) * scale));
      };
      return Preset{p.name, sc(p.n_atoms), sc(p.n_l), sc(p.n_g)};
    }
  }
  return std::nullopt;
}

}  // namespace hsdla
