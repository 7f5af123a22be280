#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hsdla/kernels.hpp"
#include "hsdla/problem.hpp"

using namespace hsdla;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const char* name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("problem file round trip is exact") {
  const ProblemInstance p = generate_problem(3, 4, 10, 123, 1);
  TempFile f("hsdla_roundtrip.hsdl");
  save_problem(p, f.path);
  const ProblemInstance q = load_problem(f.path);

  CHECK(q.n_atoms == p.n_atoms);
  CHECK(q.n_l == p.n_l);
  CHECK(q.n_g == p.n_g);
  CHECK(q.hpd_flags == p.hpd_flags);
  for (std::size_t i = 0; i < p.A.size(); ++i) {
    CHECK(q.A.data()[i] == p.A.data()[i]);
    CHECK(q.B.data()[i] == p.B.data()[i]);
  }
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    CHECK(q.U[a] == p.U[a]);
    for (std::size_t i = 0; i < p.T_AB[a].size(); ++i) {
      CHECK(q.T_AB[a].data()[i] == p.T_AB[a].data()[i]);
      CHECK(q.T_AA[a].matrix().data()[i] == p.T_AA[a].matrix().data()[i]);
      CHECK(q.T_BB[a].matrix().data()[i] == p.T_BB[a].matrix().data()[i]);
    }
  }
}

TEST_CASE("malformed files are rejected") {
  TempFile f("hsdla_malformed.hsdl");
  {
    std::ofstream out(f.path, std::ios::binary);
    out << "NOPE" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(load_problem(f.path), IoError);

  // truncation: valid header, missing payload
  const ProblemInstance p = generate_problem(2, 3, 8, 1, 0);
  save_problem(p, f.path);
  const auto full = std::filesystem::file_size(f.path);
  std::filesystem::resize_file(f.path, full / 2);
  CHECK_THROWS_AS(load_problem(f.path), IoError);

  CHECK_THROWS_AS(load_problem("/nonexistent/nowhere.hsdl"), IoError);
}

TEST_CASE("generator honors the requested hpd split") {
  const ProblemInstance p = generate_problem(5, 6, 12, 7, 2);
  std::size_t hpd = 0;
  for (std::size_t a = 0; a < p.n_atoms; ++a) {
    const bool ok = kernels::potrf(p.T_AA[a]).ok();
    CHECK(ok == p.hpd_flags[a]);
    hpd += ok ? 1 : 0;
  }
  CHECK(hpd == 3);
  // determinism: same seed, same bits
  const ProblemInstance q = generate_problem(5, 6, 12, 7, 2);
  for (std::size_t i = 0; i < p.A.size(); ++i) CHECK(q.A.data()[i] == p.A.data()[i]);
  // different seed, different data
  const ProblemInstance r = generate_problem(5, 6, 12, 8, 2);
  CHECK(r.A.data()[0] != p.A.data()[0]);
}

TEST_CASE("U entries live in (0.5, 1.5)") {
  const ProblemInstance p = generate_problem(3, 8, 4, 9, 0);
  for (const auto& u : p.U) {
    for (double v : u) {
      CHECK(v > 0.5);
      CHECK(v < 1.5);
    }
  }
}

TEST_CASE("preset table and scaling") {
  const auto a40 = find_preset("auag-4.0");
  REQUIRE(a40.has_value());
  CHECK(a40->n_atoms == 108);
  CHECK(a40->n_l == 121);
  CHECK(a40->n_g == 13379);

  const auto small = find_preset("auag-4.0", 0.01);  // ceil of scaled dims
  REQUIRE(small.has_value());
  CHECK(small->n_atoms == 2);
  CHECK(small->n_l == 2);
  CHECK(small->n_g == 134);

  const auto nacl = find_preset("nacl-2.5");
  REQUIRE(nacl.has_value());
  CHECK(nacl->n_atoms == 512);
  CHECK(nacl->n_l == 49);
  CHECK(nacl->n_g == 2256);

  CHECK_FALSE(find_preset("unobtainium-9.9").has_value());
  CHECK(presets().size() >= 6);
}
