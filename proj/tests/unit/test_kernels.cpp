#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "stargraph/error.hpp"
#include "stargraph/kernels.hpp"
#include "stargraph/tensor.hpp"

namespace k = stargraph::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<const k::KernelTable*> simd_tables() {
  std::vector<const k::KernelTable*> out;
  for (auto isa : {k::Isa::Avx2, k::Isa::Neon}) {
    if (const auto* t = k::table_for(isa)) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(k::table_for(k::Isa::Scalar) == &k::scalar_table());
  CHECK(k::scalar_table().isa == k::Isa::Scalar);
  MESSAGE("active kernels: " << k::to_string(k::active().isa));
}

TEST_CASE("SIMD dot and axpy agree with the scalar reference") {
  std::mt19937_64 rng(7);
  const auto& ref = k::scalar_table();
  for (const auto* simd : simd_tables()) {
    CAPTURE(k::to_string(simd->isa));
    for (std::size_t n = 0; n < 70; ++n) {
      const auto a = random_vec(n, rng);
      const auto b = random_vec(n, rng);
      const double want = ref.dot(a.data(), b.data(), n);
      const double got = simd->dot(a.data(), b.data(), n);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
      CHECK(std::abs(got - want) <= 1e-14 * (scale + 1.0));

      auto y_ref = random_vec(n, rng);
      auto y_simd = y_ref;
      ref.axpy(0.37, a.data(), y_ref.data(), n);
      simd->axpy(0.37, a.data(), y_simd.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y_ref[i] - y_simd[i]) <= 1e-15 * 8);
    }
  }
}

TEST_CASE("SIMD squared distances are bit-identical to scalar") {
  std::mt19937_64 rng(11);
  const auto& ref = k::scalar_table();
  for (const auto* simd : simd_tables()) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 131u}) {
      const auto xs = random_vec(n, rng), ys = random_vec(n, rng), zs = random_vec(n, rng);
      std::vector<double> want(n), got(n);
      ref.squared_distances(0.3, -0.1, 1.2, xs.data(), ys.data(), zs.data(), want.data(), n);
      simd->squared_distances(0.3, -0.1, 1.2, xs.data(), ys.data(), zs.data(), got.data(), n);
      CHECK(want == got);
    }
  }
}

TEST_CASE("select pins the active table") {
  const k::Isa before = k::active().isa;
  REQUIRE(k::select(k::Isa::Scalar));
  CHECK(k::active().isa == k::Isa::Scalar);
  if (k::table_for(before) != nullptr) CHECK(k::select(before));
  CHECK(k::active().isa == before);
}

TEST_CASE("matrix helpers match naive products under every kernel table") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  stargraph::Tensor2 a(5, 7), b(6, 7), c(5, 6);
  for (double& v : a.values()) v = d(rng);
  for (double& v : b.values()) v = d(rng);
  for (double& v : c.values()) v = d(rng);
  const k::Isa before = k::active().isa;
  for (auto isa : {k::Isa::Scalar, k::Isa::Avx2, k::Isa::Neon}) {
    if (!k::select(isa)) continue;
    const auto nt = stargraph::matmul_nt(a, b);
    stargraph::Tensor2 nn(5, 7), tn(6, 7);
    stargraph::matmul_nn_acc(c, b, nn);
    stargraph::matmul_tn_acc(c, a, tn);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        double s = 0;
        for (std::size_t q = 0; q < 7; ++q) s += a(i, q) * b(j, q);
        CHECK(nt(i, j) == doctest::Approx(s).epsilon(1e-13));
      }
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t q = 0; q < 7; ++q) {
        double s = 0;
        for (std::size_t j = 0; j < 6; ++j) s += c(i, j) * b(j, q);
        CHECK(nn(i, q) == doctest::Approx(s).epsilon(1e-13));
      }
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t q = 0; q < 7; ++q) {
        double s = 0;
        for (std::size_t i = 0; i < 5; ++i) s += c(i, j) * a(i, q);
        CHECK(tn(j, q) == doctest::Approx(s).epsilon(1e-13));
      }
  }
  k::select(before);
}

TEST_CASE("shape mismatches throw") {
  stargraph::Tensor2 a(2, 3), b(2, 4);
  CHECK_THROWS_AS(stargraph::matmul_nt(a, b), stargraph::ShapeError);
  CHECK_THROWS_AS(stargraph::Tensor2(2, 2, std::vector<double>(3)), stargraph::ShapeError);
}
