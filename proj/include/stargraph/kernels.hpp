#pragma once

// Inner-loop kernels with a portable scalar reference and SIMD variants.
// The active table is chosen once at startup from the CPU's capabilities and
// can be pinned with STARGRAPH_ISA=scalar|avx2|neon or select().

#include <cstddef>
#include <span>
#include <string_view>

namespace stargraph::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[j] = |p - (xs[j], ys[j], zs[j])|^2, evaluated as (dx*dx + dy*dy) + dz*dz
  /// so every variant is bit-identical to the scalar reference.
  void (*squared_distances)(double px, double py, double pz, const double* xs,
                            const double* ys, const double* zs, double* out,
                            std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa) noexcept;

const KernelTable& active() noexcept;

/// Pins the active table. Returns false (and leaves the selection alone)
/// when the requested ISA is unavailable.
bool select(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace stargraph::kernels
