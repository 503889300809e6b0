#include "kernels_internal.hpp"

namespace stargraph::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void squared_distances_scalar(double px, double py, double pz, const double* xs,
                              const double* ys, const double* zs, double* out,
                              std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = xs[j] - px;
    const double dy = ys[j] - py;
    const double dz = zs[j] - pz;
    out[j] = (dx * dx + dy * dy) + dz * dz;
  }
}

}  // namespace

const KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar,
                               squared_distances_scalar};

}  // namespace stargraph::kernels::detail
