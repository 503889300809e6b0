#include <arm_neon.h>

#include "kernels_internal.hpp"

namespace stargraph::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void squared_distances_neon(double px, double py, double pz, const double* xs,
                            const double* ys, const double* zs, double* out,
                            std::size_t n) {
  const float64x2_t vx = vdupq_n_f64(px);
  const float64x2_t vy = vdupq_n_f64(py);
  const float64x2_t vz = vdupq_n_f64(pz);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t dx = vsubq_f64(vld1q_f64(xs + j), vx);
    const float64x2_t dy = vsubq_f64(vld1q_f64(ys + j), vy);
    const float64x2_t dz = vsubq_f64(vld1q_f64(zs + j), vz);
    const float64x2_t xy = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
    vst1q_f64(out + j, vaddq_f64(xy, vmulq_f64(dz, dz)));
  }
  for (; j < n; ++j) {
    const double dx = xs[j] - px;
    const double dy = ys[j] - py;
    const double dz = zs[j] - pz;
    out[j] = (dx * dx + dy * dy) + dz * dz;
  }
}

}  // namespace

const KernelTable kNeonTable{Isa::Neon, dot_neon, axpy_neon, squared_distances_neon};

}  // namespace stargraph::kernels::detail
