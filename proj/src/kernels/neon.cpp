#include "kernels_impl.hpp"

#include <arm_neon.h>

namespace ragqa::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  const float64x2_t pair = vaddq_f64(acc01, acc23);
  double sum = vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot_rows_neon(const double* rows, std::size_t n_rows, std::size_t dim, const double* query, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_neon(rows + r * dim, query, dim);
}

void add_into_neon(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vld1q_f64(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

void scale_neon(double* x, double factor, std::size_t n) {
  const float64x2_t f = vdupq_n_f64(factor);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), f));
  for (; i < n; ++i) x[i] *= factor;
}

}  // namespace

const KernelTable kNeonTable{"neon", dot_neon, dot_rows_neon, add_into_neon, scale_neon};

}  // namespace ragqa::kernels::detail
