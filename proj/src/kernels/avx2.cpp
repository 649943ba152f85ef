#include "kernels_impl.hpp"

#include <immintrin.h>

namespace ragqa::kernels::detail {
namespace {

inline double reduce(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);  // (l0 + l2, l1 + l3)
  return _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double sum = reduce(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot_rows_avx2(const double* rows, std::size_t n_rows, std::size_t dim, const double* query, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_avx2(rows + r * dim, query, dim);
}

void add_into_avx2(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) acc[i] += x[i];
}

void scale_avx2(double* x, double factor, std::size_t n) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), f));
  for (; i < n; ++i) x[i] *= factor;
}

}  // namespace

const KernelTable kAvx2Table{"avx2", dot_avx2, dot_rows_avx2, add_into_avx2, scale_avx2};

}  // namespace ragqa::kernels::detail
