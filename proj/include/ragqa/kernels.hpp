#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace ragqa::kernels {

// One table per instruction set. Every variant accumulates in four lanes
// (i mod 4) and reduces as (l0 + l2) + (l1 + l3) before the scalar tail, so
// all tables return bit-identical results.
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // out[r] = dot(rows + r * dim, query) for r in [0, n_rows)
  void (*dot_rows)(const double* rows, std::size_t n_rows, std::size_t dim, const double* query, double* out);
  void (*add_into)(double* acc, const double* x, std::size_t n);
  void (*scale)(double* x, double factor, std::size_t n);
};

const KernelTable& scalar();

// Tables compiled in and supported by the running CPU, scalar first.
std::span<const KernelTable* const> available();

// Best available table, or the one named by RAGQA_KERNELS when set.
const KernelTable& active();

const KernelTable* find(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace ragqa::kernels
