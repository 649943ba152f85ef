#include <cstdlib>
#include <string>
#include <vector>

#include "kernels_impl.hpp"

namespace ragqa::kernels {
namespace {

std::vector<const KernelTable*> detect() {
  std::vector<const KernelTable*> tables{&detail::kScalarTable};
#if defined(RAGQA_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) tables.push_back(&detail::kAvx2Table);
#endif
#if defined(RAGQA_HAVE_NEON)
  tables.push_back(&detail::kNeonTable);
#endif
  return tables;
}

const std::vector<const KernelTable*>& tables() {
  static const std::vector<const KernelTable*> t = detect();
  return t;
}

const KernelTable& select() {
  if (const char* forced = std::getenv("RAGQA_KERNELS"); forced != nullptr && *forced != '\0') {
    if (const auto* t = find(forced)) return *t;
  }
  return *tables().back();
}

}  // namespace

const KernelTable& scalar() { return detail::kScalarTable; }

std::span<const KernelTable* const> available() { return tables(); }

const KernelTable* find(std::string_view name) {
  for (const auto* t : tables()) {
    if (t->name == name) return t;
  }
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace ragqa::kernels
