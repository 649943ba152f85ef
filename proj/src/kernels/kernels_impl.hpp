#pragma once

#include "ragqa/kernels.hpp"

namespace ragqa::kernels::detail {

extern const KernelTable kScalarTable;

#if defined(RAGQA_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

#if defined(RAGQA_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace ragqa::kernels::detail
