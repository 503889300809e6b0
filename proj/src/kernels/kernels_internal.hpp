#pragma once

#include "stargraph/kernels.hpp"

namespace stargraph::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(STARGRAPH_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(STARGRAPH_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace stargraph::kernels::detail
