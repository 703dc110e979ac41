// Internal: per-implementation table accessors for the dispatcher and the
// equivalence tests.
#pragma once

#include "adnet/kernels.hpp"

namespace adnet::kernels {

const KernelTable& scalar_table();
#ifdef ADNET_HAVE_AVX2
const KernelTable& avx2_table();
#endif

} // namespace adnet::kernels
