#pragma once

#include "uod/simd/kernels.hpp"

namespace uod::simd::detail {

const KernelTable& scalar_table() noexcept;
#if UOD_HAVE_AVX2
const KernelTable& avx2_table() noexcept;
#endif
#if UOD_HAVE_NEON
const KernelTable& neon_table() noexcept;
#endif

}  // namespace uod::simd::detail
