#pragma once

#include "feddiv/kernels/kernels.hpp"

namespace feddiv::kernels::detail {

const KernelTable<double>& scalar_table_f64();
const KernelTable<float>& scalar_table_f32();

#if defined(FEDDIV_HAVE_AVX2)
const KernelTable<double>& avx2_table_f64();
const KernelTable<float>& avx2_table_f32();
#endif

#if defined(FEDDIV_HAVE_NEON)
const KernelTable<double>& neon_table_f64();
const KernelTable<float>& neon_table_f32();
#endif

}  // namespace feddiv::kernels::detail
