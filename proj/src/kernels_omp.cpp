#include "mlsnn/kernels.hpp"

#if defined(MLSNN_HAVE_OPENMP)
#define MLSNN_PARALLEL_FOR _Pragma("omp parallel for schedule(static)")
#else
// Built without OpenMP: the "parallel" backend degrades to the reference body.
#define MLSNN_PARALLEL_FOR
#endif

namespace mlsnn::kernels::detail::omp {
#include "kernels_body.inl"
}  // namespace mlsnn::kernels::detail::omp
