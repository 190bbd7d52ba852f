#include "mlsnn/kernels.hpp"

#define MLSNN_PARALLEL_FOR

namespace mlsnn::kernels::detail::serial {
#include "kernels_body.inl"
}  // namespace mlsnn::kernels::detail::serial
