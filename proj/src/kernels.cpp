#include "mlsnn/kernels.hpp"

#include <atomic>

#if defined(MLSNN_HAVE_OPENMP)
#include <omp.h>
#endif

namespace mlsnn::kernels {

namespace {
std::atomic<Backend> g_backend{
#if defined(MLSNN_HAVE_OPENMP)
    Backend::parallel
#else
    Backend::serial
#endif
};
}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

bool parallel_available() {
#if defined(MLSNN_HAVE_OPENMP)
  return true;
#else
  return false;
#endif
}

int parallel_threads() {
#if defined(MLSNN_HAVE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define MLSNN_DISPATCH(fn, ...)                  \
  do {                                           \
    if (backend() == Backend::parallel)          \
      detail::omp::fn(__VA_ARGS__);              \
    else                                         \
      detail::serial::fn(__VA_ARGS__);           \
  } while (0)

void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const Conv2dDims& d) {
  MLSNN_DISPATCH(conv2d_forward, x, w, bias, y, d);
}

void conv2d_backward_input(const float* gy, const float* w, float* gx, const Conv2dDims& d) {
  MLSNN_DISPATCH(conv2d_backward_input, gy, w, gx, d);
}

void conv2d_backward_weight(const float* x, const float* gy, float* gw, const Conv2dDims& d) {
  MLSNN_DISPATCH(conv2d_backward_weight, x, gy, gw, d);
}

void conv2d_backward_bias(const float* gy, float* gb, const Conv2dDims& d) {
  MLSNN_DISPATCH(conv2d_backward_bias, gy, gb, d);
}

void linear_forward(const float* x, const float* w, const float* bias, float* y, size_t batch,
                    size_t f_in, size_t f_out) {
  MLSNN_DISPATCH(linear_forward, x, w, bias, y, batch, f_in, f_out);
}

void linear_backward_input(const float* gy, const float* w, float* gx, size_t batch, size_t f_in,
                           size_t f_out) {
  MLSNN_DISPATCH(linear_backward_input, gy, w, gx, batch, f_in, f_out);
}

void linear_backward_weight(const float* x, const float* gy, float* gw, size_t batch, size_t f_in,
                            size_t f_out) {
  MLSNN_DISPATCH(linear_backward_weight, x, gy, gw, batch, f_in, f_out);
}

void linear_backward_bias(const float* gy, float* gb, size_t batch, size_t f_out) {
  MLSNN_DISPATCH(linear_backward_bias, gy, gb, batch, f_out);
}

void avgpool2d_forward(const float* x, float* y, size_t planes, size_t h_in, size_t w_in,
                       size_t kernel, size_t stride) {
  MLSNN_DISPATCH(avgpool2d_forward, x, y, planes, h_in, w_in, kernel, stride);
}

void avgpool2d_backward(const float* gy, float* gx, size_t planes, size_t h_in, size_t w_in,
                        size_t kernel, size_t stride) {
  MLSNN_DISPATCH(avgpool2d_backward, gy, gx, planes, h_in, w_in, kernel, stride);
}

void ml_neuron_step(float* v, const float* input, float* z, size_t n, int levels, float v_th,
                    bool event_sum) {
  MLSNN_DISPATCH(ml_neuron_step, v, input, z, n, levels, v_th, event_sum);
}

#undef MLSNN_DISPATCH

}  // namespace mlsnn::kernels
