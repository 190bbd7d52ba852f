#pragma once

#include <cstddef>

namespace mlsnn::kernels {

// Two interchangeable backends: a serial reference and an OpenMP version that
// parallelizes only over disjoint output elements while keeping each
// element's accumulation order identical to the reference. Outputs are
// bit-identical between backends regardless of thread count.
enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
bool parallel_available();
int parallel_threads();

struct Conv2dDims {
  size_t batch = 0, c_in = 0, h_in = 0, w_in = 0;
  size_t c_out = 0, kernel = 1, stride = 1, pad = 0;
  size_t h_out() const { return (h_in + 2 * pad - kernel) / stride + 1; }
  size_t w_out() const { return (w_in + 2 * pad - kernel) / stride + 1; }
};

// y[b,co,oh,ow] = bias[co] + sum_{ci,kh,kw} x[b,ci,oh*s-p+kh,ow*s-p+kw] * w[co,ci,kh,kw]
// bias may be null. Backward kernels accumulate (+=) into their output buffer.
void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const float* gy, const float* w, float* gx, const Conv2dDims& d);
void conv2d_backward_weight(const float* x, const float* gy, float* gw, const Conv2dDims& d);
void conv2d_backward_bias(const float* gy, float* gb, const Conv2dDims& d);

// y[b,j] = bias[j] + sum_i x[b,i] * w[i,j]   (weights stored [f_in, f_out])
void linear_forward(const float* x, const float* w, const float* bias, float* y, size_t batch,
                    size_t f_in, size_t f_out);
void linear_backward_input(const float* gy, const float* w, float* gx, size_t batch, size_t f_in,
                           size_t f_out);
void linear_backward_weight(const float* x, const float* gy, float* gw, size_t batch, size_t f_in,
                            size_t f_out);
void linear_backward_bias(const float* gy, float* gb, size_t batch, size_t f_out);

// Non-overlapping or strided average pooling over [planes, h, w].
void avgpool2d_forward(const float* x, float* y, size_t planes, size_t h_in, size_t w_in,
                       size_t kernel, size_t stride);
void avgpool2d_backward(const float* gy, float* gx, size_t planes, size_t h_in, size_t w_in,
                        size_t kernel, size_t stride);

// One multi-level integrate-and-fire timestep over a flat array of neurons:
// charge once (v += levels*input in current mode, v += input in event_sum
// mode), then run `levels` discharge micro-steps, each emitting a unit spike
// and subtracting v_th while v >= v_th. z[i] ends in [0, levels].
void ml_neuron_step(float* v, const float* input, float* z, size_t n, int levels, float v_th,
                    bool event_sum);

namespace detail {
namespace serial {
void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const float* gy, const float* w, float* gx, const Conv2dDims& d);
void conv2d_backward_weight(const float* x, const float* gy, float* gw, const Conv2dDims& d);
void conv2d_backward_bias(const float* gy, float* gb, const Conv2dDims& d);
void linear_forward(const float* x, const float* w, const float* bias, float* y, size_t batch,
                    size_t f_in, size_t f_out);
void linear_backward_input(const float* gy, const float* w, float* gx, size_t batch, size_t f_in,
                           size_t f_out);
void linear_backward_weight(const float* x, const float* gy, float* gw, size_t batch, size_t f_in,
                            size_t f_out);
void linear_backward_bias(const float* gy, float* gb, size_t batch, size_t f_out);
void avgpool2d_forward(const float* x, float* y, size_t planes, size_t h_in, size_t w_in,
                       size_t kernel, size_t stride);
void avgpool2d_backward(const float* gy, float* gx, size_t planes, size_t h_in, size_t w_in,
                        size_t kernel, size_t stride);
void ml_neuron_step(float* v, const float* input, float* z, size_t n, int levels, float v_th,
                    bool event_sum);
}  // namespace serial
namespace omp {
void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const Conv2dDims& d);
void conv2d_backward_input(const float* gy, const float* w, float* gx, const Conv2dDims& d);
void conv2d_backward_weight(const float* x, const float* gy, float* gw, const Conv2dDims& d);
void conv2d_backward_bias(const float* gy, float* gb, const Conv2dDims& d);
void linear_forward(const float* x, const float* w, const float* bias, float* y, size_t batch,
                    size_t f_in, size_t f_out);
void linear_backward_input(const float* gy, const float* w, float* gx, size_t batch, size_t f_in,
                           size_t f_out);
void linear_backward_weight(const float* x, const float* gy, float* gw, size_t batch, size_t f_in,
                            size_t f_out);
void linear_backward_bias(const float* gy, float* gb, size_t batch, size_t f_out);
void avgpool2d_forward(const float* x, float* y, size_t planes, size_t h_in, size_t w_in,
                       size_t kernel, size_t stride);
void avgpool2d_backward(const float* gy, float* gx, size_t planes, size_t h_in, size_t w_in,
                        size_t kernel, size_t stride);
void ml_neuron_step(float* v, const float* input, float* z, size_t n, int levels, float v_th,
                    bool event_sum);
}  // namespace omp
}  // namespace detail

}  // namespace mlsnn::kernels
