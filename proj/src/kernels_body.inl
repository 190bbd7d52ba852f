// Kernel loop bodies shared by the serial and OpenMP backends. This file is
// included twice (once per backend namespace) with MLSNN_PARALLEL_FOR defined
// either as nothing or as an omp-parallel-for pragma. Every loop parallelized
// by MLSNN_PARALLEL_FOR writes disjoint output elements and keeps a fixed
// serial accumulation order within each element, so the two backends produce
// bit-identical results.

void conv2d_forward(const float* x, const float* w, const float* bias, float* y,
                    const Conv2dDims& d) {
  const long long h_out = static_cast<long long>(d.h_out());
  const long long w_out = static_cast<long long>(d.w_out());
  const long long total = static_cast<long long>(d.batch) * d.c_out * h_out * w_out;
  const long long c_in = static_cast<long long>(d.c_in);
  const long long k = static_cast<long long>(d.kernel);
  const long long stride = static_cast<long long>(d.stride);
  const long long pad = static_cast<long long>(d.pad);
  const long long h_in = static_cast<long long>(d.h_in);
  const long long w_in = static_cast<long long>(d.w_in);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long ow = o % w_out;
    long long oh = (o / w_out) % h_out;
    long long co = (o / (w_out * h_out)) % static_cast<long long>(d.c_out);
    long long b = o / (w_out * h_out * static_cast<long long>(d.c_out));
    float acc = bias ? bias[co] : 0.0f;
    for (long long ci = 0; ci < c_in; ++ci) {
      for (long long kh = 0; kh < k; ++kh) {
        long long ih = oh * stride - pad + kh;
        if (ih < 0 || ih >= h_in) continue;
        for (long long kw = 0; kw < k; ++kw) {
          long long iw = ow * stride - pad + kw;
          if (iw < 0 || iw >= w_in) continue;
          acc += x[((b * c_in + ci) * h_in + ih) * w_in + iw] *
                 w[((co * c_in + ci) * k + kh) * k + kw];
        }
      }
    }
    y[o] = acc;
  }
}

void conv2d_backward_input(const float* gy, const float* w, float* gx, const Conv2dDims& d) {
  const long long h_out = static_cast<long long>(d.h_out());
  const long long w_out = static_cast<long long>(d.w_out());
  const long long c_in = static_cast<long long>(d.c_in);
  const long long c_out = static_cast<long long>(d.c_out);
  const long long k = static_cast<long long>(d.kernel);
  const long long stride = static_cast<long long>(d.stride);
  const long long pad = static_cast<long long>(d.pad);
  const long long h_in = static_cast<long long>(d.h_in);
  const long long w_in = static_cast<long long>(d.w_in);
  const long long total = static_cast<long long>(d.batch) * c_in * h_in * w_in;
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long iw = o % w_in;
    long long ih = (o / w_in) % h_in;
    long long ci = (o / (w_in * h_in)) % c_in;
    long long b = o / (w_in * h_in * c_in);
    float acc = 0.0f;
    for (long long co = 0; co < c_out; ++co) {
      for (long long kh = 0; kh < k; ++kh) {
        long long ohs = ih + pad - kh;
        if (ohs < 0 || ohs % stride != 0) continue;
        long long oh = ohs / stride;
        if (oh >= h_out) continue;
        for (long long kw = 0; kw < k; ++kw) {
          long long ows = iw + pad - kw;
          if (ows < 0 || ows % stride != 0) continue;
          long long ow = ows / stride;
          if (ow >= w_out) continue;
          acc += gy[((b * c_out + co) * h_out + oh) * w_out + ow] *
                 w[((co * c_in + ci) * k + kh) * k + kw];
        }
      }
    }
    gx[o] += acc;
  }
}

void conv2d_backward_weight(const float* x, const float* gy, float* gw, const Conv2dDims& d) {
  const long long h_out = static_cast<long long>(d.h_out());
  const long long w_out = static_cast<long long>(d.w_out());
  const long long c_in = static_cast<long long>(d.c_in);
  const long long c_out = static_cast<long long>(d.c_out);
  const long long k = static_cast<long long>(d.kernel);
  const long long stride = static_cast<long long>(d.stride);
  const long long pad = static_cast<long long>(d.pad);
  const long long h_in = static_cast<long long>(d.h_in);
  const long long w_in = static_cast<long long>(d.w_in);
  const long long batch = static_cast<long long>(d.batch);
  const long long total = c_out * c_in * k * k;
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long kw = o % k;
    long long kh = (o / k) % k;
    long long ci = (o / (k * k)) % c_in;
    long long co = o / (k * k * c_in);
    float acc = 0.0f;
    for (long long b = 0; b < batch; ++b) {
      for (long long oh = 0; oh < h_out; ++oh) {
        long long ih = oh * stride - pad + kh;
        if (ih < 0 || ih >= h_in) continue;
        for (long long ow = 0; ow < w_out; ++ow) {
          long long iw = ow * stride - pad + kw;
          if (iw < 0 || iw >= w_in) continue;
          acc += x[((b * c_in + ci) * h_in + ih) * w_in + iw] *
                 gy[((b * c_out + co) * h_out + oh) * w_out + ow];
        }
      }
    }
    gw[o] += acc;
  }
}

void conv2d_backward_bias(const float* gy, float* gb, const Conv2dDims& d) {
  const long long h_out = static_cast<long long>(d.h_out());
  const long long w_out = static_cast<long long>(d.w_out());
  const long long c_out = static_cast<long long>(d.c_out);
  const long long batch = static_cast<long long>(d.batch);
  MLSNN_PARALLEL_FOR
  for (long long co = 0; co < c_out; ++co) {
    float acc = 0.0f;
    for (long long b = 0; b < batch; ++b) {
      const float* plane = gy + ((b * c_out + co) * h_out) * w_out;
      for (long long i = 0; i < h_out * w_out; ++i) acc += plane[i];
    }
    gb[co] += acc;
  }
}

void linear_forward(const float* x, const float* w, const float* bias, float* y, size_t batch,
                    size_t f_in, size_t f_out) {
  const long long total = static_cast<long long>(batch) * static_cast<long long>(f_out);
  const long long fi = static_cast<long long>(f_in);
  const long long fo = static_cast<long long>(f_out);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long j = o % fo;
    long long b = o / fo;
    float acc = bias ? bias[j] : 0.0f;
    for (long long i = 0; i < fi; ++i) acc += x[b * fi + i] * w[i * fo + j];
    y[o] = acc;
  }
}

void linear_backward_input(const float* gy, const float* w, float* gx, size_t batch, size_t f_in,
                           size_t f_out) {
  const long long total = static_cast<long long>(batch) * static_cast<long long>(f_in);
  const long long fi = static_cast<long long>(f_in);
  const long long fo = static_cast<long long>(f_out);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long i = o % fi;
    long long b = o / fi;
    float acc = 0.0f;
    for (long long j = 0; j < fo; ++j) acc += gy[b * fo + j] * w[i * fo + j];
    gx[o] += acc;
  }
}

void linear_backward_weight(const float* x, const float* gy, float* gw, size_t batch, size_t f_in,
                            size_t f_out) {
  const long long total = static_cast<long long>(f_in) * static_cast<long long>(f_out);
  const long long fi = static_cast<long long>(f_in);
  const long long fo = static_cast<long long>(f_out);
  const long long bs = static_cast<long long>(batch);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long j = o % fo;
    long long i = o / fo;
    float acc = 0.0f;
    for (long long b = 0; b < bs; ++b) acc += x[b * fi + i] * gy[b * fo + j];
    gw[o] += acc;
  }
}

void linear_backward_bias(const float* gy, float* gb, size_t batch, size_t f_out) {
  const long long fo = static_cast<long long>(f_out);
  const long long bs = static_cast<long long>(batch);
  MLSNN_PARALLEL_FOR
  for (long long j = 0; j < fo; ++j) {
    float acc = 0.0f;
    for (long long b = 0; b < bs; ++b) acc += gy[b * fo + j];
    gb[j] += acc;
  }
}

void avgpool2d_forward(const float* x, float* y, size_t planes, size_t h_in, size_t w_in,
                       size_t kernel, size_t stride) {
  const long long h_out = static_cast<long long>((h_in - kernel) / stride + 1);
  const long long w_out = static_cast<long long>((w_in - kernel) / stride + 1);
  const long long total = static_cast<long long>(planes) * h_out * w_out;
  const long long k = static_cast<long long>(kernel);
  const long long s = static_cast<long long>(stride);
  const long long hi = static_cast<long long>(h_in);
  const long long wi = static_cast<long long>(w_in);
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long ow = o % w_out;
    long long oh = (o / w_out) % h_out;
    long long p = o / (w_out * h_out);
    float acc = 0.0f;
    for (long long kh = 0; kh < k; ++kh) {
      for (long long kw = 0; kw < k; ++kw) {
        acc += x[(p * hi + oh * s + kh) * wi + ow * s + kw];
      }
    }
    y[o] = acc * inv;
  }
}

void avgpool2d_backward(const float* gy, float* gx, size_t planes, size_t h_in, size_t w_in,
                        size_t kernel, size_t stride) {
  const long long h_out = static_cast<long long>((h_in - kernel) / stride + 1);
  const long long w_out = static_cast<long long>((w_in - kernel) / stride + 1);
  const long long total = static_cast<long long>(planes) * h_in * w_in;
  const long long k = static_cast<long long>(kernel);
  const long long s = static_cast<long long>(stride);
  const long long hi = static_cast<long long>(h_in);
  const long long wi = static_cast<long long>(w_in);
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  MLSNN_PARALLEL_FOR
  for (long long o = 0; o < total; ++o) {
    long long iw = o % wi;
    long long ih = (o / wi) % hi;
    long long p = o / (wi * hi);
    float acc = 0.0f;
    for (long long oh = (ih - k + s >= 0 ? (ih - k + s) / s : 0); oh <= ih / s && oh < h_out;
         ++oh) {
      if (ih - oh * s >= k) continue;
      for (long long ow = (iw - k + s >= 0 ? (iw - k + s) / s : 0); ow <= iw / s && ow < w_out;
           ++ow) {
        if (iw - ow * s >= k) continue;
        acc += gy[(p * h_out + oh) * w_out + ow];
      }
    }
    gx[o] += acc * inv;
  }
}

void ml_neuron_step(float* v, const float* input, float* z, size_t n, int levels, float v_th,
                    bool event_sum) {
  const long long total = static_cast<long long>(n);
  const float flevels = static_cast<float>(levels);
  MLSNN_PARALLEL_FOR
  for (long long i = 0; i < total; ++i) {
    float vv = v[i] + (event_sum ? input[i] : flevels * input[i]);
    float zz = 0.0f;
    for (int m = 0; m < levels; ++m) {
      if (vv >= v_th) {
        zz += 1.0f;
        vv -= v_th;
      } else {
        break;
      }
    }
    v[i] = vv;
    z[i] = zz;
  }
}
