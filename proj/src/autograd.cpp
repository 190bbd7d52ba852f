#include "mlsnn/autograd.hpp"

#include <cmath>
#include <utility>

#include "mlsnn/errors.hpp"
#include "mlsnn/kernels.hpp"

namespace mlsnn {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw InternalError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                        b.shape_str());
}

}  // namespace

const Tape::Node& Tape::node(int32_t id) const {
  check_internal(id >= 0 && static_cast<size_t>(id) < nodes_.size(), "tape node id out of range");
  return nodes_[static_cast<size_t>(id)];
}

Value Tape::make_leaf(Tensor v, const char* kind, bool needs, Parameter* p) {
  Node n;
  n.value = std::move(v);
  n.kind = kind;
  n.needs_grad = needs;
  n.param = p;
  nodes_.push_back(std::move(n));
  return Value{static_cast<int32_t>(nodes_.size()) - 1};
}

Value Tape::make_node(Tensor value, std::string kind, std::vector<int32_t> parents,
                      std::function<void(Tape&, int32_t)> bwd, Tensor saved) {
  const int32_t id = static_cast<int32_t>(nodes_.size());
  Node n;
  n.value = std::move(value);
  n.kind = std::move(kind);
  n.saved = std::move(saved);
  n.backward = std::move(bwd);
  for (int32_t p : parents) {
    check_internal(p >= 0 && p < id, "tape parents must precede the node (acyclic by construction)");
    n.needs_grad = n.needs_grad || nodes_[static_cast<size_t>(p)].needs_grad;
  }
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return Value{id};
}

Tensor& Tape::grad_buffer(int32_t id) {
  check_internal(id >= 0 && static_cast<size_t>(id) < nodes_.size(), "tape node id out of range");
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape);
  return n.grad;
}

void Tape::accumulate(int32_t id, const Tensor& contribution) {
  check_internal(id >= 0 && static_cast<size_t>(id) < nodes_.size(), "tape node id out of range");
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.needs_grad) return;
  check_internal(contribution.numel() == n.value.numel(),
                 "gradient contribution size mismatch");
  Tensor& g = grad_buffer(id);
  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += contribution.data[i];
}

void Tape::clear_node_grads() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Tape::run_node_backward(int32_t id) {
  check_internal(id >= 0 && static_cast<size_t>(id) < nodes_.size(), "tape node id out of range");
  Node& n = nodes_[static_cast<size_t>(id)];
  check_internal(static_cast<bool>(n.backward), "node has no backward rule");
  n.backward(*this, id);
}

void Tape::backward(Value loss) {
  check_internal(loss.valid() && static_cast<size_t>(loss.id) < nodes_.size(),
                 "backward: invalid loss value");
  check_internal(node(loss.id).value.numel() == 1, "backward requires a scalar loss");
  clear_node_grads();
  grad_buffer(loss.id).data[0] = 1.0f;
  for (int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || n.grad.numel() == 0) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad.data;
      check_internal(pg.size() == n.grad.data.size(), "parameter grad size mismatch");
      for (size_t j = 0; j < pg.size(); ++j) pg[j] += n.grad.data[j];
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

// ---- Surrogate-gradient machinery -----------------------------------------

float surrogate_sigmoid_derivative(float u, float alpha) {
  const float s = 1.0f / (1.0f + std::exp(-alpha * u));
  return alpha * s * (1.0f - s);
}

CustomOp make_custom_op(std::string name, std::function<Tensor(const Tensor&)> forward,
                        std::function<Tensor(const Tensor&, const Tensor&)> backward) {
  return CustomOp{std::move(name), std::move(forward), std::move(backward)};
}

Value apply(Tape& t, const CustomOp& op, Value x) {
  const Tensor& xv = t.value(x);
  Tensor out = op.forward(xv);
  Tensor saved = xv;
  const int32_t px = x.id;
  auto bwd_fn = op.backward;
  return t.make_node(
      std::move(out), op.name, {px},
      [px, bwd_fn](Tape& tp, int32_t id) {
        const Tape::Node& n = tp.node(id);
        tp.accumulate(px, bwd_fn(n.saved, n.grad));
      },
      std::move(saved));
}

Value heaviside(Tape& t, Value u, SurrogateRule rule) {
  const Tensor& uv = t.value(u);
  Tensor out(uv.shape);
  for (size_t i = 0; i < uv.data.size(); ++i) out.data[i] = uv.data[i] >= 0.0f ? 1.0f : 0.0f;
  Tensor saved = uv;
  const int32_t pu = u.id;
  return t.make_node(
      std::move(out), "heaviside", {pu},
      [pu, rule](Tape& tp, int32_t id) {
        const Tape::Node& n = tp.node(id);
        Tensor gx(n.saved.shape);
        for (size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] = n.grad.data[i] * rule(n.saved.data[i]);
        tp.accumulate(pu, gx);
      },
      std::move(saved));
}

// ---- Differentiable ops ----------------------------------------------------

Value add(Tape& t, Value a, Value b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check_same_shape("add", av, bv);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  const int32_t pa = a.id, pb = b.id;
  return t.make_node(std::move(out), "add", {pa, pb}, [pa, pb](Tape& tp, int32_t id) {
    const Tensor& gy = tp.node(id).grad;
    tp.accumulate(pa, gy);
    tp.accumulate(pb, gy);
  });
}

Value sub(Tape& t, Value a, Value b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check_same_shape("sub", av, bv);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
  const int32_t pa = a.id, pb = b.id;
  return t.make_node(std::move(out), "sub", {pa, pb}, [pa, pb](Tape& tp, int32_t id) {
    const Tensor& gy = tp.node(id).grad;
    tp.accumulate(pa, gy);
    Tensor neg(gy.shape);
    for (size_t i = 0; i < neg.data.size(); ++i) neg.data[i] = -gy.data[i];
    tp.accumulate(pb, neg);
  });
}

Value mul(Tape& t, Value a, Value b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check_same_shape("mul", av, bv);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  const int32_t pa = a.id, pb = b.id;
  return t.make_node(std::move(out), "mul", {pa, pb}, [pa, pb](Tape& tp, int32_t id) {
    const Tensor& gy = tp.node(id).grad;
    const Tensor& av2 = tp.node(pa).value;
    const Tensor& bv2 = tp.node(pb).value;
    Tensor ga(av2.shape), gb(bv2.shape);
    for (size_t i = 0; i < gy.data.size(); ++i) {
      ga.data[i] = gy.data[i] * bv2.data[i];
      gb.data[i] = gy.data[i] * av2.data[i];
    }
    tp.accumulate(pa, ga);
    tp.accumulate(pb, gb);
  });
}

Value scale(Tape& t, Value a, float c) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * c;
  const int32_t pa = a.id;
  return t.make_node(std::move(out), "scale", {pa}, [pa, c](Tape& tp, int32_t id) {
    const Tensor& gy = tp.node(id).grad;
    Tensor ga(gy.shape);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] = gy.data[i] * c;
    tp.accumulate(pa, ga);
  });
}

Value add_scalar(Tape& t, Value a, float c) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] + c;
  const int32_t pa = a.id;
  return t.make_node(std::move(out), "add_scalar", {pa}, [pa](Tape& tp, int32_t id) {
    tp.accumulate(pa, tp.node(id).grad);
  });
}

Value rsqrt_shift(Tape& t, Value a, float eps) {
  const Tensor& av = t.value(a);
  Tensor out(av.shape);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = 1.0f / std::sqrt(av.data[i] + eps);
  const int32_t pa = a.id;
  return t.make_node(std::move(out), "rsqrt_shift", {pa}, [pa](Tape& tp, int32_t id) {
    const Tape::Node& n = tp.node(id);
    const Tensor& y = n.value;
    Tensor ga(y.shape);
    for (size_t i = 0; i < ga.data.size(); ++i)
      ga.data[i] = n.grad.data[i] * (-0.5f * y.data[i] * y.data[i] * y.data[i]);
    tp.accumulate(pa, ga);
  });
}

Value sum_all(Tape& t, Value a) {
  const Tensor& av = t.value(a);
  float acc = 0.0f;
  for (float x : av.data) acc += x;
  const int32_t pa = a.id;
  return t.make_node(Tensor::scalar(acc), "sum_all", {pa}, [pa](Tape& tp, int32_t id) {
    const float g = tp.node(id).grad.data[0];
    Tensor ga(tp.node(pa).value.shape, g);
    tp.accumulate(pa, ga);
  });
}

Value reshape(Tape& t, Value a, std::vector<size_t> new_shape) {
  const Tensor& av = t.value(a);
  if (shape_numel(new_shape) != av.numel())
    throw InternalError("reshape: cannot view " + av.shape_str() + " as " +
                        shape_to_string(new_shape));
  Tensor out(std::move(new_shape), av.data);
  const int32_t pa = a.id;
  return t.make_node(std::move(out), "reshape", {pa}, [pa](Tape& tp, int32_t id) {
    tp.accumulate(pa, tp.node(id).grad);
  });
}

namespace {

// Decompose [B, C, rest...] for the channel ops.
void channel_dims(const char* op, const Tensor& x, size_t& b, size_t& c, size_t& inner) {
  if (x.rank() < 2)
    throw InternalError(std::string(op) + ": needs rank >= 2, got " + x.shape_str());
  b = x.shape[0];
  c = x.shape[1];
  inner = 1;
  for (size_t i = 2; i < x.rank(); ++i) inner *= x.shape[i];
}

}  // namespace

Value channel_sum(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  size_t B, C, inner;
  channel_dims("channel_sum", xv, B, C, inner);
  Tensor out({C});
  for (size_t b = 0; b < B; ++b)
    for (size_t c = 0; c < C; ++c) {
      const float* row = xv.data.data() + (b * C + c) * inner;
      float acc = 0.0f;
      for (size_t r = 0; r < inner; ++r) acc += row[r];
      out.data[c] += acc;
    }
  const int32_t px = x.id;
  return t.make_node(std::move(out), "channel_sum", {px}, [px](Tape& tp, int32_t id) {
    const Tensor& gy = tp.node(id).grad;
    const Tensor& xv2 = tp.node(px).value;
    size_t B2, C2, inner2;
    channel_dims("channel_sum", xv2, B2, C2, inner2);
    Tensor gx(xv2.shape);
    for (size_t b = 0; b < B2; ++b)
      for (size_t c = 0; c < C2; ++c) {
        float* row = gx.data.data() + (b * C2 + c) * inner2;
        for (size_t r = 0; r < inner2; ++r) row[r] = gy.data[c];
      }
    tp.accumulate(px, gx);
  });
}

Value channel_affine(Tape& t, Value x, Value s, Value h) {
  const Tensor& xv = t.value(x);
  const Tensor& sv = t.value(s);
  const Tensor& hv = t.value(h);
  size_t B, C, inner;
  channel_dims("channel_affine", xv, B, C, inner);
  if (sv.rank() != 1 || sv.dim(0) != C || hv.rank() != 1 || hv.dim(0) != C)
    throw InternalError("channel_affine: scale/shift must be [C]=[" + std::to_string(C) +
                        "], got " + sv.shape_str() + " and " + hv.shape_str());
  Tensor out(xv.shape);
  for (size_t b = 0; b < B; ++b)
    for (size_t c = 0; c < C; ++c) {
      const float* row = xv.data.data() + (b * C + c) * inner;
      float* orow = out.data.data() + (b * C + c) * inner;
      for (size_t r = 0; r < inner; ++r) orow[r] = row[r] * sv.data[c] + hv.data[c];
    }
  const int32_t px = x.id, ps = s.id, ph = h.id;
  return t.make_node(std::move(out), "channel_affine", {px, ps, ph},
                     [px, ps, ph](Tape& tp, int32_t id) {
                       const Tensor& gy = tp.node(id).grad;
                       const Tensor& xv2 = tp.node(px).value;
                       const Tensor& sv2 = tp.node(ps).value;
                       size_t B2, C2, inner2;
                       channel_dims("channel_affine", xv2, B2, C2, inner2);
                       Tensor gx(xv2.shape);
                       Tensor gs({C2});
                       Tensor gh({C2});
                       for (size_t b = 0; b < B2; ++b)
                         for (size_t c = 0; c < C2; ++c) {
                           const size_t base = (b * C2 + c) * inner2;
                           float acc_s = 0.0f, acc_h = 0.0f;
                           for (size_t r = 0; r < inner2; ++r) {
                             const float g = gy.data[base + r];
                             gx.data[base + r] = g * sv2.data[c];
                             acc_s += g * xv2.data[base + r];
                             acc_h += g;
                           }
                           gs.data[c] += acc_s;
                           gh.data[c] += acc_h;
                         }
                       tp.accumulate(px, gx);
                       tp.accumulate(ps, gs);
                       tp.accumulate(ph, gh);
                     });
}

Value linear(Tape& t, Value x, Value w, Value b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
    throw InternalError("linear: shape mismatch " + xv.shape_str() + " vs " + wv.shape_str());
  const size_t B = xv.dim(0), Fin = xv.dim(1), Fout = wv.dim(1);
  const float* bias = nullptr;
  if (b.valid()) {
    const Tensor& bv = t.value(b);
    if (bv.rank() != 1 || bv.dim(0) != Fout)
      throw InternalError("linear: bias shape mismatch " + bv.shape_str() + " vs [" +
                          std::to_string(Fout) + "]");
    bias = bv.data.data();
  }
  Tensor out({B, Fout});
  kernels::linear_forward(xv.data.data(), wv.data.data(), bias, out.data.data(), B, Fin, Fout);
  const int32_t px = x.id, pw = w.id, pb = b.valid() ? b.id : -1;
  std::vector<int32_t> parents = {px, pw};
  if (pb >= 0) parents.push_back(pb);
  return t.make_node(std::move(out), "linear", std::move(parents),
                     [px, pw, pb, B, Fin, Fout](Tape& tp, int32_t id) {
                       const Tensor& gy = tp.node(id).grad;
                       if (tp.needs_grad(px))
                         kernels::linear_backward_input(gy.data.data(),
                                                        tp.node(pw).value.data.data(),
                                                        tp.grad_buffer(px).data.data(), B, Fin,
                                                        Fout);
                       if (tp.needs_grad(pw))
                         kernels::linear_backward_weight(tp.node(px).value.data.data(),
                                                         gy.data.data(),
                                                         tp.grad_buffer(pw).data.data(), B, Fin,
                                                         Fout);
                       if (pb >= 0 && tp.needs_grad(pb))
                         kernels::linear_backward_bias(gy.data.data(),
                                                       tp.grad_buffer(pb).data.data(), B, Fout);
                     });
}

Value conv2d(Tape& t, Value x, Value w, Value b, size_t stride, size_t pad) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  if (xv.rank() != 4 || wv.rank() != 4)
    throw InternalError("conv2d: expects x [B,C,H,W] and w [Co,Ci,k,k], got " + xv.shape_str() +
                        " and " + wv.shape_str());
  if (xv.dim(1) != wv.dim(1))
    throw InternalError("conv2d: input channels " + std::to_string(xv.dim(1)) +
                        " != weight channels " + std::to_string(wv.dim(1)));
  if (wv.dim(2) != wv.dim(3)) throw InternalError("conv2d: kernel must be square");
  kernels::Conv2dDims d;
  d.batch = xv.dim(0);
  d.c_in = xv.dim(1);
  d.h_in = xv.dim(2);
  d.w_in = xv.dim(3);
  d.c_out = wv.dim(0);
  d.kernel = wv.dim(2);
  d.stride = stride;
  d.pad = pad;
  check_internal(stride >= 1, "conv2d: stride must be >= 1");
  check_internal(d.h_in + 2 * d.pad >= d.kernel && d.w_in + 2 * d.pad >= d.kernel,
                 "conv2d: kernel larger than padded input");
  const float* bias = nullptr;
  if (b.valid()) {
    const Tensor& bv = t.value(b);
    if (bv.rank() != 1 || bv.dim(0) != d.c_out)
      throw InternalError("conv2d: bias shape mismatch " + bv.shape_str() + " vs [" +
                          std::to_string(d.c_out) + "]");
    bias = bv.data.data();
  }
  Tensor out({d.batch, d.c_out, d.h_out(), d.w_out()});
  kernels::conv2d_forward(xv.data.data(), wv.data.data(), bias, out.data.data(), d);
  const int32_t px = x.id, pw = w.id, pb = b.valid() ? b.id : -1;
  std::vector<int32_t> parents = {px, pw};
  if (pb >= 0) parents.push_back(pb);
  return t.make_node(std::move(out), "conv2d", std::move(parents),
                     [px, pw, pb, d](Tape& tp, int32_t id) {
                       const Tensor& gy = tp.node(id).grad;
                       if (tp.needs_grad(px))
                         kernels::conv2d_backward_input(gy.data.data(),
                                                        tp.node(pw).value.data.data(),
                                                        tp.grad_buffer(px).data.data(), d);
                       if (tp.needs_grad(pw))
                         kernels::conv2d_backward_weight(tp.node(px).value.data.data(),
                                                         gy.data.data(),
                                                         tp.grad_buffer(pw).data.data(), d);
                       if (pb >= 0 && tp.needs_grad(pb))
                         kernels::conv2d_backward_bias(gy.data.data(),
                                                       tp.grad_buffer(pb).data.data(), d);
                     });
}

Value avgpool2d(Tape& t, Value x, size_t kernel, size_t stride) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 4)
    throw InternalError("avgpool2d: expects [B,C,H,W], got " + xv.shape_str());
  check_internal(kernel >= 1 && stride >= 1, "avgpool2d: kernel and stride must be >= 1");
  const size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  check_internal(H >= kernel && W >= kernel, "avgpool2d: kernel larger than input");
  const size_t Ho = (H - kernel) / stride + 1;
  const size_t Wo = (W - kernel) / stride + 1;
  Tensor out({B, C, Ho, Wo});
  kernels::avgpool2d_forward(xv.data.data(), out.data.data(), B * C, H, W, kernel, stride);
  const int32_t px = x.id;
  return t.make_node(std::move(out), "avgpool2d", {px},
                     [px, B, C, H, W, kernel, stride](Tape& tp, int32_t id) {
                       if (!tp.needs_grad(px)) return;
                       const Tensor& gy = tp.node(id).grad;
                       kernels::avgpool2d_backward(gy.data.data(),
                                                   tp.grad_buffer(px).data.data(), B * C, H, W,
                                                   kernel, stride);
                     });
}

Value softmax_cross_entropy(Tape& t, Value logits, const std::vector<size_t>& labels) {
  const Tensor& xv = t.value(logits);
  if (xv.rank() != 2) throw InternalError("softmax_cross_entropy: logits must be [B,K]");
  const size_t B = xv.dim(0), K = xv.dim(1);
  check_internal(K >= 2, "softmax_cross_entropy: needs at least 2 classes");
  check_internal(labels.size() == B, "softmax_cross_entropy: labels/batch mismatch");
  for (size_t b = 0; b < B; ++b)
    check_data(labels[b] < K, "label out of range: " + std::to_string(labels[b]) +
                                  " for K=" + std::to_string(K));
  Tensor probs({B, K});
  float loss = 0.0f;
  for (size_t b = 0; b < B; ++b) {
    const float* row = xv.data.data() + b * K;
    float mx = row[0];
    for (size_t k = 1; k < K; ++k) mx = row[k] > mx ? row[k] : mx;
    float se = 0.0f;
    for (size_t k = 0; k < K; ++k) se += std::exp(row[k] - mx);
    const float lse = std::log(se);
    for (size_t k = 0; k < K; ++k) probs.data[b * K + k] = std::exp(row[k] - mx) / se;
    loss += -(row[labels[b]] - mx - lse);
  }
  loss /= static_cast<float>(B);
  const int32_t px = logits.id;
  std::vector<size_t> lab = labels;
  return t.make_node(
      Tensor::scalar(loss), "softmax_cross_entropy", {px},
      [px, lab, B, K](Tape& tp, int32_t id) {
        const Tape::Node& n = tp.node(id);
        const float g = n.grad.data[0];
        const Tensor& probs2 = n.saved;
        Tensor gx({B, K});
        const float invb = 1.0f / static_cast<float>(B);
        for (size_t b = 0; b < B; ++b)
          for (size_t k = 0; k < K; ++k) {
            const float onehot = (k == lab[b]) ? 1.0f : 0.0f;
            gx.data[b * K + k] = g * (probs2.data[b * K + k] - onehot) * invb;
          }
        tp.accumulate(px, gx);
      },
      std::move(probs));
}

}  // namespace mlsnn
