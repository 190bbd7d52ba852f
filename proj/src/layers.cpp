#include "mlsnn/layers.hpp"

#include <cmath>

#include "mlsnn/errors.hpp"

namespace mlsnn {

void Layer::collect_params(std::vector<Parameter*>&) {}
void Layer::collect_buffers(std::vector<std::pair<std::string, Tensor*>>&) {}
void Layer::init_params(Rng&) {}

namespace {

void kaiming_uniform(Tensor& t, size_t fan_in, Rng& rng) {
  check_internal(fan_in > 0, "init: zero fan-in");
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  for (float& v : t.data) v = rng.uniform(-bound, bound);
}

[[noreturn]] void shape_error(const std::string& layer, const std::string& msg) {
  throw ConfigError("layer " + layer + ": " + msg);
}

}  // namespace

Value tap_wire(Tape& t, Value v) { return reshape(t, v, t.value(v).shape); }

// ---- Conv2dLayer ------------------------------------------------------------

Conv2dLayer::Conv2dLayer(std::string n, size_t ci, size_t co, size_t k, size_t s, size_t p,
                         bool ub)
    : c_in(ci), c_out(co), kernel(k), stride(s), pad(p), use_bias(ub) {
  name = std::move(n);
  check_config(ci >= 1 && co >= 1 && k >= 1 && s >= 1, "layer " + name + ": bad conv geometry");
  weight = Parameter(name + ".weight", Tensor({co, ci, k, k}));
  if (use_bias) bias = Parameter(name + ".bias", Tensor({co}));
}

void Conv2dLayer::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (use_bias) out.push_back(&bias);
}

void Conv2dLayer::init_params(Rng& rng) {
  kaiming_uniform(weight.value, c_in * kernel * kernel, rng);
  if (use_bias) bias.value.fill(0.0f);
}

std::vector<size_t> Conv2dLayer::output_shape(const std::vector<size_t>& in) const {
  if (in.size() != 3) shape_error(name, "expects [C,H,W] input, got " + shape_to_string(in));
  if (in[0] != c_in)
    shape_error(name, "input channels " + std::to_string(in[0]) + " != expected " +
                          std::to_string(c_in));
  if (in[1] + 2 * pad < kernel || in[2] + 2 * pad < kernel)
    shape_error(name, "kernel " + std::to_string(kernel) + " larger than padded input " +
                          shape_to_string(in));
  return {c_out, (in[1] + 2 * pad - kernel) / stride + 1, (in[2] + 2 * pad - kernel) / stride + 1};
}

std::vector<Value> Conv2dLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  Value w = ctx.tape.param(weight);
  Value b = use_bias ? ctx.tape.param(bias) : Value{};
  std::vector<Value> out;
  out.reserve(x.size());
  for (const Value& xt : x) out.push_back(conv2d(ctx.tape, xt, w, b, stride, pad));
  return out;
}

// ---- LinearLayer ------------------------------------------------------------

LinearLayer::LinearLayer(std::string n, size_t fi, size_t fo, bool ub)
    : f_in(fi), f_out(fo), use_bias(ub) {
  name = std::move(n);
  check_config(fi >= 1 && fo >= 1, "layer " + name + ": bad linear geometry");
  weight = Parameter(name + ".weight", Tensor({fi, fo}));
  if (use_bias) bias = Parameter(name + ".bias", Tensor({fo}));
}

void LinearLayer::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (use_bias) out.push_back(&bias);
}

void LinearLayer::init_params(Rng& rng) {
  kaiming_uniform(weight.value, f_in, rng);
  if (use_bias) bias.value.fill(0.0f);
}

std::vector<size_t> LinearLayer::output_shape(const std::vector<size_t>& in) const {
  if (in.size() != 1) shape_error(name, "expects flat [F] input, got " + shape_to_string(in));
  if (in[0] != f_in)
    shape_error(name,
                "input features " + std::to_string(in[0]) + " != expected " + std::to_string(f_in));
  return {f_out};
}

std::vector<Value> LinearLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  Value w = ctx.tape.param(weight);
  Value b = use_bias ? ctx.tape.param(bias) : Value{};
  std::vector<Value> out;
  out.reserve(x.size());
  for (const Value& xt : x) out.push_back(linear(ctx.tape, xt, w, b));
  return out;
}

// ---- AvgPoolLayer -----------------------------------------------------------

AvgPoolLayer::AvgPoolLayer(std::string n, size_t k, size_t s) : kernel(k), stride(s) {
  name = std::move(n);
  check_config(k >= 1 && s >= 1, "layer " + name + ": bad pool geometry");
}

std::vector<size_t> AvgPoolLayer::output_shape(const std::vector<size_t>& in) const {
  if (in.size() != 3) shape_error(name, "expects [C,H,W] input, got " + shape_to_string(in));
  if (in[1] < kernel || in[2] < kernel)
    shape_error(name, "pool kernel larger than input " + shape_to_string(in));
  return {in[0], (in[1] - kernel) / stride + 1, (in[2] - kernel) / stride + 1};
}

std::vector<Value> AvgPoolLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  std::vector<Value> out;
  out.reserve(x.size());
  for (const Value& xt : x) out.push_back(avgpool2d(ctx.tape, xt, kernel, stride));
  return out;
}

// ---- FlattenLayer -----------------------------------------------------------

FlattenLayer::FlattenLayer(std::string n) { name = std::move(n); }

std::vector<size_t> FlattenLayer::output_shape(const std::vector<size_t>& in) const {
  size_t f = 1;
  for (size_t d : in) f *= d;
  return {f};
}

std::vector<Value> FlattenLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  std::vector<Value> out;
  out.reserve(x.size());
  for (const Value& xt : x) {
    const Tensor& v = ctx.tape.value(xt);
    check_internal(v.rank() >= 2, "flatten expects a batched tensor");
    out.push_back(reshape(ctx.tape, xt, {v.dim(0), v.numel() / v.dim(0)}));
  }
  return out;
}

// ---- BatchNormLayer ---------------------------------------------------------

BatchNormLayer::BatchNormLayer(std::string n, size_t c, float e, float m)
    : channels(c), eps(e), momentum(m) {
  name = std::move(n);
  check_config(c >= 1, "layer " + name + ": zero channels");
  check_config(e > 0.0f, "layer " + name + ": eps must be positive");
  gamma = Parameter(name + ".gamma", Tensor({c}, 1.0f));
  beta = Parameter(name + ".beta", Tensor({c}));
  running_mean = Tensor({c});
  running_var = Tensor({c}, 1.0f);
}

void BatchNormLayer::collect_params(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void BatchNormLayer::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(name + ".running_mean", &running_mean);
  out.emplace_back(name + ".running_var", &running_var);
}

void BatchNormLayer::init_params(Rng&) {
  gamma.value.fill(1.0f);
  beta.value.fill(0.0f);
  running_mean.fill(0.0f);
  running_var.fill(1.0f);
}

std::vector<size_t> BatchNormLayer::output_shape(const std::vector<size_t>& in) const {
  if (in.empty() || in[0] != channels)
    shape_error(name, "input channels " + shape_to_string(in) + " != expected " +
                          std::to_string(channels));
  return in;
}

std::vector<Value> BatchNormLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  check_internal(!x.empty(), "batchnorm: empty sequence");
  Tape& t = ctx.tape;
  const Tensor& x0 = t.value(x[0]);
  check_internal(x0.rank() >= 2 && x0.dim(1) == channels,
                 "batchnorm: channel mismatch for layer " + name);

  if (!ctx.training) {
    // Fold running statistics into a single affine transform.
    Tensor s({channels}), h({channels});
    for (size_t c = 0; c < channels; ++c) {
      const float inv = 1.0f / std::sqrt(running_var.data[c] + eps);
      s.data[c] = gamma.value.data[c] * inv;
      h.data[c] = beta.value.data[c] - running_mean.data[c] * s.data[c];
    }
    Value sv = t.constant(std::move(s));
    Value hv = t.constant(std::move(h));
    std::vector<Value> out;
    out.reserve(x.size());
    for (const Value& xt : x) out.push_back(channel_affine(t, xt, sv, hv));
    return out;
  }

  size_t per_step = x0.numel() / channels;  // batch * spatial
  const float inv_count = 1.0f / static_cast<float>(per_step * x.size());

  Value sum{};
  for (const Value& xt : x) {
    Value cs = channel_sum(t, xt);
    sum = sum.valid() ? add(t, sum, cs) : cs;
  }
  Value mu = scale(t, sum, inv_count);
  Value neg_mu = scale(t, mu, -1.0f);
  Value ones_c = t.constant(Tensor({channels}, 1.0f));

  std::vector<Value> centered;
  centered.reserve(x.size());
  Value var_sum{};
  for (const Value& xt : x) {
    Value xc = channel_affine(t, xt, ones_c, neg_mu);
    centered.push_back(xc);
    Value sq = channel_sum(t, mul(t, xc, xc));
    var_sum = var_sum.valid() ? add(t, var_sum, sq) : sq;
  }
  Value var = scale(t, var_sum, inv_count);
  Value inv_std = rsqrt_shift(t, var, eps);

  Value g = t.param(gamma);
  Value b = t.param(beta);
  Value s = mul(t, g, inv_std);

  std::vector<Value> out;
  out.reserve(x.size());
  for (const Value& xc : centered) out.push_back(channel_affine(t, xc, s, b));

  // Update running statistics from the batch values (biased variance).
  const Tensor& mu_v = t.value(mu);
  const Tensor& var_v = t.value(var);
  for (size_t c = 0; c < channels; ++c) {
    running_mean.data[c] = (1.0f - momentum) * running_mean.data[c] + momentum * mu_v.data[c];
    running_var.data[c] = (1.0f - momentum) * running_var.data[c] + momentum * var_v.data[c];
  }
  return out;
}

// ---- MLNeuronLayer ----------------------------------------------------------

MLNeuronLayer::MLNeuronLayer(std::string n, MLNeuronConfig c, bool bar) : cfg(c), barrier(bar) {
  name = std::move(n);
  validate_neuron_config(cfg);
}

std::vector<size_t> MLNeuronLayer::output_shape(const std::vector<size_t>& in) const {
  return in;
}

std::vector<Value> MLNeuronLayer::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  std::vector<Value> out = barrier ? barrier_neuron_sequence(ctx.tape, x, cfg)
                                   : ml_neuron_sequence(ctx.tape, x, cfg);
  if (ctx.trace && trace_point >= 0) {
    for (size_t t = 0; t < out.size(); ++t)
      ctx.trace->record(static_cast<size_t>(trace_point), t, ctx.tape.value(out[t]));
  }
  return out;
}

// ---- ResidualBlock ----------------------------------------------------------

BlockKind block_kind_from_string(const std::string& s) {
  if (s == "sew") return BlockKind::sew;
  if (s == "sparse") return BlockKind::sparse;
  if (s == "spiking_resnet") return BlockKind::spiking_resnet;
  throw ConfigError("unknown residual variant \"" + s +
                    "\" (expected sew, sparse or spiking_resnet)");
}

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::sew: return "sew";
    case BlockKind::sparse: return "sparse";
    case BlockKind::spiking_resnet: return "spiking_resnet";
  }
  return "?";
}

ResidualBlock::ResidualBlock(std::string n, BlockKind k, size_t ci, size_t co, size_t st,
                             MLNeuronConfig ncfg, bool bn)
    : kind(k), c_in(ci), c_out(co), stride(st), neuron_cfg(ncfg), use_bn(bn) {
  name = std::move(n);
  has_shortcut_path = (ci != co) || (st != 1);
  conv1 = std::make_unique<Conv2dLayer>(name + ".conv1", ci, co, 3, st, 1);
  conv2 = std::make_unique<Conv2dLayer>(name + ".conv2", co, co, 3, 1, 1);
  if (use_bn) {
    bn1 = std::make_unique<BatchNormLayer>(name + ".bn1", co);
    bn2 = std::make_unique<BatchNormLayer>(name + ".bn2", co);
  }
  n1 = std::make_unique<MLNeuronLayer>(name + ".n1", ncfg);
  n2 = std::make_unique<MLNeuronLayer>(name + ".n2", ncfg);
  if (has_shortcut_path) {
    conv_sc = std::make_unique<Conv2dLayer>(name + ".conv_sc", ci, co, 1, st, 0);
    if (use_bn) bn_sc = std::make_unique<BatchNormLayer>(name + ".bn_sc", co);
    n_sc = std::make_unique<MLNeuronLayer>(name + ".n_sc", ncfg);
  }
}

void ResidualBlock::collect_params(std::vector<Parameter*>& out) {
  conv1->collect_params(out);
  if (bn1) bn1->collect_params(out);
  conv2->collect_params(out);
  if (bn2) bn2->collect_params(out);
  if (conv_sc) conv_sc->collect_params(out);
  if (bn_sc) bn_sc->collect_params(out);
}

void ResidualBlock::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  if (bn1) bn1->collect_buffers(out);
  if (bn2) bn2->collect_buffers(out);
  if (bn_sc) bn_sc->collect_buffers(out);
}

void ResidualBlock::init_params(Rng& rng) {
  conv1->init_params(rng);
  if (bn1) bn1->init_params(rng);
  conv2->init_params(rng);
  if (bn2) bn2->init_params(rng);
  if (conv_sc) conv_sc->init_params(rng);
  if (bn_sc) bn_sc->init_params(rng);
}

std::vector<size_t> ResidualBlock::output_shape(const std::vector<size_t>& in) const {
  std::vector<size_t> a = conv1->output_shape(in);
  if (bn1) a = bn1->output_shape(a);
  a = conv2->output_shape(a);
  std::vector<size_t> r = in;
  if (has_shortcut_path) r = conv_sc->output_shape(in);
  if (a != r)
    throw ConfigError("layer " + name + ": direct path shape " + shape_to_string(a) +
                      " does not match shortcut shape " + shape_to_string(r));
  return a;
}

std::vector<Value> ResidualBlock::forward(ForwardCtx& ctx, const std::vector<Value>& x) {
  Tape& t = ctx.tape;

  std::vector<Value> a = conv1->forward(ctx, x);
  if (bn1) a = bn1->forward(ctx, a);
  a = n1->forward(ctx, a);
  a = conv2->forward(ctx, a);
  if (bn2) a = bn2->forward(ctx, a);
  a = n2->forward(ctx, a);

  std::vector<Value> r_src = x;
  if (has_shortcut_path) {
    r_src = conv_sc->forward(ctx, x);
    if (bn_sc) r_src = bn_sc->forward(ctx, r_src);
    r_src = n_sc->forward(ctx, r_src);
  }
  std::vector<Value> r;
  r.reserve(r_src.size());
  for (const Value& rt : r_src) r.push_back(tap_wire(t, rt));

  check_internal(a.size() == r.size(), "residual block: sequence length mismatch");
  std::vector<Value> s;
  s.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) s.push_back(add(t, a[i], r[i]));

  std::vector<Value> o;
  if (kind == BlockKind::sew) {
    o = s;  // O and S are the same node
  } else {
    MLNeuronConfig bcfg = neuron_cfg;
    bcfg.rule.kind =
        (kind == BlockKind::sparse) ? SurrogateKind::ste : SurrogateKind::surrogate;
    o = barrier_neuron_sequence(t, s, bcfg);
  }

  if (ctx.trace) {
    for (size_t i = 0; i < o.size(); ++i) {
      if (point_r >= 0)
        ctx.trace->record(static_cast<size_t>(point_r), i, t.value(r[i]));
      if (point_sum >= 0) {
        if (kind == BlockKind::sew)
          ctx.trace->record_sum_point(static_cast<size_t>(point_sum), i, t.value(a[i]),
                                      t.value(r[i]), t.value(s[i]));
        else
          ctx.trace->record(static_cast<size_t>(point_sum), i, t.value(o[i]));
      }
    }
  }

  if (ctx.taps) {
    BlockTaps bt;
    bt.name = name;
    bt.a = a;
    bt.r = r;
    bt.s = s;
    bt.o = o;
    ctx.taps->push_back(std::move(bt));
  }
  return o;
}

}  // namespace mlsnn
