#include "mlsnn/neuron.hpp"

#include <cmath>

#include "mlsnn/errors.hpp"
#include "mlsnn/kernels.hpp"

namespace mlsnn {

void validate_neuron_config(const MLNeuronConfig& cfg) {
  check_config(cfg.levels >= 1, "neuron levels must be >= 1, got " + std::to_string(cfg.levels));
  check_config(cfg.v_th > 0.0f && std::isfinite(cfg.v_th),
               "neuron threshold must be positive and finite");
  check_config(cfg.rule.kind == SurrogateKind::ste || cfg.rule.alpha > 0.0f,
               "surrogate alpha must be positive");
}

namespace {

void check_step_input(const IFState& state, const Tensor& input) {
  check_internal(state.v.same_shape(input),
                 "neuron state shape " + state.v.shape_str() + " does not match input " +
                     input.shape_str());
  if (!input.all_finite()) throw NumericalError("neuron input contains NaN/Inf");
}

}  // namespace

Tensor if_step(IFState& state, const Tensor& input, float v_th) {
  check_config(v_th > 0.0f && std::isfinite(v_th), "neuron threshold must be positive and finite");
  check_step_input(state, input);
  Tensor z(input.shape);
  for (size_t i = 0; i < input.data.size(); ++i) {
    const float h = state.v.data[i] + input.data[i];
    if (h >= v_th) {
      z.data[i] = 1.0f;
      state.v.data[i] = h - v_th;
    } else {
      z.data[i] = 0.0f;
      state.v.data[i] = h;
    }
  }
  return z;
}

Tensor ml_step(IFState& state, const Tensor& input, const MLNeuronConfig& cfg) {
  validate_neuron_config(cfg);
  check_step_input(state, input);
  Tensor z(input.shape);
  kernels::ml_neuron_step(state.v.data.data(), input.data.data(), z.data.data(), input.numel(),
                          cfg.levels, cfg.v_th, /*event_sum=*/false);
  return z;
}

Tensor ml_step_events(IFState& state, const Tensor& input, const MLNeuronConfig& cfg) {
  validate_neuron_config(cfg);
  check_step_input(state, input);
  Tensor z(input.shape);
  kernels::ml_neuron_step(state.v.data.data(), input.data.data(), z.data.data(), input.numel(),
                          cfg.levels, cfg.v_th, /*event_sum=*/true);
  return z;
}

SpikeTensor ml_forward_sequence(const Tensor& inputs, const MLNeuronConfig& cfg,
                                IFState* final_state) {
  validate_neuron_config(cfg);
  check_internal(inputs.rank() >= 2, "ml_forward_sequence expects [T, ...], got " +
                                         inputs.shape_str());
  const size_t T = inputs.dim(0);
  check_internal(T >= 1, "ml_forward_sequence needs at least one timestep");
  std::vector<size_t> step_shape(inputs.shape.begin() + 1, inputs.shape.end());
  const size_t step_numel = shape_numel(step_shape);
  IFState state(step_shape);
  SpikeTensor out;
  out.levels = cfg.levels;
  out.values = Tensor(inputs.shape);
  Tensor step(step_shape);
  for (size_t t = 0; t < T; ++t) {
    std::copy(inputs.data.begin() + t * step_numel, inputs.data.begin() + (t + 1) * step_numel,
              step.data.begin());
    Tensor z = ml_step(state, step, cfg);
    std::copy(z.data.begin(), z.data.end(), out.values.data.begin() + t * step_numel);
  }
  if (final_state) *final_state = std::move(state);
  return out;
}

float quantizer_oracle(float x, int levels, int timesteps, float v_th) {
  check_config(levels >= 1, "quantizer_oracle: levels must be >= 1");
  check_config(timesteps >= 1, "quantizer_oracle: timesteps must be >= 1");
  check_config(v_th > 0.0f && std::isfinite(v_th), "quantizer_oracle: v_th must be positive");
  const long long nt = static_cast<long long>(levels) * static_cast<long long>(timesteps);
  double k = std::floor(static_cast<double>(nt) * static_cast<double>(x) /
                        static_cast<double>(v_th));
  if (!(k > 0.0)) k = 0.0;
  if (k > static_cast<double>(nt)) k = static_cast<double>(nt);
  // Same float expression as rate_decode (integer count / float(N*T)), so
  // matching counts give bitwise-equal decoded values.
  return static_cast<float>(k) / static_cast<float>(nt);
}

// ---- Tape (training) paths -------------------------------------------------

namespace {

std::vector<size_t> sequence_step_shape(Tape& t, const std::vector<Value>& seq) {
  check_internal(!seq.empty(), "neuron sequence needs at least one timestep");
  const std::vector<size_t> shape = t.value(seq[0]).shape;
  for (const Value& v : seq)
    check_internal(t.value(v).shape == shape, "neuron sequence timesteps must share one shape");
  return shape;
}

}  // namespace

std::vector<Value> ml_neuron_sequence(Tape& t, const std::vector<Value>& currents,
                                      const MLNeuronConfig& cfg) {
  validate_neuron_config(cfg);
  const std::vector<size_t> shape = sequence_step_shape(t, currents);
  std::vector<Value> out;
  out.reserve(currents.size());

  if (cfg.fused_backward) {
    // One custom node per timestep; membrane off-tape, temporal chain truncated.
    IFState state(shape);
    const MLNeuronConfig cfg_local = cfg;
    for (const Value& i_t : currents) {
      const Tensor& x = t.value(i_t);
      if (!x.all_finite()) throw NumericalError("neuron input contains NaN/Inf");
      Tensor charged(state.v.shape);
      const float fl = static_cast<float>(cfg.levels);
      for (size_t i = 0; i < charged.data.size(); ++i)
        charged.data[i] = state.v.data[i] + fl * x.data[i];
      Tensor z = ml_step(state, x, cfg);
      const int32_t px = i_t.id;
      out.push_back(t.make_node(
          std::move(z), "ml_neuron_fused", {px},
          [px, cfg_local](Tape& tp, int32_t id) {
            const Tape::Node& n = tp.node(id);
            Tensor gx(n.saved.shape);
            const float fl2 = static_cast<float>(cfg_local.levels);
            for (size_t i = 0; i < gx.data.size(); ++i)
              gx.data[i] = n.grad.data[i] * fl2 *
                           cfg_local.rule(n.saved.data[i] - cfg_local.v_th);
            tp.accumulate(px, gx);
          },
          std::move(charged)));
    }
    return out;
  }

  // Per-micro-timestep mode: the membrane lives on the tape, so BPTT flows
  // through both the temporal chain and the soft-reset subtraction.
  Value v = t.constant(Tensor(shape));
  for (const Value& i_t : currents) {
    if (!t.value(i_t).all_finite()) throw NumericalError("neuron input contains NaN/Inf");
    Value w = add(t, scale(t, i_t, static_cast<float>(cfg.levels)), v);
    Value z_t{};
    for (int n = 0; n < cfg.levels; ++n) {
      Value u = add_scalar(t, w, -cfg.v_th);
      Value g = heaviside(t, u, cfg.rule);
      w = sub(t, w, scale(t, g, cfg.v_th));
      z_t = z_t.valid() ? add(t, z_t, g) : g;
    }
    v = w;
    out.push_back(z_t);
  }
  return out;
}

std::vector<Value> barrier_neuron_sequence(Tape& t, const std::vector<Value>& summed,
                                           const MLNeuronConfig& cfg) {
  validate_neuron_config(cfg);
  const std::vector<size_t> shape = sequence_step_shape(t, summed);
  IFState state(shape);
  const bool ste = cfg.rule.kind == SurrogateKind::ste;
  const MLNeuronConfig cfg_local = cfg;
  std::vector<Value> out;
  out.reserve(summed.size());
  for (const Value& s_t : summed) {
    const Tensor& s = t.value(s_t);
    Tensor z = ml_step_events(state, s, cfg);
    const int32_t ps = s_t.id;
    if (ste) {
      out.push_back(t.make_node(std::move(z), "barrier_ste", {ps},
                                [ps](Tape& tp, int32_t id) {
                                  // Verbatim pass-through keeps tap-gradient
                                  // equalities bit-exact.
                                  tp.accumulate(ps, tp.node(id).grad);
                                }));
    } else {
      Tensor saved = s;
      out.push_back(t.make_node(
          std::move(z), "barrier_sg", {ps},
          [ps, cfg_local](Tape& tp, int32_t id) {
            const Tape::Node& n = tp.node(id);
            Tensor gx(n.saved.shape);
            for (size_t i = 0; i < gx.data.size(); ++i)
              gx.data[i] = n.grad.data[i] * cfg_local.rule(n.saved.data[i] - cfg_local.v_th);
            tp.accumulate(ps, gx);
          },
          std::move(saved)));
    }
  }
  return out;
}

SpikeTensor stack_sequence(const Tape& t, const std::vector<Value>& seq, int levels) {
  check_internal(!seq.empty(), "stack_sequence: empty sequence");
  const Tensor& first = t.value(seq[0]);
  std::vector<size_t> shape;
  shape.push_back(seq.size());
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  SpikeTensor out;
  out.levels = levels;
  out.values = Tensor(std::move(shape));
  const size_t step_numel = first.numel();
  for (size_t i = 0; i < seq.size(); ++i) {
    const Tensor& v = t.value(seq[i]);
    check_internal(v.numel() == step_numel, "stack_sequence: inconsistent timestep shapes");
    std::copy(v.data.begin(), v.data.end(), out.values.data.begin() + i * step_numel);
  }
  return out;
}

}  // namespace mlsnn
