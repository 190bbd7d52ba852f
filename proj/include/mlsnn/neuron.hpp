#pragma once

#include <vector>

#include "mlsnn/autograd.hpp"
#include "mlsnn/tensor.hpp"

namespace mlsnn {

// Multi-level integrate-and-fire neuron. Each timestep:
//   charge:    V <- V + levels * i(t)          (one add; "current" coding)
//   discharge: levels micro-timesteps, each emitting a unit spike and
//              subtracting v_th while V >= v_th (soft reset, Theta(0) = 1)
//   output:    z(t) = number of unit spikes, an integer in [0, levels]
// levels = 1 reduces bit-identically to the binary IF neuron.
struct MLNeuronConfig {
  int levels = 1;
  float v_th = 1.0f;
  SurrogateRule rule;           // backward rule used on the tape
  bool fused_backward = false;  // one backward evaluation per timestep instead
                                // of one per micro-timestep (truncates the
                                // temporal membrane chain)
};

// Membrane potentials, one per neuron; persists across timesteps and must be
// reset between independent forward passes.
struct IFState {
  Tensor v;
  explicit IFState(std::vector<size_t> shape) : v(std::move(shape)) {}
  IFState() = default;
  void reset() { v.fill(0.0f); }
};

// Integer-valued spike counts over a window: values[t, ...] in [0, levels].
struct SpikeTensor {
  int levels = 1;
  Tensor values;  // [T, ...]
  size_t timesteps() const { return values.rank() == 0 ? 0 : values.dim(0); }
};

// Binary IF neuron step (Eq-style branch form), independent of ml_step so the
// levels=1 reduction can be checked against it rather than by construction.
Tensor if_step(IFState& state, const Tensor& input, float v_th);

// One multi-level step in current coding (charge levels * input).
Tensor ml_step(IFState& state, const Tensor& input, const MLNeuronConfig& cfg);

// One multi-level step in event-sum coding (charge input once). Used at
// residual summation points, where the input is already a spike count and the
// membrane directly reflects it: z = clamp(floor(S / v_th), 0, levels).
Tensor ml_step_events(IFState& state, const Tensor& input, const MLNeuronConfig& cfg);

// Plain (no-tape) simulation over a [T, ...] current sequence.
SpikeTensor ml_forward_sequence(const Tensor& inputs, const MLNeuronConfig& cfg,
                                IFState* final_state = nullptr);

// Closed-form value of the rate-decoded output for a constant input x held
// for T timesteps: clamp(floor(levels*T*x / v_th), 0, levels*T) / (levels*T).
// Exactly levels*T + 1 distinct output levels; saturates at 1 for x >= v_th.
float quantizer_oracle(float x, int levels, int timesteps, float v_th);

// ---- Tape (training) paths -------------------------------------------------

// Forward a current sequence through the neuron on the tape. Default mode
// records one Heaviside node per micro-timestep (full BPTT through the
// membrane, including the soft-reset path); cfg.fused_backward instead records
// one custom node per timestep whose backward is
//   grad_i(t) = upstream_z(t) * levels * rule(V_charged(t) - v_th)
// with the membrane kept off-tape (temporal chain truncated).
// Forward values are bit-identical to ml_forward_sequence in both modes.
std::vector<Value> ml_neuron_sequence(Tape& t, const std::vector<Value>& currents,
                                      const MLNeuronConfig& cfg);

// Post-summation-point ("barrier") neuron: event-sum coding forward, one
// custom node per timestep, membrane off-tape. Backward per timestep:
//   STE:       grad_S(t) = upstream_z(t)                (verbatim copy)
//   surrogate: grad_S(t) = upstream_z(t) * rule(S(t) - v_th)
std::vector<Value> barrier_neuron_sequence(Tape& t, const std::vector<Value>& summed,
                                           const MLNeuronConfig& cfg);

// Stack per-timestep tape values into a SpikeTensor (copies values).
SpikeTensor stack_sequence(const Tape& t, const std::vector<Value>& seq, int levels);

void validate_neuron_config(const MLNeuronConfig& cfg);

}  // namespace mlsnn
