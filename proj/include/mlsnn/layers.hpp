#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mlsnn/autograd.hpp"
#include "mlsnn/neuron.hpp"
#include "mlsnn/profiler.hpp"
#include "mlsnn/rng.hpp"

namespace mlsnn {

// Per-block tap values (one Value per timestep): A = direct-path output,
// R = residual wire into the sum, S = unweighted sum, O = block output.
// For SEW blocks O and S are the same tape node.
struct BlockTaps {
  std::string name;
  std::vector<Value> a, r, s, o;
};

struct ForwardCtx {
  Tape& tape;
  bool training = false;
  TraceCollector* trace = nullptr;
  std::vector<BlockTaps>* taps = nullptr;
};

// A network stage mapping a per-timestep sequence of Values to another.
class Layer {
 public:
  std::string name;
  virtual ~Layer() = default;
  virtual std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) = 0;
  virtual void collect_params(std::vector<Parameter*>& out);
  virtual void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out);
  virtual void init_params(Rng& rng);
  // Per-image shape propagation ([C,H,W] or [F]); throws ConfigError naming
  // the layer on mismatch.
  virtual std::vector<size_t> output_shape(const std::vector<size_t>& in) const = 0;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(std::string name, size_t c_in, size_t c_out, size_t kernel, size_t stride,
              size_t pad, bool use_bias = true);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init_params(Rng& rng) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  size_t c_in, c_out, kernel, stride, pad;
  bool use_bias;
  Parameter weight, bias;
};

class LinearLayer final : public Layer {
 public:
  LinearLayer(std::string name, size_t f_in, size_t f_out, bool use_bias = true);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void init_params(Rng& rng) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  size_t f_in, f_out;
  bool use_bias;
  Parameter weight, bias;
};

class AvgPoolLayer final : public Layer {
 public:
  AvgPoolLayer(std::string name, size_t kernel, size_t stride);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  size_t kernel, stride;
};

class FlattenLayer final : public Layer {
 public:
  explicit FlattenLayer(std::string name);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;
};

// Batch normalization with statistics taken jointly over timesteps, batch and
// spatial positions during training (biased variance, momentum running
// stats); at inference the affine transform is folded from the running stats.
class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(std::string name, size_t channels, float eps = 1e-5f, float momentum = 0.1f);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  void init_params(Rng& rng) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  size_t channels;
  float eps, momentum;
  Parameter gamma, beta;
  Tensor running_mean, running_var;
};

// Multi-level spiking neuron stage. `barrier` selects event-sum charging with
// the timestep-level backward rule (summation points); otherwise the neuron
// integrates currents with per-micro-timestep (or fused) backward.
class MLNeuronLayer final : public Layer {
 public:
  MLNeuronLayer(std::string name, MLNeuronConfig cfg, bool barrier = false);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  MLNeuronConfig cfg;
  bool barrier;
  int trace_point = -1;  // assigned by the model builder
};

enum class BlockKind { sew, sparse, spiking_resnet };

BlockKind block_kind_from_string(const std::string& s);
std::string to_string(BlockKind k);

// Residual block. Direct path: conv-BN-neuron-conv-BN-neuron; shortcut:
// identity, or conv1x1-BN-neuron when shape changes. The variants differ only
// at the summation point:
//   sew:            O = A + R (no post-sum neuron; O and S are the same node)
//   sparse:         O = barrier neuron over S, STE backward (grad passes
//                   through the summation point verbatim)
//   spiking_resnet: O = barrier neuron over S, surrogate backward
//                   (grad_S = grad_O * sigma'(S - v_th))
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(std::string name, BlockKind kind, size_t c_in, size_t c_out, size_t stride,
                MLNeuronConfig neuron_cfg, bool use_bn = true);
  std::vector<Value> forward(ForwardCtx& ctx, const std::vector<Value>& x) override;
  void collect_params(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  void init_params(Rng& rng) override;
  std::vector<size_t> output_shape(const std::vector<size_t>& in) const override;

  BlockKind kind;
  size_t c_in, c_out, stride;
  MLNeuronConfig neuron_cfg;
  bool use_bn;
  bool has_shortcut_path;  // false = identity shortcut

  std::unique_ptr<Conv2dLayer> conv1, conv2, conv_sc;
  std::unique_ptr<BatchNormLayer> bn1, bn2, bn_sc;
  std::unique_ptr<MLNeuronLayer> n1, n2, n_sc;

  int point_r = -1;    // residual-wire trace point
  int point_sum = -1;  // summation-point trace point
};

// Identity wire node: isolates the gradient flowing into one branch of a sum.
Value tap_wire(Tape& t, Value v);

}  // namespace mlsnn
