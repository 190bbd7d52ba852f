#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlsnn/tensor.hpp"

namespace mlsnn {

// Trainable tensor living outside any tape. backward() accumulates into
// `grad` additively; repeated backward calls without zero_grad() keep adding.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
  void zero_grad() { grad.fill(0.0f); }
};

// Handle into a Tape's node list. Values are only meaningful together with
// the tape that created them.
struct Value {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. Nodes are appended in creation order;
// parents always have smaller ids, so the graph is acyclic by construction
// and the backward sweep is a single reverse pass. All computation is float32
// with a fixed accumulation order, so two identical runs produce bit-identical
// gradients.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until the backward sweep reaches this node
    std::string kind;
    std::vector<int32_t> parents;
    bool needs_grad = false;
    Parameter* param = nullptr;  // set on parameter leaves
    Tensor saved;                // op payload kept for backward / introspection
    std::function<void(Tape&, int32_t)> backward;
  };

  Value constant(Tensor v) { return make_leaf(std::move(v), "constant", false, nullptr); }
  Value input(Tensor v, bool requires_grad = false) {
    return make_leaf(std::move(v), "input", requires_grad, nullptr);
  }
  Value param(Parameter& p) { return make_leaf(p.value, "param", p.trainable, &p); }

  const Tensor& value(Value v) const { return node(v.id).value; }
  const Tensor& grad(Value v) const { return node(v.id).grad; }

  const Node& node(int32_t id) const;
  size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order.
  // Node grads from any previous backward on this tape are cleared first;
  // Parameter::grad accumulates additively across calls.
  void backward(Value loss);

  // Introspection hooks (used by gradient tests): clear node grads, seed one
  // node's grad by hand, run a single node's backward rule.
  void clear_node_grads();
  Tensor& grad_buffer(int32_t id);
  void run_node_backward(int32_t id);

  bool needs_grad(int32_t id) const { return node(id).needs_grad; }

  // Op-builder entry point: parents must already be on this tape.
  Value make_node(Tensor value, std::string kind, std::vector<int32_t> parents,
                  std::function<void(Tape&, int32_t)> bwd, Tensor saved = {});

  // Accumulate a gradient contribution into a parent (no-op when the parent
  // does not need gradients). Shapes may differ only in layout (same numel).
  void accumulate(int32_t id, const Tensor& contribution);

 private:
  Value make_leaf(Tensor v, const char* kind, bool needs, Parameter* p);
  std::vector<Node> nodes_;
};

// ---- Surrogate-gradient machinery -----------------------------------------

// Derivative of the scaled sigmoid used as the Heaviside surrogate:
// d/du sigma(alpha*u) * alpha = alpha * s * (1 - s), s = sigma(alpha*u).
// At u = 0 this is alpha/4.
float surrogate_sigmoid_derivative(float u, float alpha);

enum class SurrogateKind { surrogate, ste };

struct SurrogateRule {
  SurrogateKind kind = SurrogateKind::surrogate;
  float alpha = 5.0f;
  float operator()(float u) const {
    return kind == SurrogateKind::ste ? 1.0f : surrogate_sigmoid_derivative(u, alpha);
  }
};

// A custom elementwise op: exact forward, user-chosen backward.
// apply() records one node of kind `name` with the input saved for
// introspection; backward receives (saved input, upstream grad).
struct CustomOp {
  std::string name;
  std::function<Tensor(const Tensor&)> forward;
  std::function<Tensor(const Tensor&, const Tensor&)> backward;
};

CustomOp make_custom_op(std::string name, std::function<Tensor(const Tensor&)> forward,
                        std::function<Tensor(const Tensor&, const Tensor&)> backward);
Value apply(Tape& t, const CustomOp& op, Value x);

// Heaviside step with Theta(0) = 1 and a surrogate/STE backward.
// Recorded as a node of kind "heaviside" with the pre-threshold input saved.
Value heaviside(Tape& t, Value u, SurrogateRule rule);

// ---- Differentiable ops ----------------------------------------------------

Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
Value scale(Tape& t, Value a, float c);
Value add_scalar(Tape& t, Value a, float c);
// 1 / sqrt(x + eps), elementwise.
Value rsqrt_shift(Tape& t, Value a, float eps);
Value sum_all(Tape& t, Value a);  // -> scalar [1]
Value reshape(Tape& t, Value a, std::vector<size_t> new_shape);

// Reduce all dims except dim 1 (channels): [B,C,...] -> [C].
Value channel_sum(Tape& t, Value x);
// y[b,c,...] = x[b,c,...] * s[c] + h[c] with s,h of shape [C].
Value channel_affine(Tape& t, Value x, Value s, Value h);

// y = x @ w + b; x:[B,F_in], w:[F_in,F_out], b:[F_out] (pass Value{} for none).
Value linear(Tape& t, Value x, Value w, Value b);
// x:[B,C_in,H,W], w:[C_out,C_in,k,k], b:[C_out] or Value{}.
Value conv2d(Tape& t, Value x, Value w, Value b, size_t stride, size_t pad);
Value avgpool2d(Tape& t, Value x, size_t kernel, size_t stride);

// Mean cross-entropy over the batch from raw logits [B,K]; scalar output.
// Gradient at logits is (softmax - onehot) / B.
Value softmax_cross_entropy(Tape& t, Value logits, const std::vector<size_t>& labels);

}  // namespace mlsnn
