// Reverse-mode automatic differentiation over Tensor values.
//
// A Graph is an append-only tape: node ids grow in construction order and
// every parent id is smaller than its child's, so the tape is a DAG by
// construction and reverse id order is a valid reverse-topological order.
// backward() walks the tape once, accumulating gradients deterministically.
//
// Spike activation has two modes:
//   Hard   - forward Heaviside (fires at u >= 0), backward replaced by the
//            arctan surrogate derivative 1 / (1 + (pi*u)^2).
//   Smooth - forward uses the arctan sigmoid itself and backward its exact
//            derivative; used to validate whole-graph gradients against
//            finite differences, which the hard forward would break.
//
// detach() yields a value-transparent node through which no gradient flows,
// which is how spike resets are cut out of the backward pass.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/tensor.hpp"

namespace gpn::autodiff {

enum class ActivationMode { Hard, Smooth };
enum class Reduction { Mean, Sum };

class Graph;

// Cheap handle into a Graph's tape.
class Value {
 public:
  Value() = default;
  const Tensor& tensor() const;
  Tensor grad() const;
  const std::vector<std::size_t>& shape() const { return tensor().shape; }
  bool valid() const { return g_ != nullptr; }
  std::uint32_t id() const { return id_; }
  Graph* graph() const { return g_; }

 private:
  friend class Graph;
  Value(Graph* g, std::uint32_t id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. Gradients are accumulated only into requires_grad leaves and the
  // intermediate nodes between them and the loss.
  Value leaf(Tensor t, bool requires_grad = false, std::string name = "");
  Value constant(Tensor t) { return leaf(std::move(t), false); }
  Value constant(double v) { return leaf(Tensor::scalar(v), false); }

  // out = a * b; backward dA = dOut * B^T, dB = A^T * dOut.
  Value matmul(Value a, Value b);

  // Elementwise; operand shapes must match exactly (no broadcasting).
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value sigmoid(Value a);

  // Scalar-constant forms.
  Value scale(Value a, double c);        // c * a
  Value add_const(Value a, double c);    // a + c
  Value rsub_const(double c, Value a);   // c - a

  // out = s * a where s is a [1]-shaped node (e.g. a learned leak factor).
  Value scale_by(Value s, Value a);

  Value spike(Value u, ActivationMode mode);
  Value detach(Value a);

  // Mean over a list of equal-shaped values (the unrolled time axis).
  Value mean_list(const std::vector<Value>& xs);
  Value mean_all(Value a);
  Value sum_all(Value a);

  Value softmax(Value a);  // row-wise over the last axis of an [N x K] value
  Value log(Value a);

  // Rows of `logits` are samples; labels[i] selects the target class.
  // Returns a scalar: mean (or sum) over rows of -log softmax(row)[label].
  Value softmax_cross_entropy(Value logits, std::vector<int> labels,
                              Reduction red = Reduction::Mean);
  // -mean_i a[i][labels[i]]; used with softmax()+log() for the
  // probability-averaging loss variant.
  Value pick_neg_mean(Value a, std::vector<int> labels,
                      Reduction red = Reduction::Mean);

  // Reverse pass from a scalar loss. Deterministic accumulation order given
  // a fixed construction order.
  void backward(Value loss);

  const Tensor& value_of(Value v) const;
  // Accumulated gradient; zeros if no gradient reached the node.
  Tensor grad_of(Value v) const;
  bool has_grad(Value v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf, Matmul, Add, Sub, Mul, Sigmoid, Scale, AddConst, RsubConst,
    ScaleByScalar, Spike, Detach, MeanList, MeanAll, SumAll, Softmax, Log,
    SoftmaxCE, PickNegMean,
  };

  struct Node {
    Tensor value;
    Tensor grad;
    Tensor aux;                    // op-specific cache (softmax probabilities)
    Tensor tcache;                 // lazily built transpose (matmul operand B)
    std::vector<std::uint32_t> parents;
    std::vector<int> labels;
    std::string name;
    double p0 = 0.0;
    Op op = Op::Leaf;
    ActivationMode mode = ActivationMode::Hard;
    bool requires_grad = false;
    bool needs_grad = false;
    bool detached = false;
    bool has_grad = false;
  };

  static const char* op_name(Op op);
  Node& node_at(Value v);
  const Node& node_at(Value v) const;
  void check_owned(Value v) const;
  Value push(Node&& n);
  Tensor& grad_slot(std::uint32_t id);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;
};

}  // namespace gpn::autodiff
