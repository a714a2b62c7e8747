#include "gpn/graph.hpp"

#include <cmath>
#include <numbers>

namespace gpn::autodiff {

namespace {
constexpr double kPi = std::numbers::pi;

double surrogate_slope(double u) { return 1.0 / (1.0 + (kPi * u) * (kPi * u)); }
double arctan_sigmoid(double u) { return std::atan(kPi * u) / kPi + 0.5; }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

const Tensor& Value::tensor() const { return g_->value_of(*this); }
Tensor Value::grad() const { return g_->grad_of(*this); }

const char* Graph::op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Matmul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Sigmoid: return "sigmoid";
    case Op::Scale: return "scale";
    case Op::AddConst: return "add_const";
    case Op::RsubConst: return "rsub_const";
    case Op::ScaleByScalar: return "scale_by";
    case Op::Spike: return "spike";
    case Op::Detach: return "detach";
    case Op::MeanList: return "mean_list";
    case Op::MeanAll: return "mean_all";
    case Op::SumAll: return "sum_all";
    case Op::Softmax: return "softmax";
    case Op::Log: return "log";
    case Op::SoftmaxCE: return "softmax_cross_entropy";
    case Op::PickNegMean: return "pick_neg_mean";
  }
  return "?";
}

void Graph::check_owned(Value v) const {
  if (v.graph() != this || v.id() >= nodes_.size()) {
    throw ShapeError("value does not belong to this graph");
  }
}

Graph::Node& Graph::node_at(Value v) { check_owned(v); return nodes_[v.id()]; }
const Graph::Node& Graph::node_at(Value v) const { check_owned(v); return nodes_[v.id()]; }

const Tensor& Graph::value_of(Value v) const { return node_at(v).value; }

Tensor Graph::grad_of(Value v) const {
  const Node& n = node_at(v);
  if (!n.has_grad) return Tensor::zeros(n.value.shape);
  return n.grad;
}

bool Graph::has_grad(Value v) const { return node_at(v).has_grad; }

Value Graph::push(Node&& n) {
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(n.op));
  }
  if (!n.detached && !n.requires_grad) {
    for (std::uint32_t p : n.parents) {
      if (nodes_[p].needs_grad) { n.needs_grad = true; break; }
    }
  }
  if (n.requires_grad) n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Graph::leaf(Tensor t, bool requires_grad, std::string name) {
  Node n;
  n.value = std::move(t);
  n.op = Op::Leaf;
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  return push(std::move(n));
}

Value Graph::matmul(Value a, Value b) {
  const Tensor& ta = node_at(a).value;
  const Tensor& tb = node_at(b).value;
  if (ta.ndim() != 2 || tb.ndim() != 2) throw ShapeError("matmul expects 2-D operands");
  Node n;
  n.op = Op::Matmul;
  n.parents = {a.id(), b.id()};
  n.value = Tensor::zeros({ta.rows(), tb.cols()});
  mm_nn_acc(ta, tb, n.value);
  return push(std::move(n));
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(who) + ": operand shapes differ, " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}
}  // namespace

Value Graph::add(Value a, Value b) {
  const Tensor& ta = node_at(a).value;
  const Tensor& tb = node_at(b).value;
  require_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::Add;
  n.parents = {a.id(), b.id()};
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] += tb.data[i];
  return push(std::move(n));
}

Value Graph::sub(Value a, Value b) {
  const Tensor& ta = node_at(a).value;
  const Tensor& tb = node_at(b).value;
  require_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::Sub;
  n.parents = {a.id(), b.id()};
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] -= tb.data[i];
  return push(std::move(n));
}

Value Graph::mul(Value a, Value b) {
  const Tensor& ta = node_at(a).value;
  const Tensor& tb = node_at(b).value;
  require_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::Mul;
  n.parents = {a.id(), b.id()};
  n.value = ta;
  for (std::size_t i = 0; i < tb.numel(); ++i) n.value.data[i] *= tb.data[i];
  return push(std::move(n));
}

Value Graph::sigmoid(Value a) {
  Node n;
  n.op = Op::Sigmoid;
  n.parents = {a.id()};
  n.value = node_at(a).value;
  for (double& x : n.value.data) x = logistic(x);
  return push(std::move(n));
}

Value Graph::scale(Value a, double c) {
  Node n;
  n.op = Op::Scale;
  n.parents = {a.id()};
  n.p0 = c;
  n.value = node_at(a).value;
  for (double& x : n.value.data) x *= c;
  return push(std::move(n));
}

Value Graph::add_const(Value a, double c) {
  Node n;
  n.op = Op::AddConst;
  n.parents = {a.id()};
  n.p0 = c;
  n.value = node_at(a).value;
  for (double& x : n.value.data) x += c;
  return push(std::move(n));
}

Value Graph::rsub_const(double c, Value a) {
  Node n;
  n.op = Op::RsubConst;
  n.parents = {a.id()};
  n.p0 = c;
  n.value = node_at(a).value;
  for (double& x : n.value.data) x = c - x;
  return push(std::move(n));
}

Value Graph::scale_by(Value s, Value a) {
  const Tensor& ts = node_at(s).value;
  if (ts.numel() != 1) throw ShapeError("scale_by: scale operand must be a scalar");
  Node n;
  n.op = Op::ScaleByScalar;
  n.parents = {s.id(), a.id()};
  n.value = node_at(a).value;
  const double sv = ts.data[0];
  for (double& x : n.value.data) x *= sv;
  return push(std::move(n));
}

Value Graph::spike(Value u, ActivationMode mode) {
  Node n;
  n.op = Op::Spike;
  n.mode = mode;
  n.parents = {u.id()};
  n.value = node_at(u).value;
  if (mode == ActivationMode::Hard) {
    for (double& x : n.value.data) x = (x >= 0.0) ? 1.0 : 0.0;
  } else {
    for (double& x : n.value.data) x = arctan_sigmoid(x);
  }
  return push(std::move(n));
}

Value Graph::detach(Value a) {
  Node n;
  n.op = Op::Detach;
  n.parents = {a.id()};
  n.detached = true;
  n.value = node_at(a).value;
  return push(std::move(n));
}

Value Graph::mean_list(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeError("mean_list: empty list");
  Node n;
  n.op = Op::MeanList;
  n.value = node_at(xs[0]).value;
  n.parents.reserve(xs.size());
  n.parents.push_back(xs[0].id());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const Tensor& t = node_at(xs[i]).value;
    require_same_shape(n.value, t, "mean_list");
    for (std::size_t j = 0; j < t.numel(); ++j) n.value.data[j] += t.data[j];
    n.parents.push_back(xs[i].id());
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& x : n.value.data) x *= inv;
  return push(std::move(n));
}

Value Graph::mean_all(Value a) {
  const Tensor& ta = node_at(a).value;
  if (ta.numel() == 0) throw ShapeError("mean_all: empty tensor");
  double s = 0.0;
  for (double x : ta.data) s += x;
  Node n;
  n.op = Op::MeanAll;
  n.parents = {a.id()};
  n.value = Tensor::scalar(s / static_cast<double>(ta.numel()));
  return push(std::move(n));
}

Value Graph::sum_all(Value a) {
  const Tensor& ta = node_at(a).value;
  double s = 0.0;
  for (double x : ta.data) s += x;
  Node n;
  n.op = Op::SumAll;
  n.parents = {a.id()};
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Value Graph::softmax(Value a) {
  const Tensor& ta = node_at(a).value;
  if (ta.ndim() > 2) throw ShapeError("softmax expects a 1-D or 2-D value");
  Node n;
  n.op = Op::Softmax;
  n.parents = {a.id()};
  n.value = ta;
  const std::size_t rows = ta.rows(), cols = ta.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = n.value.data.data() + i * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) { row[j] = std::exp(row[j] - mx); z += row[j]; }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= z;
  }
  return push(std::move(n));
}

Value Graph::log(Value a) {
  Node n;
  n.op = Op::Log;
  n.parents = {a.id()};
  n.value = node_at(a).value;
  for (double& x : n.value.data) x = std::log(x);
  return push(std::move(n));
}

Value Graph::softmax_cross_entropy(Value logits, std::vector<int> labels, Reduction red) {
  const Tensor& ta = node_at(logits).value;
  if (ta.ndim() > 2) throw ShapeError("softmax_cross_entropy expects 1-D or 2-D logits");
  const std::size_t rows = ta.rows(), cols = ta.cols();
  if (cols < 2) throw ShapeError("softmax_cross_entropy needs at least 2 classes");
  if (labels.size() != rows) throw ShapeError("softmax_cross_entropy: one label per row required");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cols) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                      std::to_string(cols) + ")");
    }
  }
  Node n;
  n.op = Op::SoftmaxCE;
  n.parents = {logits.id()};
  n.labels = std::move(labels);
  n.p0 = (red == Reduction::Mean) ? 1.0 / static_cast<double>(rows) : 1.0;
  n.aux = Tensor::zeros({rows, cols});  // cached probabilities for backward
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = ta.data.data() + i * cols;
    double* prow = n.aux.data.data() + i * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) { prow[j] = std::exp(row[j] - mx); z += prow[j]; }
    for (std::size_t j = 0; j < cols; ++j) prow[j] /= z;
    total += std::log(z) - (row[n.labels[i]] - mx);
  }
  n.value = Tensor::scalar(total * n.p0);
  return push(std::move(n));
}

Value Graph::pick_neg_mean(Value a, std::vector<int> labels, Reduction red) {
  const Tensor& ta = node_at(a).value;
  const std::size_t rows = ta.rows(), cols = ta.cols();
  if (labels.size() != rows) throw ShapeError("pick_neg_mean: one label per row required");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cols) {
      throw DataError("pick_neg_mean: label out of range");
    }
  }
  Node n;
  n.op = Op::PickNegMean;
  n.parents = {a.id()};
  n.labels = std::move(labels);
  n.p0 = (red == Reduction::Mean) ? 1.0 / static_cast<double>(rows) : 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) total -= ta.data[i * cols + n.labels[i]];
  n.value = Tensor::scalar(total * n.p0);
  return push(std::move(n));
}

Tensor& Graph::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(Value loss) {
  check_owned(loss);
  if (node_at(loss).value.numel() != 1) {
    throw ShapeError("backward: loss must be scalar-shaped");
  }
  grad_slot(loss.id()).data[0] += 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    backprop_node(id);
  }
}

void Graph::backprop_node(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad || !n.needs_grad || n.detached || n.parents.empty()) return;
  if (!n.grad.all_finite()) {
    throw NumericError(std::string("non-finite gradient at ") + op_name(n.op));
  }

  auto parent_needs = [&](std::size_t k) { return nodes_[n.parents[k]].needs_grad; };
  auto pvalue = [&](std::size_t k) -> const Tensor& { return nodes_[n.parents[k]].value; };
  auto pgrad = [&](std::size_t k) -> Tensor& { return grad_slot(n.parents[k]); };

  switch (n.op) {
    case Op::Leaf:
    case Op::Detach:
      break;
    case Op::Matmul: {
      if (parent_needs(0)) {
        Node& b = nodes_[n.parents[1]];
        if (b.tcache.numel() == 0) b.tcache = transpose(b.value);
        mm_nn_acc(n.grad, b.tcache, pgrad(0));
      }
      if (parent_needs(1)) mm_tn_acc(pvalue(0), n.grad, pgrad(1));
      break;
    }
    case Op::Add:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!parent_needs(k)) continue;
        Tensor& g = pgrad(k);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
      }
      break;
    case Op::Sub: {
      if (parent_needs(0)) {
        Tensor& g = pgrad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
      }
      if (parent_needs(1)) {
        Tensor& g = pgrad(1);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
      }
      break;
    }
    case Op::Mul: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!parent_needs(k)) continue;
        const Tensor& other = pvalue(1 - k);
        Tensor& g = pgrad(k);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * other.data[i];
      }
      break;
    }
    case Op::Sigmoid: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const double s = n.value.data[i];
        g.data[i] += n.grad.data[i] * s * (1.0 - s);
      }
      break;
    }
    case Op::Scale: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * n.p0;
      break;
    }
    case Op::AddConst: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
      break;
    }
    case Op::RsubConst: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
      break;
    }
    case Op::ScaleByScalar: {
      const double sv = pvalue(0).data[0];
      if (parent_needs(0)) {
        const Tensor& a = pvalue(1);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.numel(); ++i) acc += n.grad.data[i] * a.data[i];
        pgrad(0).data[0] += acc;
      }
      if (parent_needs(1)) {
        Tensor& g = pgrad(1);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * sv;
      }
      break;
    }
    case Op::Spike: {
      if (!parent_needs(0)) break;
      const Tensor& u = pvalue(0);
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        g.data[i] += n.grad.data[i] * surrogate_slope(u.data[i]);
      }
      break;
    }
    case Op::MeanList: {
      const double inv = 1.0 / static_cast<double>(n.parents.size());
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        if (!parent_needs(k)) continue;
        Tensor& g = pgrad(k);
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * inv;
      }
      break;
    }
    case Op::MeanAll: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      const double gv = n.grad.data[0] / static_cast<double>(g.numel());
      for (double& x : g.data) x += gv;
      break;
    }
    case Op::SumAll: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      const double gv = n.grad.data[0];
      for (double& x : g.data) x += gv;
      break;
    }
    case Op::Softmax: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      const std::size_t rows = n.value.rows(), cols = n.value.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        const double* p = n.value.data.data() + i * cols;
        const double* go = n.grad.data.data() + i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += go[j] * p[j];
        double* gi = g.data.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gi[j] += (go[j] - dot) * p[j];
      }
      break;
    }
    case Op::Log: {
      if (!parent_needs(0)) break;
      const Tensor& a = pvalue(0);
      Tensor& g = pgrad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] / a.data[i];
      break;
    }
    case Op::SoftmaxCE: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      const std::size_t rows = n.aux.rows(), cols = n.aux.cols();
      const double gv = n.grad.data[0] * n.p0;
      for (std::size_t i = 0; i < rows; ++i) {
        const double* p = n.aux.data.data() + i * cols;
        double* gi = g.data.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gi[j] += gv * p[j];
        gi[n.labels[i]] -= gv;
      }
      break;
    }
    case Op::PickNegMean: {
      if (!parent_needs(0)) break;
      Tensor& g = pgrad(0);
      const std::size_t cols = pvalue(0).cols();
      const double gv = n.grad.data[0] * n.p0;
      for (std::size_t i = 0; i < n.labels.size(); ++i) {
        g.data[i * cols + n.labels[i]] -= gv;
      }
      break;
    }
  }
}

}  // namespace gpn::autodiff
