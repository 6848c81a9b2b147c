#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Operations on tensors
// that require gradients record their parents and a backward closure; calling
// backward() on a scalar result walks the recorded graph in reverse
// topological order and accumulates d(loss)/d(node) into every node that
// requires a gradient. The graph is released after one backward pass.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sval {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Raised when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is used outside its contract (non-scalar
/// backward, repeated backward, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Populates gradients of every tensor in the graph that requires one.
  /// The receiver must be a scalar that requires a gradient; the graph is
  /// consumed and a second call raises ContractError.
  void backward() const;

  /// Copy of the values as a fresh leaf with no history.
  Tensor detach() const;

  // Graph construction hook used by the operation library.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);

  detail::Node& node() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Operation library. Every operation below is differentiable w.r.t. each
// tensor argument; shapes are checked eagerly and violations raise
// DimensionError.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);

/// Element at a flat index, as a scalar tensor.
Tensor select(const Tensor& a, std::size_t flat_index);
Tensor reshape(const Tensor& a, Shape shape);
/// Concatenates along the flattened layout; the result is 1-D.
Tensor concat(const std::vector<Tensor>& parts);

Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);

/// y = W·x + b for x of shape [d_in] (or rows of x for shape [n, d_in]).
/// `bias` may be an undefined Tensor.
Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const Tensor& bias);

/// Cross-correlation over a [C_in,H,W] input with a [C_out,C_in,k,k]
/// kernel. `bias` ([C_out]) may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

/// Max over non-overlapping size x size windows of a [C,H,W] map; trailing
/// rows/columns that do not fill a window are dropped.
Tensor max_pool(const Tensor& input, std::size_t size = 2);

/// Global spatial mean of a [C,H,W] map, giving [C].
Tensor mean_pool(const Tensor& input);

// The following operate along the final axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

inline constexpr double kNormFloor = 1e-12;

struct NormalizeResult {
  Tensor value;
  bool degenerate = false;  // some row had norm below kNormFloor
};

NormalizeResult l2_normalize_checked(const Tensor& a);
Tensor l2_normalize(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace sval
