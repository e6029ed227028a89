#ifndef KGRG_AUTODIFF_HPP
#define KGRG_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgrg::ad {

// Dense row-major tensor of rank 1 or 2, double precision throughout.
// Gradients flow through a define-by-run tape: every primitive records a
// backprop closure when any input requires a gradient.

struct Node;
class Tape;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);
  // Leaf with requires_grad set; gradients accumulate in-place across passes.
  static Tensor param(std::vector<int> shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int numel() const;
  int rows() const;  // rank-2 only
  int cols() const;

  const std::vector<double>& values() const;
  std::vector<double>& values();
  const std::vector<double>& grad() const;
  void zero_grad();
  bool requires_grad() const;

  double item() const;  // scalar tensors only

  std::shared_ptr<Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
  friend class Tape;
  friend Tensor wrap(std::shared_ptr<Node>);
};

struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::function<void(Node&)> backprop;  // pulls from this->grad into inputs
  std::vector<std::shared_ptr<Node>> inputs;

  int numel() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Records primitive applications in execution order (already topological).
// One tape per worker; backward walks the record once, in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void set_enabled(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }
  std::size_t size() const { return record_.size(); }
  void clear() { record_.clear(); }

  void record(const std::shared_ptr<Node>& n) {
    if (enabled_) record_.push_back(n);
  }

  // Seeds d(loss)/d(loss)=1 and accumulates gradients into every
  // requires_grad leaf reachable from the record.
  void backward(const Tensor& loss);

 private:
  bool enabled_ = true;
  std::vector<std::shared_ptr<Node>> record_;
};

// --- primitives -------------------------------------------------------------

Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);  // elementwise
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
Tensor vecmat(Tape& t, const Tensor& v, const Tensor& m);  // v^T M, v:(m) M:(m,n) -> (n)
Tensor dot(Tape& t, const Tensor& a, const Tensor& b);     // rank-1, -> scalar
Tensor concat_vec(Tape& t, const std::vector<Tensor>& parts);
Tensor stack_rows(Tape& t, const std::vector<Tensor>& rows);  // k x (d) -> (k,d)
Tensor row(Tape& t, const Tensor& m, int i);                  // (L,d) -> (d)
Tensor tanh_(Tape& t, const Tensor& a);
Tensor sigmoid(Tape& t, const Tensor& a);
Tensor exp_(Tape& t, const Tensor& a);
Tensor log_(Tape& t, const Tensor& a);
Tensor sum(Tape& t, const Tensor& a);        // -> scalar
Tensor mean_rows(Tape& t, const Tensor& m);  // (L,d) -> (d), mean over rows
Tensor add_row_broadcast(Tape& t, const Tensor& m, const Tensor& b);  // (L,d)+(d)
Tensor gather_rows(Tape& t, const Tensor& table, const std::vector<int>& ids);
Tensor scale(Tape& t, const Tensor& a, double c);
Tensor add_const(Tape& t, const Tensor& a, double c);
Tensor pick(Tape& t, const Tensor& v, int i);  // rank-1 -> scalar
Tensor clamp(Tape& t, const Tensor& a, double lo, double hi);
// Same-padded 1-D convolution over a (L,E) sequence. Filter weight is laid
// out (width*E, F), bias (F); output (L,F).
Tensor conv1d_same(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b,
                   int width);
// Numerically stabilized softmax. Rank-1, or rank-2 along the given axis.
Tensor softmax(Tape& t, const Tensor& a, int axis = 0);

// Escape hatch for fused primitives defined outside this module: computes
// nothing, just wires value/inputs/backprop into the tape with the same
// finiteness and requires_grad handling as built-in ops.
Tensor custom_op(Tape& t, const std::string& kind, std::vector<int> shape,
                 std::vector<double> value, std::vector<Tensor> inputs,
                 std::function<void(Node&)> backprop);

// --- verification -----------------------------------------------------------

// Central-difference check of the tape gradient of a scalar-valued function.
// Returns max over checked coordinates of |a-b| / max(1e-8, |a|+|b|).
// With max_coords >= 0, only that many randomly chosen coordinates per input
// tensor are probed (seeded, reproducible).
double gradient_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double eps = 1e-5, int max_coords = -1,
    std::uint64_t seed = 0);

}  // namespace kgrg::ad

#endif  // KGRG_AUTODIFF_HPP
