#include "kgrg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kgrg::ad {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

[[noreturn]] void shape_error(const std::string& kind, const Tensor& a,
                              const Tensor& b) {
  throw std::runtime_error("shape mismatch in " + kind + ": " +
                           shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
}

void check_finite(const std::string& kind, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw std::runtime_error("non-finite result in " + kind);
  }
}

std::shared_ptr<Node> make_node(std::vector<int> shape,
                                std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

Tensor wrap_node(std::shared_ptr<Node> n);

}  // namespace

Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

namespace {
Tensor wrap_node(std::shared_ptr<Node> n) { return wrap(std::move(n)); }

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Finishes a primitive: finiteness check, grad flag, tape entry.
Tensor finish(Tape& tape, const std::string& kind, std::shared_ptr<Node> out,
              std::vector<std::shared_ptr<Node>> inputs,
              std::function<void(Node&)> backprop) {
  check_finite(kind, out->value);
  bool rg = false;
  for (auto& in : inputs)
    if (in->requires_grad) rg = true;
  if (rg && tape.enabled()) {
    out->requires_grad = true;
    out->inputs = std::move(inputs);
    out->backprop = std::move(backprop);
    tape.record(out);
  }
  return wrap_node(std::move(out));
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return wrap(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  int n = 1;
  for (int d : shape) n *= d;
  if (static_cast<int>(values.size()) != n)
    throw std::runtime_error("tensor value count does not match shape");
  return wrap(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::param(std::vector<int> shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int Tensor::numel() const { return node_->numel(); }
int Tensor::rows() const { return node_->shape.at(0); }
int Tensor::cols() const { return node_->shape.at(1); }
const std::vector<double>& Tensor::values() const { return node_->value; }
std::vector<double>& Tensor::values() { return node_->value; }
const std::vector<double>& Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
  if (numel() != 1) throw std::runtime_error("item() on non-scalar tensor");
  return node_->value[0];
}

// --- Tape -------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::runtime_error("backward requires a scalar loss");
  for (auto& n : record_) n->ensure_grad();
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (auto it = record_.rbegin(); it != record_.rend(); ++it) {
    Node& n = **it;
    if (n.backprop) {
      for (auto& in : n.inputs) in->ensure_grad();
      n.backprop(n);
    }
  }
}

// --- elementwise ------------------------------------------------------------

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  auto out = make_node(a.shape(), a.values());
  for (int i = 0; i < b.numel(); ++i) out->value[i] += b.values()[i];
  return finish(t, "add", out, {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      n.inputs[0]->grad[i] += n.grad[i];
      n.inputs[1]->grad[i] += n.grad[i];
    }
  });
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  auto out = make_node(a.shape(), a.values());
  for (int i = 0; i < b.numel(); ++i) out->value[i] -= b.values()[i];
  return finish(t, "sub", out, {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      n.inputs[0]->grad[i] += n.grad[i];
      n.inputs[1]->grad[i] -= n.grad[i];
    }
  });
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  auto out = make_node(a.shape(), a.values());
  for (int i = 0; i < b.numel(); ++i) out->value[i] *= b.values()[i];
  return finish(t, "mul", out, {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      n.inputs[0]->grad[i] += n.grad[i] * n.inputs[1]->value[i];
      n.inputs[1]->grad[i] += n.grad[i] * n.inputs[0]->value[i];
    }
  });
}

// --- linear algebra ---------------------------------------------------------

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2) shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols();
  if (b.shape().size() == 1) {
    // (m,k) x (k) -> (m)
    if (b.numel() != k) shape_error("matmul", a, b);
    auto out = make_node({m}, std::vector<double>(m, 0.0));
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      const double* ar = av + i * k;
      for (int j = 0; j < k; ++j) s += ar[j] * bv[j];
      out->value[i] = s;
    }
    return finish(t, "matmul", out, {a.node(), b.node()}, [m, k](Node& n) {
      const double* g = n.grad.data();
      const double* av = n.inputs[0]->value.data();
      const double* bv = n.inputs[1]->value.data();
      double* ga = n.inputs[0]->grad.data();
      double* gb = n.inputs[1]->grad.data();
      for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        for (int j = 0; j < k; ++j) {
          ga[i * k + j] += gi * bv[j];
          gb[j] += gi * av[i * k + j];
        }
      }
    });
  }
  if (b.shape().size() != 2 || b.rows() != k) shape_error("matmul", a, b);
  const int p = b.cols();
  auto out = make_node({m, p}, std::vector<double>(m * p, 0.0));
  {
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out->value.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) {
        const double aij = av[i * k + j];
        const double* br = bv + j * p;
        double* orow = ov + i * p;
        for (int l = 0; l < p; ++l) orow[l] += aij * br[l];
      }
  }
  return finish(t, "matmul", out, {a.node(), b.node()}, [m, k, p](Node& n) {
    const double* g = n.grad.data();
    const double* av = n.inputs[0]->value.data();
    const double* bv = n.inputs[1]->value.data();
    double* ga = n.inputs[0]->grad.data();
    double* gb = n.inputs[1]->grad.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) {
        double s = 0.0;
        const double* gr = g + i * p;
        const double* br = bv + j * p;
        for (int l = 0; l < p; ++l) s += gr[l] * br[l];
        ga[i * k + j] += s;
        const double aij = av[i * k + j];
        double* gbr = gb + j * p;
        for (int l = 0; l < p; ++l) gbr[l] += aij * gr[l];
      }
  });
}

Tensor vecmat(Tape& t, const Tensor& v, const Tensor& m) {
  if (v.shape().size() != 1 || m.shape().size() != 2 || m.rows() != v.numel())
    shape_error("vecmat", v, m);
  const int r = m.rows(), c = m.cols();
  auto out = make_node({c}, std::vector<double>(c, 0.0));
  for (int i = 0; i < r; ++i) {
    const double vi = v.values()[i];
    const double* mr = m.values().data() + i * c;
    for (int j = 0; j < c; ++j) out->value[j] += vi * mr[j];
  }
  return finish(t, "vecmat", out, {v.node(), m.node()}, [r, c](Node& n) {
    const double* g = n.grad.data();
    const double* vv = n.inputs[0]->value.data();
    const double* mv = n.inputs[1]->value.data();
    double* gv = n.inputs[0]->grad.data();
    double* gm = n.inputs[1]->grad.data();
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      const double* mr = mv + i * c;
      for (int j = 0; j < c; ++j) {
        s += g[j] * mr[j];
        gm[i * c + j] += vv[i] * g[j];
      }
      gv[i] += s;
    }
  });
}

Tensor dot(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || a.shape() != b.shape()) shape_error("dot", a, b);
  double s = 0.0;
  for (int i = 0; i < a.numel(); ++i) s += a.values()[i] * b.values()[i];
  auto out = make_node({1}, {s});
  return finish(t, "dot", out, {a.node(), b.node()}, [](Node& n) {
    const double g = n.grad[0];
    for (std::size_t i = 0; i < n.inputs[0]->value.size(); ++i) {
      n.inputs[0]->grad[i] += g * n.inputs[1]->value[i];
      n.inputs[1]->grad[i] += g * n.inputs[0]->value[i];
    }
  });
}

// --- shape ops --------------------------------------------------------------

Tensor concat_vec(Tape& t, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_vec of nothing");
  std::vector<double> v;
  std::vector<std::shared_ptr<Node>> ins;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 1)
      throw std::runtime_error("concat_vec expects rank-1 parts");
    v.insert(v.end(), p.values().begin(), p.values().end());
    ins.push_back(p.node());
  }
  const int total = static_cast<int>(v.size());
  auto out = make_node({total}, std::move(v));
  return finish(t, "concat_vec", out, std::move(ins), [](Node& n) {
    std::size_t off = 0;
    for (auto& in : n.inputs) {
      for (std::size_t i = 0; i < in->value.size(); ++i)
        in->grad[i] += n.grad[off + i];
      off += in->value.size();
    }
  });
}

Tensor stack_rows(Tape& t, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::runtime_error("stack_rows of nothing");
  const int d = rows[0].numel();
  std::vector<double> v;
  std::vector<std::shared_ptr<Node>> ins;
  for (const Tensor& r : rows) {
    if (r.shape().size() != 1 || r.numel() != d)
      throw std::runtime_error("stack_rows expects equal-length rank-1 rows");
    v.insert(v.end(), r.values().begin(), r.values().end());
    ins.push_back(r.node());
  }
  auto out = make_node({static_cast<int>(rows.size()), d}, std::move(v));
  return finish(t, "stack_rows", out, std::move(ins), [d](Node& n) {
    for (std::size_t r = 0; r < n.inputs.size(); ++r)
      for (int i = 0; i < d; ++i)
        n.inputs[r]->grad[i] += n.grad[r * d + i];
  });
}

Tensor row(Tape& t, const Tensor& m, int i) {
  if (m.shape().size() != 2 || i < 0 || i >= m.rows())
    throw std::runtime_error("row index out of range");
  const int c = m.cols();
  std::vector<double> v(m.values().begin() + i * c,
                        m.values().begin() + (i + 1) * c);
  auto out = make_node({c}, std::move(v));
  return finish(t, "row", out, {m.node()}, [i, c](Node& n) {
    for (int j = 0; j < c; ++j) n.inputs[0]->grad[i * c + j] += n.grad[j];
  });
}

// --- nonlinearities ---------------------------------------------------------

Tensor tanh_(Tape& t, const Tensor& a) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x = std::tanh(x);
  return finish(t, "tanh", out, {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
  });
}

Tensor sigmoid(Tape& t, const Tensor& a) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x = 1.0 / (1.0 + std::exp(-x));
  return finish(t, "sigmoid", out, {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
  });
}

Tensor exp_(Tape& t, const Tensor& a) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x = std::exp(x);
  return finish(t, "exp", out, {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] * n.value[i];
  });
}

Tensor log_(Tape& t, const Tensor& a) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x = std::log(x);
  return finish(t, "log", out, {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] / n.inputs[0]->value[i];
  });
}

// --- reductions -------------------------------------------------------------

Tensor sum(Tape& t, const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  auto out = make_node({1}, {s});
  return finish(t, "sum", out, {a.node()}, [](Node& n) {
    for (double& g : n.inputs[0]->grad) g += n.grad[0];
  });
}

Tensor mean_rows(Tape& t, const Tensor& m) {
  if (m.shape().size() != 2) throw std::runtime_error("mean_rows expects rank 2");
  const int r = m.rows(), c = m.cols();
  auto out = make_node({c}, std::vector<double>(c, 0.0));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[j] += m.values()[i * c + j];
  for (double& x : out->value) x /= r;
  return finish(t, "mean_rows", out, {m.node()}, [r, c](Node& n) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        n.inputs[0]->grad[i * c + j] += n.grad[j] / r;
  });
}

Tensor add_row_broadcast(Tape& t, const Tensor& m, const Tensor& b) {
  if (m.shape().size() != 2 || b.shape().size() != 1 || b.numel() != m.cols())
    shape_error("add_row_broadcast", m, b);
  const int r = m.rows(), c = m.cols();
  auto out = make_node(m.shape(), m.values());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[i * c + j] += b.values()[j];
  return finish(t, "add_row_broadcast", out, {m.node(), b.node()},
                [r, c](Node& n) {
                  for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) {
                      n.inputs[0]->grad[i * c + j] += n.grad[i * c + j];
                      n.inputs[1]->grad[j] += n.grad[i * c + j];
                    }
                });
}

Tensor gather_rows(Tape& t, const Tensor& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2)
    throw std::runtime_error("gather_rows expects a rank-2 table");
  const int c = table.cols();
  std::vector<double> v;
  v.reserve(ids.size() * c);
  for (int id : ids) {
    if (id < 0 || id >= table.rows())
      throw std::runtime_error("gather_rows: id " + std::to_string(id) +
                               " out of range");
    v.insert(v.end(), table.values().begin() + id * c,
             table.values().begin() + (id + 1) * c);
  }
  auto out = make_node({static_cast<int>(ids.size()), c}, std::move(v));
  return finish(t, "gather_rows", out, {table.node()}, [ids, c](Node& n) {
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (int j = 0; j < c; ++j)
        n.inputs[0]->grad[ids[r] * c + j] += n.grad[r * c + j];
  });
}

// --- scalar helpers ---------------------------------------------------------

Tensor scale(Tape& t, const Tensor& a, double c) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x *= c;
  return finish(t, "scale", out, {a.node()}, [c](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i] * c;
  });
}

Tensor add_const(Tape& t, const Tensor& a, double c) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x += c;
  return finish(t, "add_const", out, {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      n.inputs[0]->grad[i] += n.grad[i];
  });
}

Tensor pick(Tape& t, const Tensor& v, int i) {
  if (v.shape().size() != 1 || i < 0 || i >= v.numel())
    throw std::runtime_error("pick index out of range");
  auto out = make_node({1}, {v.values()[i]});
  return finish(t, "pick", out, {v.node()}, [i](Node& n) {
    n.inputs[0]->grad[i] += n.grad[0];
  });
}

Tensor clamp(Tape& t, const Tensor& a, double lo, double hi) {
  auto out = make_node(a.shape(), a.values());
  for (double& x : out->value) x = std::min(hi, std::max(lo, x));
  return finish(t, "clamp", out, {a.node()}, [lo, hi](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double x = n.inputs[0]->value[i];
      if (x > lo && x < hi) n.inputs[0]->grad[i] += n.grad[i];
    }
  });
}

// --- conv -------------------------------------------------------------------

Tensor conv1d_same(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b,
                   int width) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || b.shape().size() != 1)
    throw std::runtime_error("conv1d_same: bad ranks");
  const int L = x.rows(), E = x.cols(), F = w.cols();
  if (w.rows() != width * E || b.numel() != F)
    throw std::runtime_error("conv1d_same: filter shape mismatch");
  const int pad = (width - 1) / 2;  // left pad; same padding for odd widths,
                                    // one extra cell on the right when even
  auto out = make_node({L, F}, std::vector<double>(L * F, 0.0));
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  for (int l = 0; l < L; ++l) {
    double* orow = out->value.data() + l * F;
    for (int j = 0; j < F; ++j) orow[j] = b.values()[j];
    for (int k = 0; k < width; ++k) {
      const int src = l + k - pad;
      if (src < 0 || src >= L) continue;
      const double* xr = xv + src * E;
      const double* wk = wv + k * E * F;
      for (int e = 0; e < E; ++e) {
        const double xe = xr[e];
        const double* wr = wk + e * F;
        for (int j = 0; j < F; ++j) orow[j] += xe * wr[j];
      }
    }
  }
  return finish(
      t, "conv1d_same", out, {x.node(), w.node(), b.node()},
      [L, E, F, width, pad](Node& n) {
        const double* g = n.grad.data();
        const double* xv = n.inputs[0]->value.data();
        const double* wv = n.inputs[1]->value.data();
        double* gx = n.inputs[0]->grad.data();
        double* gw = n.inputs[1]->grad.data();
        double* gb = n.inputs[2]->grad.data();
        for (int l = 0; l < L; ++l) {
          const double* gr = g + l * F;
          for (int j = 0; j < F; ++j) gb[j] += gr[j];
          for (int k = 0; k < width; ++k) {
            const int src = l + k - pad;
            if (src < 0 || src >= L) continue;
            for (int e = 0; e < E; ++e) {
              const double xe = xv[src * E + e];
              double s = 0.0;
              const double* wr = wv + (k * E + e) * F;
              double* gwr = gw + (k * E + e) * F;
              for (int j = 0; j < F; ++j) {
                s += gr[j] * wr[j];
                gwr[j] += gr[j] * xe;
              }
              gx[src * E + e] += s;
            }
          }
        }
      });
}

// --- softmax ----------------------------------------------------------------

Tensor softmax(Tape& t, const Tensor& a, int axis) {
  if (a.numel() == 0) throw std::runtime_error("softmax of empty tensor");
  const bool rank1 = a.shape().size() == 1;
  if (!rank1 && a.shape().size() != 2)
    throw std::runtime_error("softmax supports rank 1 or 2");
  const int rows = rank1 ? 1 : (axis == 1 ? a.rows() : a.cols());
  const int n = rank1 ? a.numel() : (axis == 1 ? a.cols() : a.rows());
  const int rstride = rank1 ? n : (axis == 1 ? a.cols() : 1);
  const int estride = rank1 ? 1 : (axis == 1 ? 1 : a.cols());
  auto out = make_node(a.shape(), a.values());
  for (int r = 0; r < rows; ++r) {
    double* base = out->value.data() + r * (axis == 1 || rank1 ? rstride : 1);
    double mx = base[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, base[i * estride]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      double& x = base[i * estride];
      x = std::exp(x - mx);
      z += x;
    }
    for (int i = 0; i < n; ++i) base[i * estride] /= z;
  }
  return finish(t, "softmax", out, {a.node()},
                [rows, n, rstride, estride, axis, rank1](Node& node) {
                  for (int r = 0; r < rows; ++r) {
                    const int off = r * (axis == 1 || rank1 ? rstride : 1);
                    const double* y = node.value.data() + off;
                    const double* g = node.grad.data() + off;
                    double dotv = 0.0;
                    for (int i = 0; i < n; ++i)
                      dotv += g[i * estride] * y[i * estride];
                    for (int i = 0; i < n; ++i)
                      node.inputs[0]->grad[off + i * estride] +=
                          y[i * estride] * (g[i * estride] - dotv);
                  }
                });
}

Tensor custom_op(Tape& t, const std::string& kind, std::vector<int> shape,
                 std::vector<double> value, std::vector<Tensor> inputs,
                 std::function<void(Node&)> backprop) {
  auto out = make_node(std::move(shape), std::move(value));
  std::vector<std::shared_ptr<Node>> ins;
  ins.reserve(inputs.size());
  for (const Tensor& in : inputs) ins.push_back(in.node());
  return finish(t, kind, out, std::move(ins), std::move(backprop));
}

// --- gradient check ---------------------------------------------------------

double gradient_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double eps, int max_coords,
    std::uint64_t seed) {
  // Analytic pass.
  for (Tensor& x : inputs) {
    x.node()->requires_grad = true;
    x.zero_grad();
  }
  {
    Tape tape;
    Tensor loss = f(tape, inputs);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (Tensor& x : inputs) analytic.push_back(x.grad());

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& x = inputs[ti];
    std::vector<int> coords(x.numel());
    for (int i = 0; i < x.numel(); ++i) coords[i] = i;
    if (max_coords >= 0 && max_coords < x.numel()) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (int c : coords) {
      const double orig = x.values()[c];
      double fp, fm;
      {
        Tape tape;
        tape.set_enabled(false);
        x.values()[c] = orig + eps;
        fp = f(tape, inputs).item();
        x.values()[c] = orig - eps;
        fm = f(tape, inputs).item();
        x.values()[c] = orig;
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[ti][c];
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace kgrg::ad
