#include "mopred/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mopred {

namespace {

Precision g_precision = Precision::kF64;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void round_to_precision(std::vector<double>& v) {
  if (g_precision == Precision::kF32) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

bool is_scalar_shape(const Shape& s) { return shape_size(s) == 1; }

// Decomposes a shape around an axis into (outer, extent, inner) so that
// flat index = (o * extent + a) * inner + i.
struct AxisSplit {
  int64_t outer = 1;
  int64_t extent = 1;
  int64_t inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (i < axis)
      r.outer *= s[i];
    else if (i == axis)
      r.extent = s[i];
    else
      r.inner *= s[i];
  }
  return r;
}

}  // namespace

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

void set_compute_precision(Precision p) { g_precision = p; }
Precision compute_precision() { return g_precision; }

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "elementwise-mul";
    case OpKind::kScalarMul: return "scalar-mul";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmaxLastAxis: return "softmax-over-last-axis";
    case OpKind::kConcat: return "concat-along-axis";
    case OpKind::kSlice: return "slice";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSquaredL2Norm: return "squared-L2-norm";
    case OpKind::kL2Norm: return "L2-norm";
    case OpKind::kClamp: return "clamp";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != static_cast<int64_t>(data.size()))
    fail("tensor: shape " + shape_str(shape) + " does not match data length " +
         std::to_string(data.size()));
  for (int e : shape)
    if (e <= 0) fail("tensor: non-positive extent in shape " + shape_str(shape));
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_size(shape)), 0.0);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_size(shape)), value);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::uniform_init(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  std::vector<double> d(static_cast<size_t>(shape_size(shape)));
  for (double& x : d) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(d), true);
}

double Tensor::value() const {
  if (size() != 1) fail("value(): tensor is not scalar, shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(int r, int c) const {
  if (shape().size() != 2) fail("at(r,c): tensor is not rank-2");
  return impl_->data[static_cast<size_t>(r) * shape()[1] + c];
}

Tensor Tensor::detached_copy(bool requires_grad) const {
  return Tensor(impl_->shape, impl_->data, requires_grad);
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_epoch{0};
}

Tape::Tape() : epoch_(++g_tape_epoch) {}

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }
Tape* Tape::active() { return g_active_tape; }

void Tape::reset() {
  nodes_.clear();
  epoch_ = ++g_tape_epoch;
}

int Tape::attach(const Tensor& t) {
  detail::TensorImpl* impl = t.impl();
  if (impl->tape == this && impl->epoch == epoch_) return impl->node;
  Node leaf;
  leaf.op = OpKind::kAdd;  // unused for leaves
  leaf.out_shape = impl->shape;
  leaf.saved.push_back(t);
  leaf.inputs.clear();
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(leaf));
  impl->tape = this;
  impl->epoch = epoch_;
  impl->node = id;
  return id;
}

bool Tape::attached(const Tensor& t) const {
  const detail::TensorImpl* impl = t.impl();
  return impl->tape == this && impl->epoch == epoch_ && impl->node >= 0;
}

int Tape::record(OpKind op, const OpAttrs& attrs, const std::vector<int>& inputs,
                 std::vector<Shape> in_shapes, std::vector<Tensor> saved,
                 const Tensor& out) {
  Node n;
  n.op = op;
  n.attrs = attrs;
  n.inputs = inputs;
  n.saved = std::move(saved);
  n.out_shape = out.shape();
  n.in_shapes = std::move(in_shapes);
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  detail::TensorImpl* impl = out.impl();
  impl->tape = this;
  impl->epoch = epoch_;
  impl->node = id;
  return id;
}

// ---------------------------------------------------------------------------
// GradientMap

bool GradientMap::contains(const Tensor& t) const {
  return grads_.count(t.impl()) > 0;
}

const Tensor& GradientMap::at(const Tensor& t) const {
  auto it = grads_.find(t.impl());
  if (it == grads_.end()) fail("gradient map: no gradient for tensor");
  return it->second;
}

void GradientMap::insert(const detail::TensorImpl* key, Tensor grad) {
  grads_.emplace(key, std::move(grad));
}

// ---------------------------------------------------------------------------
// Forward helpers

namespace {

bool input_needs_grad(const Tensor& t) {
  Tape* tape = Tape::active();
  if (!tape) return false;
  if (t.requires_grad()) return true;
  return tape->attached(t);
}

}  // namespace

Tensor apply(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  for (const Tensor& t : inputs)
    if (!t.defined()) fail(std::string(op_name(op)) + ": undefined input tensor");

  Shape out_shape;
  std::vector<double> out;

  auto in = [&](size_t i) -> const Tensor& { return inputs[i]; };
  auto need = [&](size_t n) {
    if (inputs.size() != n)
      fail(std::string(op_name(op)) + ": expected " + std::to_string(n) +
           " inputs, got " + std::to_string(inputs.size()));
  };

  switch (op) {
    case OpKind::kMatmul: {
      need(2);
      const Shape& sa = in(0).shape();
      const Shape& sb = in(1).shape();
      if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        fail("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
      const int m = sa[0], k = sa[1], n = sb[1];
      out_shape = {m, n};
      out.assign(static_cast<size_t>(m) * n, 0.0);
      auto a = in(0).data();
      auto b = in(1).data();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double av = a[static_cast<size_t>(i) * k + p];
          if (av == 0.0) continue;
          const double* brow = &b[static_cast<size_t>(p) * n];
          double* orow = &out[static_cast<size_t>(i) * n];
          for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kScalarMul: {
      need(2);
      const bool a_scalar = is_scalar_shape(in(0).shape());
      const bool b_scalar = is_scalar_shape(in(1).shape());
      if (op == OpKind::kScalarMul && !a_scalar && !b_scalar)
        fail("scalar-mul: neither input is scalar: " + shape_str(in(0).shape()) +
             ", " + shape_str(in(1).shape()));
      if (!a_scalar && !b_scalar && in(0).shape() != in(1).shape())
        fail(std::string(op_name(op)) + ": shape mismatch " +
             shape_str(in(0).shape()) + " vs " + shape_str(in(1).shape()) +
             " (only scalar broadcasting is supported)");
      const Tensor& big = (a_scalar && !b_scalar) ? in(1) : in(0);
      out_shape = big.shape();
      const int64_t n = shape_size(out_shape);
      out.resize(static_cast<size_t>(n));
      auto a = in(0).data();
      auto b = in(1).data();
      for (int64_t i = 0; i < n; ++i) {
        const double av = a_scalar ? a[0] : a[static_cast<size_t>(i)];
        const double bv = b_scalar ? b[0] : b[static_cast<size_t>(i)];
        double r = 0.0;
        switch (op) {
          case OpKind::kAdd: r = av + bv; break;
          case OpKind::kSub: r = av - bv; break;
          default: r = av * bv; break;
        }
        out[static_cast<size_t>(i)] = r;
      }
      break;
    }
    case OpKind::kTanh:
    case OpKind::kSigmoid:
    case OpKind::kRelu:
    case OpKind::kExp:
    case OpKind::kLog:
    case OpKind::kClamp: {
      need(1);
      out_shape = in(0).shape();
      auto a = in(0).data();
      out.resize(a.size());
      for (size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        switch (op) {
          case OpKind::kTanh: out[i] = std::tanh(x); break;
          case OpKind::kSigmoid: out[i] = 1.0 / (1.0 + std::exp(-x)); break;
          case OpKind::kRelu: out[i] = x > 0.0 ? x : 0.0; break;
          case OpKind::kExp: out[i] = std::exp(x); break;
          case OpKind::kLog:
            if (x <= 0.0)
              fail("log: non-positive input " + std::to_string(x));
            out[i] = std::log(x);
            break;
          case OpKind::kClamp:
            out[i] = std::min(attrs.hi, std::max(attrs.lo, x));
            break;
          default: break;
        }
      }
      break;
    }
    case OpKind::kSoftmaxLastAxis: {
      need(1);
      out_shape = in(0).shape();
      if (out_shape.empty()) fail("softmax: rank-0 input");
      const int n = out_shape.back();
      const int64_t rows = shape_size(out_shape) / n;
      auto a = in(0).data();
      out.resize(a.size());
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = &a[static_cast<size_t>(r) * n];
        double* orow = &out[static_cast<size_t>(r) * n];
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
          orow[j] = std::exp(row[j] - mx);
          z += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= z;
      }
      break;
    }
    case OpKind::kConcat: {
      if (inputs.empty()) fail("concat: no inputs");
      const Shape& s0 = in(0).shape();
      const int axis = attrs.axis;
      if (axis < 0 || axis >= static_cast<int>(s0.size()))
        fail("concat: axis " + std::to_string(axis) + " out of range for " +
             shape_str(s0));
      int total = 0;
      for (const Tensor& t : inputs) {
        const Shape& s = t.shape();
        if (s.size() != s0.size())
          fail("concat: rank mismatch " + shape_str(s0) + " vs " + shape_str(s));
        for (int d = 0; d < static_cast<int>(s.size()); ++d)
          if (d != axis && s[d] != s0[d])
            fail("concat: shape mismatch off axis: " + shape_str(s0) + " vs " +
                 shape_str(s));
        total += s[axis];
      }
      out_shape = s0;
      out_shape[axis] = total;
      out.resize(static_cast<size_t>(shape_size(out_shape)));
      const AxisSplit sp = split_axis(out_shape, axis);
      int64_t offset = 0;
      for (const Tensor& t : inputs) {
        const int ext = t.shape()[axis];
        auto d = t.data();
        for (int64_t o = 0; o < sp.outer; ++o)
          for (int64_t a2 = 0; a2 < ext; ++a2)
            for (int64_t i = 0; i < sp.inner; ++i)
              out[static_cast<size_t>((o * sp.extent + offset + a2) * sp.inner + i)] =
                  d[static_cast<size_t>((o * ext + a2) * sp.inner + i)];
        offset += ext;
      }
      break;
    }
    case OpKind::kSlice: {
      need(1);
      const Shape& s = in(0).shape();
      const int axis = attrs.axis;
      if (axis < 0 || axis >= static_cast<int>(s.size()))
        fail("slice: axis " + std::to_string(axis) + " out of range for " +
             shape_str(s));
      if (attrs.start < 0 || attrs.length <= 0 || attrs.start + attrs.length > s[axis])
        fail("slice: window [" + std::to_string(attrs.start) + ", " +
             std::to_string(attrs.start + attrs.length) + ") out of range for " +
             shape_str(s));
      out_shape = s;
      out_shape[axis] = attrs.length;
      out.resize(static_cast<size_t>(shape_size(out_shape)));
      const AxisSplit sp = split_axis(s, axis);
      auto d = in(0).data();
      for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t a2 = 0; a2 < attrs.length; ++a2)
          for (int64_t i = 0; i < sp.inner; ++i)
            out[static_cast<size_t>((o * attrs.length + a2) * sp.inner + i)] =
                d[static_cast<size_t>((o * sp.extent + attrs.start + a2) * sp.inner + i)];
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean:
    case OpKind::kSquaredL2Norm:
    case OpKind::kL2Norm: {
      need(1);
      auto a = in(0).data();
      double acc = 0.0;
      if (op == OpKind::kSum || op == OpKind::kMean) {
        for (double x : a) acc += x;
        if (op == OpKind::kMean) acc /= static_cast<double>(a.size());
      } else {
        for (double x : a) acc += x * x;
        if (op == OpKind::kL2Norm) acc = std::sqrt(acc);
      }
      out_shape = {1};
      out = {acc};
      break;
    }
  }

  round_to_precision(out);
  Tensor result(std::move(out_shape), std::move(out));

  Tape* tape = Tape::active();
  if (tape) {
    bool needs = false;
    for (const Tensor& t : inputs) needs = needs || input_needs_grad(t);
    if (needs) {
      std::vector<int> ids;
      std::vector<Shape> in_shapes;
      ids.reserve(inputs.size());
      in_shapes.reserve(inputs.size());
      for (const Tensor& t : inputs) {
        ids.push_back(input_needs_grad(t) ? tape->attach(t) : -1);
        in_shapes.push_back(t.shape());
      }

      std::vector<Tensor> saved;
      switch (op) {
        case OpKind::kMatmul:
        case OpKind::kMul:
        case OpKind::kScalarMul:
          saved = {inputs[0], inputs[1]};
          break;
        case OpKind::kTanh:
        case OpKind::kSigmoid:
        case OpKind::kExp:
        case OpKind::kSoftmaxLastAxis:
          saved = {result};
          break;
        case OpKind::kRelu:
        case OpKind::kLog:
        case OpKind::kClamp:
        case OpKind::kSquaredL2Norm:
          saved = {inputs[0]};
          break;
        case OpKind::kL2Norm:
          saved = {inputs[0], result};
          break;
        default:
          break;  // shape-only backward
      }
      tape->record(op, attrs, ids, std::move(in_shapes), std::move(saved), result);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Backward

GradientMap Tape::backward(const Tensor& loss) {
  if (nodes_.empty()) fail("backward: tape is empty");
  if (loss.size() != 1)
    fail("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  detail::TensorImpl* li = loss.impl();
  if (li->tape != this || li->epoch != epoch_ || li->node < 0)
    fail("backward: loss is not attached to this tape");

  std::vector<std::vector<double>> grad(nodes_.size());
  auto ensure = [&](int id) -> std::vector<double>& {
    auto& g = grad[static_cast<size_t>(id)];
    if (g.empty())
      g.assign(static_cast<size_t>(shape_size(nodes_[static_cast<size_t>(id)].out_shape)), 0.0);
    return g;
  };
  ensure(li->node)[0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const auto& g = grad[static_cast<size_t>(id)];
    if (g.empty() || n.inputs.empty()) continue;

    auto add_into = [&](int input_idx, auto&& fn) {
      const int in_id = n.inputs[static_cast<size_t>(input_idx)];
      if (in_id < 0) return;
      fn(ensure(in_id));
    };

    switch (n.op) {
      case OpKind::kMatmul: {
        const Tensor& a = n.saved[0];
        const Tensor& b = n.saved[1];
        const int m = a.shape()[0], k = a.shape()[1], nn = b.shape()[1];
        add_into(0, [&](std::vector<double>& ga) {
          // dA = dC * B^T
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* br = &b.data()[static_cast<size_t>(p) * nn];
              const double* gr = &g[static_cast<size_t>(i) * nn];
              for (int j = 0; j < nn; ++j) acc += gr[j] * br[j];
              ga[static_cast<size_t>(i) * k + p] += acc;
            }
        });
        add_into(1, [&](std::vector<double>& gb) {
          // dB = A^T * dC
          for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
              const double av = a.data()[static_cast<size_t>(i) * k + p];
              if (av == 0.0) continue;
              const double* gr = &g[static_cast<size_t>(i) * nn];
              double* gbr = &gb[static_cast<size_t>(p) * nn];
              for (int j = 0; j < nn; ++j) gbr[j] += av * gr[j];
            }
        });
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign1 = n.op == OpKind::kSub ? -1.0 : 1.0;
        for (int side = 0; side < 2; ++side) {
          const double sgn = side == 0 ? 1.0 : sign1;
          add_into(side, [&](std::vector<double>& gi) {
            if (gi.size() == g.size()) {
              for (size_t i = 0; i < g.size(); ++i) gi[i] += sgn * g[i];
            } else {  // scalar side
              double acc = 0.0;
              for (double x : g) acc += x;
              gi[0] += sgn * acc;
            }
          });
        }
        break;
      }
      case OpKind::kMul:
      case OpKind::kScalarMul: {
        const Tensor& a = n.saved[0];
        const Tensor& b = n.saved[1];
        const bool a_scalar = a.size() == 1 && g.size() > 1;
        const bool b_scalar = b.size() == 1 && g.size() > 1;
        add_into(0, [&](std::vector<double>& ga) {
          if (a_scalar) {
            double acc = 0.0;
            for (size_t i = 0; i < g.size(); ++i)
              acc += g[i] * b.data()[b_scalar ? 0 : i];
            ga[0] += acc;
          } else {
            for (size_t i = 0; i < g.size(); ++i)
              ga[i] += g[i] * b.data()[b_scalar ? 0 : i];
          }
        });
        add_into(1, [&](std::vector<double>& gb) {
          if (b_scalar) {
            double acc = 0.0;
            for (size_t i = 0; i < g.size(); ++i)
              acc += g[i] * a.data()[a_scalar ? 0 : i];
            gb[0] += acc;
          } else {
            for (size_t i = 0; i < g.size(); ++i)
              gb[i] += g[i] * a.data()[a_scalar ? 0 : i];
          }
        });
        break;
      }
      case OpKind::kTanh: {
        const Tensor& y = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i) {
            const double t = y.data()[i];
            gi[i] += g[i] * (1.0 - t * t);
          }
        });
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& y = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i) {
            const double s = y.data()[i];
            gi[i] += g[i] * s * (1.0 - s);
          }
        });
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i)
            if (x.data()[i] > 0.0) gi[i] += g[i];
        });
        break;
      }
      case OpKind::kExp: {
        const Tensor& y = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * y.data()[i];
        });
        break;
      }
      case OpKind::kLog: {
        const Tensor& x = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i] / x.data()[i];
        });
        break;
      }
      case OpKind::kClamp: {
        const Tensor& x = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < g.size(); ++i) {
            const double v = x.data()[i];
            if (v > n.attrs.lo && v < n.attrs.hi) gi[i] += g[i];
          }
        });
        break;
      }
      case OpKind::kSoftmaxLastAxis: {
        const Tensor& y = n.saved[0];
        const int len = n.out_shape.back();
        const int64_t rows = shape_size(n.out_shape) / len;
        add_into(0, [&](std::vector<double>& gi) {
          for (int64_t r = 0; r < rows; ++r) {
            const double* yr = &y.data()[static_cast<size_t>(r) * len];
            const double* gr = &g[static_cast<size_t>(r) * len];
            double dot = 0.0;
            for (int j = 0; j < len; ++j) dot += gr[j] * yr[j];
            double* gir = &gi[static_cast<size_t>(r) * len];
            for (int j = 0; j < len; ++j) gir[j] += yr[j] * (gr[j] - dot);
          }
        });
        break;
      }
      case OpKind::kConcat: {
        const AxisSplit sp = split_axis(n.out_shape, n.attrs.axis);
        int64_t offset = 0;
        for (size_t idx = 0; idx < n.inputs.size(); ++idx) {
          const int ext = n.in_shapes[idx][static_cast<size_t>(n.attrs.axis)];
          if (n.inputs[idx] >= 0) {
            std::vector<double>& gi = ensure(n.inputs[idx]);
            for (int64_t o = 0; o < sp.outer; ++o)
              for (int64_t a2 = 0; a2 < ext; ++a2)
                for (int64_t i = 0; i < sp.inner; ++i)
                  gi[static_cast<size_t>((o * ext + a2) * sp.inner + i)] +=
                      g[static_cast<size_t>((o * sp.extent + offset + a2) * sp.inner + i)];
          }
          offset += ext;
        }
        break;
      }
      case OpKind::kSlice: {
        const Shape& s = n.in_shapes[0];
        const AxisSplit sp = split_axis(s, n.attrs.axis);
        add_into(0, [&](std::vector<double>& gi) {
          for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t a2 = 0; a2 < n.attrs.length; ++a2)
              for (int64_t i = 0; i < sp.inner; ++i)
                gi[static_cast<size_t>((o * sp.extent + n.attrs.start + a2) * sp.inner + i)] +=
                    g[static_cast<size_t>((o * n.attrs.length + a2) * sp.inner + i)];
        });
        break;
      }
      case OpKind::kSum:
      case OpKind::kMean: {
        add_into(0, [&](std::vector<double>& gi) {
          const double f = n.op == OpKind::kMean
                               ? g[0] / static_cast<double>(gi.size())
                               : g[0];
          for (double& x : gi) x += f;
        });
        break;
      }
      case OpKind::kSquaredL2Norm: {
        const Tensor& x = n.saved[0];
        add_into(0, [&](std::vector<double>& gi) {
          for (size_t i = 0; i < gi.size(); ++i) gi[i] += g[0] * 2.0 * x.data()[i];
        });
        break;
      }
      case OpKind::kL2Norm: {
        const Tensor& x = n.saved[0];
        const double nv = n.saved[1].value();
        add_into(0, [&](std::vector<double>& gi) {
          if (nv == 0.0) return;  // subgradient 0 at the origin
          for (size_t i = 0; i < gi.size(); ++i) gi[i] += g[0] * x.data()[i] / nv;
        });
        break;
      }
    }
  }

  GradientMap result;
  for (size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (!n.inputs.empty() || n.saved.empty()) continue;  // not a leaf
    const Tensor& leaf = n.saved[0];
    if (!leaf.requires_grad()) continue;
    std::vector<double> gv = grad[id].empty()
                                 ? std::vector<double>(static_cast<size_t>(leaf.size()), 0.0)
                                 : std::move(grad[id]);
    result.insert(leaf.impl(), Tensor(leaf.shape(), std::move(gv)));
  }
  reset();
  return result;
}

// ---------------------------------------------------------------------------
// Convenience wrappers

namespace {
Tensor apply2(OpKind op, const Tensor& a, const Tensor& b, const OpAttrs& at = {}) {
  const Tensor ins[2] = {a, b};
  return apply(op, std::span<const Tensor>(ins, 2), at);
}
Tensor apply1(OpKind op, const Tensor& a, const OpAttrs& at = {}) {
  return apply(op, std::span<const Tensor>(&a, 1), at);
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return apply2(OpKind::kMatmul, a, b); }
Tensor add(const Tensor& a, const Tensor& b) { return apply2(OpKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return apply2(OpKind::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return apply2(OpKind::kMul, a, b); }
Tensor scalar_mul(const Tensor& x, const Tensor& s) { return apply2(OpKind::kScalarMul, x, s); }
Tensor scale(const Tensor& x, double c) { return scalar_mul(x, Tensor::scalar(c)); }
Tensor tanh_op(const Tensor& x) { return apply1(OpKind::kTanh, x); }
Tensor sigmoid_op(const Tensor& x) { return apply1(OpKind::kSigmoid, x); }
Tensor relu_op(const Tensor& x) { return apply1(OpKind::kRelu, x); }
Tensor exp_op(const Tensor& x) { return apply1(OpKind::kExp, x); }
Tensor log_op(const Tensor& x) { return apply1(OpKind::kLog, x); }
Tensor softmax_last_axis(const Tensor& x) { return apply1(OpKind::kSoftmaxLastAxis, x); }
Tensor concat(std::span<const Tensor> parts, int axis) {
  OpAttrs at;
  at.axis = axis;
  return apply(OpKind::kConcat, parts, at);
}
Tensor slice(const Tensor& x, int axis, int start, int length) {
  OpAttrs at;
  at.axis = axis;
  at.start = start;
  at.length = length;
  return apply1(OpKind::kSlice, x, at);
}
Tensor sum(const Tensor& x) { return apply1(OpKind::kSum, x); }
Tensor mean(const Tensor& x) { return apply1(OpKind::kMean, x); }
Tensor squared_norm(const Tensor& x) { return apply1(OpKind::kSquaredL2Norm, x); }
Tensor norm(const Tensor& x) { return apply1(OpKind::kL2Norm, x); }
Tensor clamp(const Tensor& x, double lo, double hi) {
  OpAttrs at;
  at.lo = lo;
  at.hi = hi;
  return apply1(OpKind::kClamp, x, at);
}

// ---------------------------------------------------------------------------
// Finite differences

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               const Tensor& point, double h) {
  if (h <= 0.0) fail("finite_difference_check: h must be positive");

  Tensor x = point.detached_copy(true);
  Tensor analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = f(x);
    if (y.size() != 1) fail("finite_difference_check: f must return a scalar");
    if (!std::isfinite(y.value()))
      fail("finite_difference_check: non-finite value of f");
    GradientMap grads = tape.backward(y);
    analytic = grads.contains(x) ? grads.at(x) : Tensor::zeros(x.shape());
  }

  double worst = 0.0;
  for (int64_t i = 0; i < point.size(); ++i) {
    Tensor hi = point.detached_copy(false);
    Tensor lo = point.detached_copy(false);
    hi.mutable_data()[static_cast<size_t>(i)] += h;
    lo.mutable_data()[static_cast<size_t>(i)] -= h;
    const double fh = f(hi).value();
    const double fl = f(lo).value();
    if (!std::isfinite(fh) || !std::isfinite(fl))
      fail("finite_difference_check: non-finite value of f");
    const double numeric = (fh - fl) / (2.0 * h);
    const double a = analytic.data()[static_cast<size_t>(i)];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// ADAM

void adam_step(ParamMap& params, const GradValueMap& grads, AdamState& state) {
  state.t += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) fail("adam_step: missing gradient for parameter " + name);
    const std::vector<double>& g = git->second;
    if (static_cast<int64_t>(g.size()) != p.size())
      fail("adam_step: gradient size mismatch for parameter " + name);

    std::vector<double>& m = state.m[name];
    std::vector<double>& v = state.v[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);

    auto pd = p.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      pd[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

void accumulate_grads(const ParamMap& params, const GradientMap& grads,
                      GradValueMap& into) {
  for (const auto& [name, p] : params) {
    std::vector<double>& acc = into[name];
    if (acc.empty()) acc.assign(static_cast<size_t>(p.size()), 0.0);
    if (!grads.contains(p)) continue;
    auto g = grads.at(p).data();
    for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  }
}

}  // namespace mopred
