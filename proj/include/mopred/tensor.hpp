#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mopred/rng.hpp"

namespace mopred {

using Shape = std::vector<int>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Compute precision for primitive applications. kF32 rounds every op result
// to float, emulating single-precision training on double storage.
enum class Precision { kF64, kF32 };
void set_compute_precision(Precision p);
Precision compute_precision();

class Tape;

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Tape attachment; valid only while (tape, epoch) matches the active tape.
  const Tape* tape = nullptr;
  std::uint64_t epoch = 0;
  int node = -1;
};
}  // namespace detail

// Dense row-major tensor. Value-semantic handle over shared storage; ops
// never mutate existing tensors, so sharing is safe.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor uniform_init(Shape shape, int fan_in, Rng& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t size() const { return static_cast<int64_t>(impl_->data.size()); }
  std::span<const double> data() const { return impl_->data; }
  // In-place access for leaves (parameter updates); never use on tensors that
  // are inputs of a pending backward pass.
  std::span<double> mutable_data() { return impl_->data; }
  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  double value() const;        // scalar tensors only
  double at(int r, int c) const;  // rank-2 access
  Tensor detached_copy(bool requires_grad = false) const;

  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

enum class OpKind {
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kTanh,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kSoftmaxLastAxis,
  kConcat,
  kSlice,
  kSum,
  kMean,
  kSquaredL2Norm,
  kL2Norm,
  kClamp,
};

const char* op_name(OpKind k);

struct OpAttrs {
  int axis = 0;
  int start = 0;
  int length = 0;
  double lo = 0.0;
  double hi = 0.0;
};

// Applies a primitive. Records on the active tape when any input needs
// gradients; otherwise a pure computation.
Tensor apply(OpKind op, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, const Tensor& s);
Tensor scale(const Tensor& x, double c);  // scalar_mul against a constant
Tensor tanh_op(const Tensor& x);
Tensor sigmoid_op(const Tensor& x);
Tensor relu_op(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor softmax_last_axis(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor squared_norm(const Tensor& x);
Tensor norm(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Gradients of a backward pass, keyed by leaf tensor identity.
class GradientMap {
 public:
  bool contains(const Tensor& t) const;
  const Tensor& at(const Tensor& t) const;
  size_t size() const { return grads_.size(); }
  void insert(const detail::TensorImpl* key, Tensor grad);

 private:
  std::unordered_map<const detail::TensorImpl*, Tensor> grads_;
};

// Records primitive applications for reverse-mode differentiation. One tape
// per loss evaluation; backward() consumes and resets it.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation; ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* active();

  size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void reset();

  // Gradient of a scalar loss w.r.t. every requires_grad leaf reachable on
  // this tape. Resets the tape.
  GradientMap backward(const Tensor& loss);

  int attach(const Tensor& t);  // leaf registration
  bool attached(const Tensor& t) const;
  int record(OpKind op, const OpAttrs& attrs, const std::vector<int>& inputs,
             std::vector<Shape> in_shapes, std::vector<Tensor> saved,
             const Tensor& out);

 private:
  struct Node {
    OpKind op;
    OpAttrs attrs;
    std::vector<int> inputs;  // -1 marks a constant input
    std::vector<Tensor> saved;
    Shape out_shape;
    std::vector<Shape> in_shapes;
  };

  std::vector<Node> nodes_;
  std::uint64_t epoch_ = 0;

  friend class GradientMap;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must be pure and deterministic; non-finite values raise.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               const Tensor& point, double h);

using ParamMap = std::map<std::string, Tensor>;
using GradValueMap = std::map<std::string, std::vector<double>>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long t = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// Bias-corrected ADAM update, in place. Every parameter must have a gradient.
void adam_step(ParamMap& params, const GradValueMap& grads, AdamState& state);

// Accumulates tape gradients into a named value map (sums across calls).
void accumulate_grads(const ParamMap& params, const GradientMap& grads,
                      GradValueMap& into);

}  // namespace mopred
