#pragma once

// Dense N-dimensional real tensors with reverse-mode differentiation.
//
// Values are stored row-major. A Tensor is a cheap handle onto a shared
// node; copying a Tensor aliases the same storage. Gradients accumulate
// additively into nodes whose requires_grad flag is set.
//
// Recording is define-by-run: while a Tape is installed (see TapeScope),
// every primitive whose inputs require grad appends one entry. Entries are
// appended in execution order, so the tape is topologically sorted by
// construction and backward() is a single reverse sweep.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddatr {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

class ShapeError : public std::runtime_error {
 public:
  ShapeError(const std::string& op, const Shape& a, const Shape& b)
      : std::runtime_error(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b)) {}
  ShapeError(const std::string& op, const std::string& what)
      : std::runtime_error(op + ": " + what) {}
};

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& op)
      : std::runtime_error(op + ": non-finite input value") {}
};

// Strict mode makes every primitive validate its inputs for NaN/Inf.
// Off by default; gradient-check tooling and tests switch it on.
bool strict_nonfinite_checks();
void set_strict_nonfinite_checks(bool enabled);

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    std::vector<T> data(numel(shape), v);
    return from_data(std::move(shape), std::move(data), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  // Empty data means zero-fill.
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    auto node = std::make_shared<TensorNode<T>>();
    const std::size_t n = numel(shape);
    if (data.empty()) data.assign(n, T(0));
    if (data.size() != n) {
      throw ShapeError("tensor", "data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_str(shape));
    }
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  T item() const {
    if (size() != 1) throw ShapeError("item", "tensor " + shape_str(shape()) + " is not scalar");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool rg) {
    node_->requires_grad = rg;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }

  // Gradient accumulator; all-zeros when nothing has been accumulated yet.
  std::vector<T> grad() const {
    if (node_->grad.empty()) return std::vector<T>(size(), T(0));
    return node_->grad;
  }

  void zero_grad() { node_->grad.clear(); }

  void accumulate_grad(const T* g, std::size_t n) {
    if (!node_->requires_grad) return;
    if (n != size()) throw ShapeError("accumulate_grad", "gradient length mismatch");
    if (node_->grad.empty()) node_->grad.assign(size(), T(0));
    for (std::size_t i = 0; i < n; ++i) node_->grad[i] += g[i];
  }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Ordered record of primitive applications. Topological order holds by
// construction: an entry's inputs were produced by earlier entries or are
// leaves. backward() visits each entry exactly once, in reverse.
template <typename T>
class Tape {
 public:
  struct Entry {
    const char* op;
    std::vector<std::shared_ptr<TensorNode<T>>> inputs;
    std::shared_ptr<TensorNode<T>> output;
    std::function<void()> backward;
  };

  void record(Entry e) { entries_.push_back(std::move(e)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss)=1 and sweeps the tape once in reverse. Leaf
  // accumulators are additive across calls; intermediate (op output)
  // accumulators are reset per sweep so each call adds exactly one
  // gradient of the loss.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) {
      throw ShapeError("backward", "loss must be scalar, got " + shape_str(loss.shape()));
    }
    if (entries_.empty()) throw ShapeError("backward", "tape is empty");
    for (auto& e : entries_) e.output->grad.clear();
    loss.node()->grad.assign(1, T(1));
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output->grad.empty()) continue;  // no gradient flowed here
      it->backward();
    }
  }

  static Tape*& current() {
    thread_local Tape* cur = nullptr;
    return cur;
  }

 private:
  std::vector<Entry> entries_;
};

// RAII installer for the thread-local active tape.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::current()) { Tape<T>::current() = &tape; }
  ~TapeScope() { Tape<T>::current() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>* tape = Tape<T>::current();
  if (!tape) throw ShapeError("backward", "no active tape");
  tape->backward(loss);
}

}  // namespace ddatr
