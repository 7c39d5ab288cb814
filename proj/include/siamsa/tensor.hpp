#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace siamsa {

/// Malformed user input: bad shapes, bad files, bad flags. Maps to exit code 1.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal contract was broken (non-finite value, impossible state). Exit code 2.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Axis { Channel, Scale, Height, Width, Row, Col };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::Channel: return "channel";
    case Axis::Scale: return "scale";
    case Axis::Height: return "height";
    case Axis::Width: return "width";
    case Axis::Row: return "row";
    case Axis::Col: return "col";
  }
  return "?";
}

namespace detail {

template <typename... Parts>
std::string concat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << std::forward<Parts>(parts));
  return os.str();
}

}  // namespace detail

/// Dense row-major array whose axes carry role labels.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<Axis> axes, std::vector<std::size_t> shape, double fill = 0.0)
      : axes_(std::move(axes)), shape_(std::move(shape)) {
    if (axes_.size() != shape_.size())
      throw InvalidInput("tensor: axis labels and shape rank differ");
    data_.assign(element_count(shape_), fill);
  }

  Tensor(std::vector<Axis> axes, std::vector<std::size_t> shape, std::vector<double> data)
      : axes_(std::move(axes)), shape_(std::move(shape)), data_(std::move(data)) {
    if (axes_.size() != shape_.size())
      throw InvalidInput("tensor: axis labels and shape rank differ");
    if (element_count(shape_) != data_.size())
      throw InvalidInput(detail::concat("tensor: shape holds ", element_count(shape_),
                                        " elements but data has ", data_.size()));
  }

  static Tensor chw(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0) {
    return Tensor({Axis::Channel, Axis::Height, Axis::Width}, {c, h, w}, fill);
  }
  static Tensor csw(std::size_t c, std::size_t s, std::size_t h, std::size_t w,
                    double fill = 0.0) {
    return Tensor({Axis::Channel, Axis::Scale, Axis::Height, Axis::Width}, {c, s, h, w}, fill);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({Axis::Row, Axis::Col}, {rows, cols}, fill);
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 3-axis and 4-axis element access; callers check the layout first.
  double& at(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  double at(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool has_layout(std::initializer_list<Axis> expected) const {
    return std::equal(axes_.begin(), axes_.end(), expected.begin(), expected.end());
  }

  /// Throws InvalidInput naming both layouts when the role labels differ.
  void require_layout(std::initializer_list<Axis> expected, const char* op) const {
    if (has_layout(expected)) return;
    std::ostringstream os;
    os << op << ": expected axes (";
    const char* sep = "";
    for (Axis a : expected) { os << sep << axis_name(a); sep = ", "; }
    os << ") but got " << describe();
    throw InvalidInput(os.str());
  }

  std::string describe() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < rank(); ++i)
      os << (i ? ", " : "") << axis_name(axes_[i]) << "=" << shape_[i];
    os << ")";
    return os.str();
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.axes_ == b.axes_ && a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Every operation funnels its output through here.
inline Tensor&& require_finite(Tensor&& t, const char* op) {
  if (!t.all_finite())
    throw InvariantViolation(detail::concat(op, ": produced a non-finite value"));
  return std::move(t);
}

inline void require_finite_input(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw InvalidInput(detail::concat(op, ": input holds a non-finite value"));
}

}  // namespace siamsa
