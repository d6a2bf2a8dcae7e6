#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nom {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major array. Values are float by default; the double
// instantiation backs the finite-difference oracle path.
template <typename T>
struct DenseArrayT {
  std::vector<int64_t> shape;
  std::vector<T> data;

  DenseArrayT() = default;
  DenseArrayT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (size_from_shape(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("DenseArray: shape/data size mismatch");
  }

  static int64_t size_from_shape(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t e : s) {
      if (e < 0) throw ShapeError("DenseArray: negative extent");
      n *= e;
    }
    return n;
  }

  static DenseArrayT zeros(std::vector<int64_t> s) {
    int64_t n = size_from_shape(s);
    return DenseArrayT(std::move(s), std::vector<T>(static_cast<size_t>(n), T(0)));
  }

  static DenseArrayT full(std::vector<int64_t> s, T v) {
    int64_t n = size_from_shape(s);
    return DenseArrayT(std::move(s), std::vector<T>(static_cast<size_t>(n), v));
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }

  // 2-D accessors; most model arrays are [rows x cols].
  int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
  int64_t cols() const {
    if (shape.size() < 2) return shape.size() == 1 ? 1 : 0;
    int64_t c = 1;
    for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }
  T& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  T at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const DenseArrayT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }

  template <typename U>
  DenseArrayT<U> cast() const {
    DenseArrayT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using DenseArray = DenseArrayT<float>;
using DenseArray64 = DenseArrayT<double>;

inline void require_same_shape(const std::vector<int64_t>& a, const std::vector<int64_t>& b,
                               const char* op) {
  if (a != b) {
    DenseArrayT<float> ta, tb;
    ta.shape = a;
    tb.shape = b;
    throw ShapeError(std::string(op) + ": shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  }
}

}  // namespace nom
