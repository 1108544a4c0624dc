#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sdccrn {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major n-d array. Always contiguous.
template <typename T>
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {
    for (int64_t d : shape_)
      if (d <= 0) throw std::invalid_argument("NdArray: nonpositive dim in " + shape_str(shape_));
  }
  NdArray(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
      throw std::invalid_argument("NdArray: data size does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  // Convenience accessor for tests and small code paths (row-major).
  template <typename... Ix>
  T& at(Ix... ix) {
    return data_[static_cast<size_t>(offset_of({static_cast<int64_t>(ix)...}))];
  }
  template <typename... Ix>
  const T& at(Ix... ix) const {
    return data_[static_cast<size_t>(offset_of({static_cast<int64_t>(ix)...}))];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  NdArray<T> reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw std::invalid_argument("reshape: numel mismatch " + shape_str(shape_) + " -> " + shape_str(s));
    return NdArray<T>(std::move(s), data_);
  }

  bool same_shape(const NdArray<T>& o) const { return shape_ == o.shape_; }

  template <typename U>
  NdArray<U> cast() const {
    NdArray<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

 private:
  int64_t offset_of(std::initializer_list<int64_t> ix) const {
    if (ix.size() != shape_.size()) throw std::invalid_argument("at(): rank mismatch");
    int64_t off = 0;
    size_t k = 0;
    for (int64_t i : ix) {
      off = off * shape_[k] + i;
      ++k;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace sdccrn
