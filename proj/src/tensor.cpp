#include "framescope/tensor.hpp"

#include <cstring>
#include <limits>

namespace framescope {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw ShapeError("shape " + shape_str(shape) + " overflows size_t");
    }
    n *= d;
  }
  return n;
}

template <Real T>
bool Tensor<T>::identical(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0);
}

const Shape& any_shape(const AnyTensor& t) {
  return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, t);
}

DType any_dtype(const AnyTensor& t) {
  return std::visit([](const auto& x) { return x.dtype(); }, t);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace framescope
