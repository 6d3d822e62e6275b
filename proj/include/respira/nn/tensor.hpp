#pragma once
#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "respira/core/error.hpp"

namespace respira::nn {

// Dense row-major tensor. Shapes are small so they live in a plain vector;
// all heavy math happens on the flat data() span.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    v.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }

  static int64_t numel_of(const std::vector<int>& shp) {
    int64_t n = 1;
    for (int d : shp) n *= d;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  void fill(S value) { std::fill(v.begin(), v.end(), value); }

  bool same_shape(const std::vector<int>& other) const { return shape == other; }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
    return out;
  }
};

inline std::string shape_string(const std::vector<int>& shp) {
  std::string s = "(";
  for (size_t i = 0; i < shp.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shp[i]);
  }
  return s + ")";
}

template <typename S>
void check_shape(const Tensor<S>& t, const std::vector<int>& expect, const char* what) {
  if (!t.same_shape(expect))
    throw data_error(std::string(what) + ": expected shape " + shape_string(expect) + ", got " +
                     shape_string(t.shape));
}

}  // namespace respira::nn
