#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace histo::net {

/// Dense activation block, channels-last: (sample, row, col, channel).
template <typename T>
struct Tensor {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        v(static_cast<std::size_t>(n_) * h_ * w_ * c_, T(0)) {}

  static Tensor hwc(int h_, int w_, int c_) { return Tensor(1, h_, w_, c_); }

  std::size_t sample_size() const {
    return static_cast<std::size_t>(h) * w * c;
  }
  std::size_t size() const { return v.size(); }

  T* sample(int i) { return v.data() + i * sample_size(); }
  const T* sample(int i) const { return v.data() + i * sample_size(); }

  T& at(int ni, int y, int x, int ch) {
    return v[((static_cast<std::size_t>(ni) * h + y) * w + x) * c + ch];
  }
  T at(int ni, int y, int x, int ch) const {
    return v[((static_cast<std::size_t>(ni) * h + y) * w + x) * c + ch];
  }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

}  // namespace histo::net
