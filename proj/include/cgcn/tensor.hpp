#pragma once

#include <cstddef>
#include <vector>

namespace cgcn {

/// [channels][frames][joints], row-major, contiguous.
struct Tensor3 {
  int c = 0, t = 0, n = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c_, int t_, int n_)
      : c(c_), t(t_), n(n_),
        data(static_cast<std::size_t>(c_) * static_cast<std::size_t>(t_) *
             static_cast<std::size_t>(n_), 0.0) {}

  double& at(int ci, int ti, int ni) {
    return data[(static_cast<std::size_t>(ci) * static_cast<std::size_t>(t) +
                 static_cast<std::size_t>(ti)) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(ni)];
  }
  double at(int ci, int ti, int ni) const {
    return data[(static_cast<std::size_t>(ci) * static_cast<std::size_t>(t) +
                 static_cast<std::size_t>(ti)) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(ni)];
  }
};

/// [batch][channels][frames][joints], row-major, contiguous.
struct Tensor4 {
  int b = 0, c = 0, t = 0, n = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int b_, int c_, int t_, int n_)
      : b(b_), c(c_), t(t_), n(n_),
        data(static_cast<std::size_t>(b_) * static_cast<std::size_t>(c_) *
             static_cast<std::size_t>(t_) * static_cast<std::size_t>(n_), 0.0) {}

  std::size_t index(int bi, int ci, int ti, int ni) const {
    return ((static_cast<std::size_t>(bi) * static_cast<std::size_t>(c) +
             static_cast<std::size_t>(ci)) * static_cast<std::size_t>(t) +
            static_cast<std::size_t>(ti)) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(ni);
  }
  double& at(int bi, int ci, int ti, int ni) { return data[index(bi, ci, ti, ni)]; }
  double at(int bi, int ci, int ti, int ni) const { return data[index(bi, ci, ti, ni)]; }

  bool same_shape(const Tensor4& o) const {
    return b == o.b && c == o.c && t == o.t && n == o.n;
  }
};

bool all_finite(const Tensor3& x);
bool all_finite(const Tensor4& x);

/// Copy one Tensor3 sample into batch slot bi (shapes must agree).
void place_sample(Tensor4& batch, int bi, const Tensor3& sample);

}  // namespace cgcn
