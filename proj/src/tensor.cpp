#include "cgcn/tensor.hpp"

#include <cmath>

#include "cgcn/error.hpp"

namespace cgcn {

bool all_finite(const Tensor3& x) {
  for (double v : x.data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_finite(const Tensor4& x) {
  for (double v : x.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void place_sample(Tensor4& batch, int bi, const Tensor3& sample) {
  require(batch.c == sample.c && batch.t == sample.t && batch.n == sample.n,
          Errc::ShapeMismatch, "sample shape does not match batch tensor");
  require(bi >= 0 && bi < batch.b, Errc::IndexOutOfRange, "batch slot out of range");
  const std::size_t stride = sample.data.size();
  std::copy(sample.data.begin(), sample.data.end(),
            batch.data.begin() + static_cast<std::ptrdiff_t>(stride * static_cast<std::size_t>(bi)));
}

}  // namespace cgcn
