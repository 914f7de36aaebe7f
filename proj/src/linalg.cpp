#include "cgcn/linalg.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cgcn/error.hpp"

namespace cgcn {

Mat max_normalized(const Mat& m) {
  const double peak = m.maxCoeff();
  if (peak <= 0.0) return m;
  return m / peak;
}

bool all_finite(const Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j))) return false;
  return true;
}

double symmetry_gap(const Mat& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  require(j.is_array() && !j.empty() && j[0].is_array(), Errc::SchemaViolation,
          "matrix must be a non-empty array of arrays");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    require(j[i].is_array() && static_cast<Eigen::Index>(j[i].size()) == cols,
            Errc::SchemaViolation, "ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      require(j[i][c].is_number(), Errc::SchemaViolation, "matrix entries must be numbers");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace cgcn
