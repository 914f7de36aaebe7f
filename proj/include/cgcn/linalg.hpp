#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace cgcn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Divide by the maximum entry so the peak is exactly 1; an all-zero matrix
/// is returned unchanged.
Mat max_normalized(const Mat& m);

bool all_finite(const Mat& m);

/// max |M - M^T|.
double symmetry_gap(const Mat& m);

nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);

/// FNV-1a over a byte string; used for config/propagation provenance hashes.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(const std::string& bytes);

}  // namespace cgcn
