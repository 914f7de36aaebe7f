#include "cgcn/spectral.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "cgcn/error.hpp"

namespace cgcn {

namespace {

Vec inv_sqrt_degrees(const Mat& adj) {
  const auto n = adj.rows();
  Vec inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double deg = adj.row(i).sum();
    require(deg > 0.0, Errc::IsolatedNode, "node " + std::to_string(i) + " has zero degree");
    inv(i) = 1.0 / std::sqrt(deg);
  }
  return inv;
}

// D^{-1/2} A D^{-1/2}, mirrored for exact symmetry.
Mat normalized_adjacency(const Mat& adj) {
  const Vec inv = inv_sqrt_degrees(adj);
  const auto n = adj.rows();
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = adj(i, i) * inv(i) * inv(i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = adj(i, j) * inv(i) * inv(j);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace

Mat laplacian(const WeightedAdjacency& adj) {
  require(adj.matrix.rows() == adj.matrix.cols(), Errc::DimensionMismatch,
          "adjacency must be square");
  require(symmetry_gap(adj.matrix) == 0.0, Errc::ShapeMismatch, "adjacency must be symmetric");
  require(adj.matrix.minCoeff() >= 0.0, Errc::NegativeWeight, "adjacency must be nonnegative");
  Mat l = -normalized_adjacency(adj.matrix);
  l.diagonal().array() += 1.0;
  return l;
}

SpectralDecomposition decompose_laplacian(const Mat& laplacian) {
  require(laplacian.rows() == laplacian.cols(), Errc::DimensionMismatch,
          "laplacian must be square");
  Eigen::SelfAdjointEigenSolver<Mat> solver(laplacian);
  require(solver.info() == Eigen::Success, Errc::NonFiniteActivation,
          "eigendecomposition failed");
  SpectralDecomposition d;
  d.U = solver.eigenvectors();
  d.lambda = solver.eigenvalues();
  d.lambda_max = d.lambda(d.lambda.size() - 1);
  return d;
}

Vec spectral_conv_exact(const SpectralDecomposition& decomp, const Vec& theta, const Vec& x) {
  require(theta.size() == decomp.lambda.size() && x.size() == decomp.lambda.size(),
          Errc::DimensionMismatch, "filter/signal size must match the decomposition");
  return decomp.U * (theta.asDiagonal() * (decomp.U.transpose() * x));
}

double chebyshev_t(int m, double x) {
  require(m >= 0, Errc::InvalidConfig, "Chebyshev order must be nonnegative");
  if (m == 0) return 1.0;
  if (m == 1) return x;
  double t0 = 1.0, t1 = x;
  for (int k = 2; k <= m; ++k) {
    const double t2 = 2.0 * x * t1 - t0;
    t0 = t1;
    t1 = t2;
  }
  return t1;
}

Mat chebyshev_t(int m, const Mat& x) {
  require(m >= 0, Errc::InvalidConfig, "Chebyshev order must be nonnegative");
  require(x.rows() == x.cols(), Errc::DimensionMismatch, "matrix argument must be square");
  const Mat eye = Mat::Identity(x.rows(), x.cols());
  if (m == 0) return eye;
  if (m == 1) return x;
  Mat t0 = eye, t1 = x;
  for (int k = 2; k <= m; ++k) {
    Mat t2 = 2.0 * x * t1 - t0;
    t0 = std::move(t1);
    t1 = std::move(t2);
  }
  return t1;
}

Vec chebyshev_conv(const ChebyshevFilter& filter, const Mat& laplacian, const Vec& x) {
  require(filter.lambda_max > 0.0, Errc::InvalidConfig, "lambda_max must be positive");
  require(filter.order >= 0 &&
              filter.coeffs.size() == static_cast<std::size_t>(filter.order) + 1,
          Errc::InvalidConfig, "need order+1 Chebyshev coefficients");
  require(laplacian.rows() == laplacian.cols() && laplacian.rows() == x.size(),
          Errc::DimensionMismatch, "laplacian/signal shapes disagree");

  Mat l_hat = (2.0 / filter.lambda_max) * laplacian;
  l_hat.diagonal().array() -= 1.0;

  Vec t_prev = x;                       // T_0(L_hat) x
  Vec z = filter.coeffs[0] * t_prev;
  if (filter.order == 0) return z;
  Vec t_cur = l_hat * x;                // T_1(L_hat) x
  z += filter.coeffs[1] * t_cur;
  for (int m = 2; m <= filter.order; ++m) {
    Vec t_next = 2.0 * (l_hat * t_cur) - t_prev;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
    z += filter.coeffs[static_cast<std::size_t>(m)] * t_cur;
  }
  return z;
}

Mat linear_operator(const WeightedAdjacency& adj) {
  require(adj.matrix.rows() == adj.matrix.cols(), Errc::DimensionMismatch,
          "adjacency must be square");
  Mat op = normalized_adjacency(adj.matrix);
  op.diagonal().array() += 1.0;
  return op;
}

Vec linear_conv(const WeightedAdjacency& adj, double theta, const Vec& x) {
  require(adj.matrix.rows() == x.size(), Errc::DimensionMismatch,
          "signal length must match node count");
  return theta * (linear_operator(adj) * x);
}

}  // namespace cgcn
