#pragma once

#include <vector>

#include "cgcn/graph.hpp"
#include "cgcn/linalg.hpp"

namespace cgcn {

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.
/// Throws IsolatedNode when a node has zero degree.
Mat laplacian(const WeightedAdjacency& adj);

/// Dense eigendecomposition of a symmetric Laplacian. Verification path only;
/// the production convolution never decomposes.
struct SpectralDecomposition {
  Mat U;        // orthogonal eigenvectors, columns
  Vec lambda;   // ascending eigenvalues
  double lambda_max = 0.0;
};

SpectralDecomposition decompose_laplacian(const Mat& laplacian);

/// Exact spectral filtering: U diag(theta) U^T x.
Vec spectral_conv_exact(const SpectralDecomposition& decomp, const Vec& theta, const Vec& x);

/// Chebyshev polynomial of the first kind, T_m(x) = 2x T_{m-1}(x) - T_{m-2}(x).
double chebyshev_t(int m, double x);
Mat chebyshev_t(int m, const Mat& x);

struct ChebyshevFilter {
  int order = 1;                 // M
  std::vector<double> coeffs;    // theta', size M+1
  double lambda_max = 2.0;
};

/// Truncated expansion sum_m theta'_m T_m(L_hat) x with
/// L_hat = (2/lambda_max) L - I, evaluated by the two-term vector recurrence.
Vec chebyshev_conv(const ChebyshevFilter& filter, const Mat& laplacian, const Vec& x);

/// Single-parameter linear form theta (I + D^{-1/2} A D^{-1/2}) x.
Vec linear_conv(const WeightedAdjacency& adj, double theta, const Vec& x);

/// The operator I + D^{-1/2} A D^{-1/2} as a dense matrix (test surface for
/// the eigenvalue-range invariant).
Mat linear_operator(const WeightedAdjacency& adj);

}  // namespace cgcn
