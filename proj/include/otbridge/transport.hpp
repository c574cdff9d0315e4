#pragma once

#include <span>
#include <vector>

#include "otbridge/image.hpp"

namespace otbridge {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  std::span<const double> values() const noexcept { return data_; }

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  std::vector<std::vector<double>> to_rows() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Weights over image-valued support points; weights sum to 1.
struct DiscreteMeasure {
  std::vector<double> weights;
  std::vector<GrayImage> support;

  static DiscreteMeasure point_mass(GrayImage image);
  static DiscreteMeasure uniform(std::vector<GrayImage> support);
  /// Throws InvalidArgument unless weights are >= 0, sum to 1 within 1e-12 and match the support.
  void validate() const;
};

struct CostMatrix {
  Matrix entries;
  BinaryMask editing_mask;
  double lambda_M = 1.0;
};

struct CouplingPlan {
  Matrix entries;
  double epsilon = 0.0;
  // Scalings in log form: plan = diag(exp(log_u)) exp(-C/eps) diag(exp(log_v)).
  std::vector<double> log_u;
  std::vector<double> log_v;
  int iterations = 0;
  double marginal_residual = 0.0;  // L1 over rows and columns
};

struct SinkhornOptions {
  double epsilon = 1e-2;
  int max_iter = 10000;
  double tol = 1e-9;
};

/// ||(x-y) on the complement of M||^2 + lambda_M ||(x-y) on M||^2.
double mask_aware_cost(const GrayImage& x, const GrayImage& y, const BinaryMask& M, double lambda_M);

CostMatrix build_cost_matrix(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const BinaryMask& M,
                             double lambda_M);

/// Log-domain Sinkhorn with epsilon scaling. Throws NoConvergence when the
/// marginal residual is still above `tol` after `max_iter` sweeps.
CouplingPlan sinkhorn_solve(const Matrix& C, std::span<const double> a, std::span<const double> b,
                            const SinkhornOptions& options);
CouplingPlan sinkhorn_solve(const CostMatrix& C, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                            const SinkhornOptions& options);

struct Assignment {
  std::vector<int> permutation;  // row i -> column permutation[i]
  double optimal_cost = 0.0;     // <C, P/n> for the optimal permutation matrix P
};

/// Exhaustive search over all n! permutation couplings (uniform marginals, n <= 8).
Assignment exact_ot_oracle(const Matrix& C);

/// <C, pi>.
double transport_cost(const Matrix& C, const Matrix& pi);

/// <C, pi> + eps KL(pi || a b^T), where a and b are the marginals of pi, with 0 log 0 = 0.
double transport_objective(const Matrix& C, const Matrix& pi, double epsilon);

}  // namespace otbridge
