#include "otbridge/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

namespace otbridge {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

void require_square_shape(const Matrix& C, std::size_t n, std::size_t m) {
  if (static_cast<std::size_t>(C.rows()) != n || static_cast<std::size_t>(C.cols()) != m) {
    throw Error(ErrorKind::ShapeMismatch, "cost matrix does not match marginal sizes");
  }
}

void require_probability(std::span<const double> w, const char* name) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " has a negative weight");
    total += v;
  }
  if (w.empty() || std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " weights do not sum to 1");
  }
}

// Row sums of the plan for potentials (f, g).
std::vector<double> plan_rows(const Matrix& C, const std::vector<double>& f, const std::vector<double>& g, double eps) {
  std::vector<double> rows(C.rows(), 0.0);
  for (int i = 0; i < C.rows(); ++i)
    for (int j = 0; j < C.cols(); ++j) rows[i] += std::exp((f[i] + g[j] - C(i, j)) / eps);
  return rows;
}

void soft_c_transform(const Matrix& C, const std::vector<double>& log_b, const std::vector<double>& f, double eps,
                      std::vector<double>& g) {
  std::vector<double> scratch(C.rows());
  for (int j = 0; j < C.cols(); ++j) {
    for (int i = 0; i < C.rows(); ++i) scratch[i] = (f[i] - C(i, j)) / eps;
    g[j] = eps * (log_b[j] - log_sum_exp(scratch));
  }
}

double l1_residual(const std::vector<double>& rows, std::span<const double> a) {
  double r = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) r += std::abs(rows[i] - a[i]);
  return r;
}

// One damped Newton step on the semi-dual max_f <a,f> + <b, g(f)>. The Hessian
// (diag(rows) - P diag(1/b) P^T)/eps has the constant vector in its kernel, so
// f[0] is held fixed. Returns false when no step reduces the residual.
bool newton_step(const Matrix& C, std::span<const double> a, std::span<const double> b,
                 const std::vector<double>& log_b, double eps, std::vector<double>& f, std::vector<double>& g,
                 double& residual) {
  const int n = C.rows();
  const int m = C.cols();
  if (n < 2) return false;
  Eigen::MatrixXd P(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) P(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eps);
  const Eigen::VectorXd rows = P.rowwise().sum();
  Eigen::VectorXd inv_b(m);
  for (int j = 0; j < m; ++j) inv_b[j] = b[j] > 0 ? 1.0 / b[j] : 0.0;
  Eigen::MatrixXd H = -(P * inv_b.asDiagonal() * P.transpose());
  H.diagonal() += rows;
  Eigen::VectorXd grad(n);
  for (int i = 0; i < n; ++i) grad[i] = a[i] - rows[i];
  const Eigen::MatrixXd Hr = H.bottomRightCorner(n - 1, n - 1) / eps;
  const Eigen::VectorXd step_r = Hr.ldlt().solve(grad.tail(n - 1));
  if (!step_r.allFinite()) return false;

  std::vector<double> trial_f(f), trial_g(g);
  for (double t = 1.0; t > 1e-6; t *= 0.5) {
    for (int i = 1; i < n; ++i) trial_f[i] = f[i] + t * step_r[i - 1];
    soft_c_transform(C, log_b, trial_f, eps, trial_g);
    const double r = l1_residual(plan_rows(C, trial_f, trial_g, eps), a);
    if (r < residual) {
      f.swap(trial_f);
      g.swap(trial_g);
      residual = r;
      return true;
    }
  }
  return false;
}
}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows_ = static_cast<int>(init.size());
  cols_ = rows_ ? static_cast<int>(init.begin()->size()) : 0;
  for (const auto& row : init) {
    if (static_cast<int>(row.size()) != cols_) throw Error(ErrorKind::ShapeMismatch, "ragged matrix literal");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

std::vector<double> Matrix::row_sums() const {
  std::vector<double> out(rows_, 0.0);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out[i] += (*this)(i, j);
  return out;
}

std::vector<double> Matrix::col_sums() const {
  std::vector<double> out(cols_, 0.0);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out[j] += (*this)(i, j);
  return out;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_, std::vector<double>(cols_));
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out[i][j] = (*this)(i, j);
  return out;
}

DiscreteMeasure DiscreteMeasure::point_mass(GrayImage image) {
  DiscreteMeasure m;
  m.weights = {1.0};
  m.support.push_back(std::move(image));
  return m;
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<GrayImage> support) {
  DiscreteMeasure m;
  m.weights.assign(support.size(), support.empty() ? 0.0 : 1.0 / static_cast<double>(support.size()));
  m.support = std::move(support);
  return m;
}

void DiscreteMeasure::validate() const {
  if (weights.size() != support.size()) throw Error(ErrorKind::InvalidArgument, "weights and support differ in size");
  require_probability(weights, "measure");
}

double mask_aware_cost(const GrayImage& x, const GrayImage& y, const BinaryMask& M, double lambda_M) {
  require_same_shape(x, y, "mask_aware_cost");
  require_same_shape(x, M, "mask_aware_cost");
  if (!(lambda_M >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda_M must be >= 0");
  double outside = 0.0;
  double inside = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    (M[i] ? inside : outside) += d * d;
  }
  return outside + lambda_M * inside;
}

CostMatrix build_cost_matrix(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const BinaryMask& M,
                             double lambda_M) {
  CostMatrix C{Matrix(static_cast<int>(mu0.support.size()), static_cast<int>(mu1.support.size())), M, lambda_M};
  for (std::size_t i = 0; i < mu0.support.size(); ++i)
    for (std::size_t j = 0; j < mu1.support.size(); ++j)
      C.entries(static_cast<int>(i), static_cast<int>(j)) = mask_aware_cost(mu0.support[i], mu1.support[j], M, lambda_M);
  return C;
}

CouplingPlan sinkhorn_solve(const Matrix& C, std::span<const double> a, std::span<const double> b,
                            const SinkhornOptions& options) {
  require_square_shape(C, a.size(), b.size());
  require_probability(a, "mu0");
  require_probability(b, "mu1");
  if (!(options.epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  const int n = C.rows();
  const int m = C.cols();

  std::vector<double> log_a(n), log_b(m);
  for (int i = 0; i < n; ++i) log_a[i] = a[i] > 0 ? std::log(a[i]) : kNegInf;
  for (int j = 0; j < m; ++j) log_b[j] = b[j] > 0 ? std::log(b[j]) : kNegInf;

  // Dual potentials f, g with plan_ij = exp((f_i + g_j - C_ij) / eps).
  std::vector<double> f(n, 0.0), g(m, 0.0), scratch(std::max(n, m));

  const auto update_f = [&](double eps) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) scratch[j] = (g[j] - C(i, j)) / eps;
      f[i] = eps * (log_a[i] - log_sum_exp({scratch.data(), static_cast<std::size_t>(m)}));
    }
  };
  const auto update_g = [&](double eps) {
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) scratch[i] = (f[i] - C(i, j)) / eps;
      g[j] = eps * (log_b[j] - log_sum_exp({scratch.data(), static_cast<std::size_t>(n)}));
    }
  };
  const auto residual = [&](double eps) {
    // Columns are exact after update_g; measure the row marginal error and
    // include the column error for completeness.
    double r = 0.0;
    std::vector<double> cols(m, 0.0);
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < m; ++j) {
        const double p = std::exp((f[i] + g[j] - C(i, j)) / eps);
        row += p;
        cols[j] += p;
      }
      r += std::abs(row - a[i]);
    }
    for (int j = 0; j < m; ++j) r += std::abs(cols[j] - b[j]);
    return r;
  };

  // Epsilon scaling: anneal from the cost scale down to the target.
  double scale = 0.0;
  for (double c : C.values()) scale = std::max(scale, std::abs(c));
  int iterations = 0;
  for (double eps = std::max(scale, options.epsilon); eps > options.epsilon; eps *= 0.5) {
    for (int k = 0; k < 20 && iterations < options.max_iter; ++k, ++iterations) {
      update_f(eps);
      update_g(eps);
    }
  }

  const double eps = options.epsilon;
  double r = std::numeric_limits<double>::infinity();
  const auto sinkhorn_sweep = [&] {
    update_f(eps);
    update_g(eps);
    ++iterations;
    r = residual(eps);
  };

  // Plain sweeps until the plan is roughly feasible, then damped Newton steps
  // on the semi-dual in f (g is always the exact soft c-transform, so columns
  // stay exact). Plain Sinkhorn can contract arbitrarily slowly at small eps.
  while (iterations < options.max_iter && r > std::max(options.tol, 1e-4)) {
    sinkhorn_sweep();
    if (iterations >= 200 && r < 1e-2) break;
  }
  while (iterations < options.max_iter && r > options.tol) {
    if (!newton_step(C, a, b, log_b, eps, f, g, r)) {
      sinkhorn_sweep();
    } else {
      ++iterations;
    }
  }
  if (!(r <= options.tol)) {
    std::ostringstream msg;
    msg << "Sinkhorn residual " << r << " after " << iterations << " iterations";
    throw Error(ErrorKind::NoConvergence, msg.str());
  }

  CouplingPlan plan;
  plan.entries = Matrix(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) plan.entries(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eps);
  plan.epsilon = eps;
  plan.log_u.resize(n);
  plan.log_v.resize(m);
  for (int i = 0; i < n; ++i) plan.log_u[i] = f[i] / eps;
  for (int j = 0; j < m; ++j) plan.log_v[j] = g[j] / eps;
  plan.iterations = iterations;
  plan.marginal_residual = r;
  return plan;
}

CouplingPlan sinkhorn_solve(const CostMatrix& C, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                            const SinkhornOptions& options) {
  mu0.validate();
  mu1.validate();
  return sinkhorn_solve(C.entries, mu0.weights, mu1.weights, options);
}

Assignment exact_ot_oracle(const Matrix& C) {
  if (C.rows() != C.cols()) throw Error(ErrorKind::InvalidArgument, "exact oracle needs a square cost");
  const int n = C.rows();
  if (n > 8) throw Error(ErrorKind::TooLarge, "exact oracle limited to n <= 8");
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty cost matrix");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best{perm, std::numeric_limits<double>::infinity()};
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += C(i, perm[i]);
    total /= n;
    if (total < best.optimal_cost) best = {perm, total};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double transport_cost(const Matrix& C, const Matrix& pi) {
  if (C.rows() != pi.rows() || C.cols() != pi.cols()) throw Error(ErrorKind::ShapeMismatch, "transport_cost");
  double total = 0.0;
  for (std::size_t k = 0; k < C.values().size(); ++k) total += C.values()[k] * pi.values()[k];
  return total;
}

double transport_objective(const Matrix& C, const Matrix& pi, double epsilon) {
  const double cost = transport_cost(C, pi);
  const auto a = pi.row_sums();
  const auto b = pi.col_sums();
  double kl = 0.0;
  for (int i = 0; i < pi.rows(); ++i)
    for (int j = 0; j < pi.cols(); ++j) {
      const double p = pi(i, j);
      if (p > 0.0) kl += p * std::log(p / (a[i] * b[j]));
    }
  return cost + epsilon * kl;
}

}  // namespace otbridge
