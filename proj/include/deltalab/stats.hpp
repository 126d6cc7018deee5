#pragma once

// Numerical helpers shared by the residual, signature and moderator modules.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace deltalab::stats {

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);  // n-1 denominator
double sample_sd(std::span<const double> x);

/// Adjusted Fisher-Pearson skewness G1 = sqrt(n(n-1))/(n-2) * m3/m2^1.5.
/// Requires n >= 3 and nonzero variance.
double adjusted_skewness(std::span<const double> x);

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  double rss = 0.0;
  double tss = 0.0;  // centered total sum of squares
  double r2 = 0.0;
  int n = 0;
  int p = 0;  // number of columns, intercept included
  int df_resid() const { return n - p; }
};

/// Least squares through a column-pivoting QR. Throws Error("RankDeficient")
/// when X does not have full column rank.
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Joint F test of all columns except the intercept (assumed column 0).
double overall_f(const OlsFit& fit);

double f_sf(double f, double df1, double df2);     // upper tail of F(df1, df2)
double t_two_sided_p(double t, double df);
double normal_quantile(double p);
double normal_cdf(double x);

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

TTest one_sample_t(std::span<const double> x, double mu0 = 0.0);
TTest pooled_two_sample_t(std::span<const double> a, std::span<const double> b);

/// One-way ANOVA F test across groups (each with >= 1 value, >= 2 groups).
TTest one_way_anova(const std::vector<std::vector<double>>& groups);

/// Kendall tau-b in O(n log n); ties in both variables handled.
class KendallTauB {
 public:
  /// y is the ordinal variable (compute budget, ...); x is permuted in tests.
  KendallTauB(std::span<const double> x, std::span<const double> y);
  double tau() const { return statistic(x_ranks_) / denom_; }
  /// S statistic (concordant minus discordant pairs) for a reordering of x.
  double statistic(std::span<const int> x_ranks) const;
  const std::vector<int>& x_ranks() const { return x_ranks_; }
  double denominator() const { return denom_; }

 private:
  std::vector<int> x_ranks_;           // dense ranks of x, 0-based
  std::vector<std::size_t> y_order_;   // indices sorted by y
  std::vector<std::size_t> y_breaks_;  // start offsets of equal-y groups in y_order_
  int x_levels_ = 0;
  double denom_ = 1.0;
};

/// Runs body(i) for i in [0, n) across hardware threads. Callers must make
/// each iteration depend only on i (e.g. seed substreams derived from i) so
/// results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Percentile interval from a sample of replicate statistics.
std::pair<double, double> percentile_interval(std::vector<double> replicates, double level);

/// Monte Carlo power of a two-sided pooled two-sample t test at effect d.
double mc_power_two_sample(int n_a, int n_b, double d, double alpha, int replicates, std::uint64_t seed);

/// Monte Carlo power of a two-sided one-sample t test at standardized mean d.
double mc_power_one_sample(int n, double d, double alpha, int replicates, std::uint64_t seed);

}  // namespace deltalab::stats
