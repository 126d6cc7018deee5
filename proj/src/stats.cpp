#include "deltalab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw Error("TooFewObservations", "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw Error("TooFewObservations", "variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double adjusted_skewness(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 3) throw Error("TooFewObservations", "skewness needs at least three values");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 <= 1e-300) throw Error("ZeroVariance", "skewness of a constant sample");
  return std::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / std::pow(m2, 1.5);
}

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error("InvalidInputs", "design/response length mismatch");
  if (X.rows() <= X.cols())
    throw Error("TooFewObservations", fmt::format("{} rows for {} columns", X.rows(), X.cols()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols())
    throw Error("RankDeficient", fmt::format("design matrix rank {} < {} columns", qr.rank(), X.cols()));
  OlsFit fit;
  fit.n = static_cast<int>(X.rows());
  fit.p = static_cast<int>(X.cols());
  fit.coef = qr.solve(y);
  const Eigen::VectorXd resid = y - X * fit.coef;
  fit.rss = resid.squaredNorm();
  fit.tss = (y.array() - y.mean()).square().sum();
  fit.r2 = fit.tss > 0 ? 1.0 - fit.rss / fit.tss : 0.0;
  const double sigma2 = fit.rss / fit.df_resid();
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  fit.se = (sigma2 * xtx_inv.diagonal().array()).sqrt();
  return fit;
}

double overall_f(const OlsFit& fit) {
  const double df1 = fit.p - 1;
  const double df2 = fit.df_resid();
  if (df1 <= 0) return 0.0;
  const double ess = std::max(fit.tss - fit.rss, 0.0);
  if (fit.rss <= 0) return std::numeric_limits<double>::infinity();
  return (ess / df1) / (fit.rss / df2);
}

double f_sf(double f, double df1, double df2) {
  if (!(f > 0)) return 1.0;
  if (!std::isfinite(f)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }
double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

TTest one_sample_t(std::span<const double> x, double mu0) {
  if (x.size() < 2) throw Error("TooFewObservations", "t test needs at least two values");
  const double sd = sample_sd(x);
  TTest r;
  r.df = static_cast<double>(x.size() - 1);
  const double diff = mean(x) - mu0;
  if (sd == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  } else {
    r.t = diff / (sd / std::sqrt(static_cast<double>(x.size())));
  }
  r.p = diff == 0.0 ? 1.0 : t_two_sided_p(r.t, r.df);
  return r;
}

TTest pooled_two_sample_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("TooFew", "two-sample t test needs n >= 2 per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sp2 = ((na - 1) * sample_variance(a) + (nb - 1) * sample_variance(b)) / (na + nb - 2);
  TTest r;
  r.df = na + nb - 2;
  const double diff = mean(a) - mean(b);
  if (sp2 == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  } else {
    r.t = diff / std::sqrt(sp2 * (1 / na + 1 / nb));
  }
  r.p = diff == 0.0 ? 1.0 : t_two_sided_p(r.t, r.df);
  return r;
}

TTest one_way_anova(const std::vector<std::vector<double>>& groups) {
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("TooFewObservations", "empty ANOVA group");
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const auto k = groups.size();
  if (k < 2 || n <= k) throw Error("TooFewObservations", "ANOVA needs >= 2 groups and n > k");
  grand /= static_cast<double>(n);
  double between = 0.0, within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) within += (v - m) * (v - m);
  }
  TTest r;
  r.df = static_cast<double>(n - k);
  const double df1 = static_cast<double>(k - 1);
  if (within == 0.0) {
    r.t = between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p = between == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = (between / df1) / (within / r.df);
  r.p = f_sf(r.t, df1, r.df);
  return r;
}

// ---- Kendall tau-b ---------------------------------------------------------

namespace {

std::vector<int> dense_ranks(std::span<const double> v, int& levels) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<int> ranks(v.size());
  int r = -1;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k == 0 || v[idx[k]] != v[idx[k - 1]]) ++r;
    ranks[idx[k]] = r;
  }
  levels = r + 1;
  return ranks;
}

double tie_pairs(std::span<const int> ranks, int levels) {
  std::vector<double> counts(static_cast<std::size_t>(levels), 0.0);
  for (int r : ranks) counts[static_cast<std::size_t>(r)] += 1.0;
  double t = 0.0;
  for (double c : counts) t += c * (c - 1.0) / 2.0;
  return t;
}

}  // namespace

KendallTauB::KendallTauB(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("InvalidInputs", "Kendall tau needs paired samples, n >= 2");
  x_ranks_ = dense_ranks(x, x_levels_);
  int y_levels = 0;
  const auto y_ranks = dense_ranks(y, y_levels);
  y_order_.resize(y.size());
  std::iota(y_order_.begin(), y_order_.end(), 0);
  std::stable_sort(y_order_.begin(), y_order_.end(), [&](auto a, auto b) { return y_ranks[a] < y_ranks[b]; });
  for (std::size_t k = 0; k < y_order_.size(); ++k)
    if (k == 0 || y_ranks[y_order_[k]] != y_ranks[y_order_[k - 1]]) y_breaks_.push_back(k);
  const double n = static_cast<double>(x.size());
  const double n0 = n * (n - 1) / 2;
  const double n1 = tie_pairs(x_ranks_, x_levels_);
  const double n2 = tie_pairs(y_ranks, y_levels);
  const double d = (n0 - n1) * (n0 - n2);
  denom_ = d > 0 ? std::sqrt(d) : 0.0;
  if (denom_ == 0.0) throw Error("ZeroVariance", "Kendall tau undefined for a constant variable");
}

double KendallTauB::statistic(std::span<const int> x_ranks) const {
  // Fenwick tree over x ranks of already-inserted (strictly lower y) items.
  std::vector<int> tree(static_cast<std::size_t>(x_levels_) + 1, 0);
  auto add = [&](int pos) {
    for (int i = pos + 1; i <= x_levels_; i += i & -i) ++tree[static_cast<std::size_t>(i)];
  };
  auto prefix = [&](int pos) {  // count of ranks < pos
    int s = 0;
    for (int i = pos; i > 0; i -= i & -i) s += tree[static_cast<std::size_t>(i)];
    return s;
  };
  double s = 0.0;
  int inserted = 0;
  for (std::size_t g = 0; g < y_breaks_.size(); ++g) {
    const std::size_t begin = y_breaks_[g];
    const std::size_t end = g + 1 < y_breaks_.size() ? y_breaks_[g + 1] : y_order_.size();
    for (std::size_t k = begin; k < end; ++k) {
      const int r = x_ranks[y_order_[k]];
      const int less = prefix(r);
      const int greater = inserted - prefix(r + 1);
      s += less - greater;
    }
    for (std::size_t k = begin; k < end; ++k) add(x_ranks[y_order_[k]]);
    inserted += static_cast<int>(end - begin);
  }
  return s;
}

// ---- misc ------------------------------------------------------------------

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t hw = std::max(1U, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::pair<double, double> percentile_interval(std::vector<double> replicates, double level) {
  if (replicates.empty()) return {std::nan(""), std::nan("")};
  std::sort(replicates.begin(), replicates.end());
  const double tail = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(replicates.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, replicates.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return replicates[lo] * (1 - frac) + replicates[hi] * frac;
  };
  return {at(tail), at(1.0 - tail)};
}

double mc_power_two_sample(int n_a, int n_b, double d, double alpha, int replicates, std::uint64_t seed) {
  if (n_a < 2 || n_b < 2 || replicates <= 0) return std::nan("");
  const double df = n_a + n_b - 2;
  const double crit = boost::math::quantile(boost::math::students_t(df), 1.0 - alpha / 2.0);
  std::vector<char> reject(static_cast<std::size_t>(replicates), 0);
  parallel_for(reject.size(), [&](std::size_t r) {
    auto eng = make_engine(derive_seed(seed, r));
    std::normal_distribution<double> z;
    double sa = 0, sa2 = 0, sb = 0, sb2 = 0;
    for (int i = 0; i < n_a; ++i) {
      const double v = z(eng) + d;
      sa += v;
      sa2 += v * v;
    }
    for (int i = 0; i < n_b; ++i) {
      const double v = z(eng);
      sb += v;
      sb2 += v * v;
    }
    const double ma = sa / n_a, mb = sb / n_b;
    const double ssa = sa2 - n_a * ma * ma, ssb = sb2 - n_b * mb * mb;
    const double sp2 = (ssa + ssb) / df;
    const double t = (ma - mb) / std::sqrt(sp2 * (1.0 / n_a + 1.0 / n_b));
    reject[r] = std::fabs(t) > crit;
  });
  return static_cast<double>(std::count(reject.begin(), reject.end(), 1)) / replicates;
}

double mc_power_one_sample(int n, double d, double alpha, int replicates, std::uint64_t seed) {
  if (n < 2 || replicates <= 0) return std::nan("");
  const double crit = boost::math::quantile(boost::math::students_t(n - 1), 1.0 - alpha / 2.0);
  std::vector<char> reject(static_cast<std::size_t>(replicates), 0);
  parallel_for(reject.size(), [&](std::size_t r) {
    auto eng = make_engine(derive_seed(seed, r));
    std::normal_distribution<double> z;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = z(eng) + d;
      s += v;
      s2 += v * v;
    }
    const double m = s / n;
    const double sd = std::sqrt((s2 - n * m * m) / (n - 1));
    reject[r] = std::fabs(m / (sd / std::sqrt(static_cast<double>(n)))) > crit;
  });
  return static_cast<double>(std::count(reject.begin(), reject.end(), 1)) / replicates;
}

}  // namespace deltalab::stats
