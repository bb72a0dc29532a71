#pragma once

// Streaming estimators and uncertainty reports for Monte Carlo comparisons.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace stirring {

/// Running mean and co-moment matrix of d-dimensional samples
/// (Welford / Chan et al. update). merge() is the parallel reduction.
class Welford {
 public:
  explicit Welford(std::size_t dim = 1) : dim_(dim), mean_(dim, 0.0), comoment_(dim * dim, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }

  void update(std::span<const double> sample) {
    if (sample.size() != dim_) throw std::invalid_argument("Welford: dimension mismatch");
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    delta_.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      delta_[i] = sample[i] - mean_[i];
      mean_[i] += delta_[i] * inv;
    }
    // C += (x - mean_old)(x - mean_new)^T
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        comoment_[i * dim_ + j] += delta_[i] * (sample[j] - mean_[j]);
  }

  void update(double x) { update(std::span<const double>(&x, 1)); }

  void merge(const Welford& o) {
    if (o.dim_ != dim_) throw std::invalid_argument("Welford: dimension mismatch in merge");
    if (o.count_ == 0) return;
    if (count_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count_), nb = static_cast<double>(o.count_);
    const double n = na + nb;
    std::vector<double> d(dim_);
    for (std::size_t i = 0; i < dim_; ++i) d[i] = o.mean_[i] - mean_[i];
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        comoment_[i * dim_ + j] += o.comoment_[i * dim_ + j] + d[i] * d[j] * na * nb / n;
    for (std::size_t i = 0; i < dim_; ++i) mean_[i] += d[i] * nb / n;
    count_ += o.count_;
  }

  double mean(std::size_t i = 0) const { return mean_[i]; }
  /// Unbiased sample covariance (n - 1 denominator).
  double covariance(std::size_t i, std::size_t j) const {
    if (count_ < 2) return std::numeric_limits<double>::quiet_NaN();
    return comoment_[i * dim_ + j] / static_cast<double>(count_ - 1);
  }
  double variance(std::size_t i = 0) const { return covariance(i, i); }
  double std_error(std::size_t i = 0) const { return std::sqrt(variance(i) / count_); }

 private:
  std::size_t dim_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> comoment_;
  std::vector<double> delta_;
};

/// Estimate with standard error paired with a theoretical prediction.
struct CovarianceReport {
  double estimate = 0.0;
  double std_error = 0.0;
  double theory = 0.0;
  double z_score = 0.0;
  std::size_t n_samples = 0;

  bool within(double z_max) const { return std::abs(z_score) <= z_max; }
};

namespace detail {

inline CovarianceReport make_report(double estimate, double se, double theory, std::size_t n) {
  CovarianceReport r{estimate, se, theory, 0.0, n};
  const double diff = estimate - theory;
  if (se > 0.0) r.z_score = diff / se;
  else r.z_score = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::max(), diff);
  return r;
}

}  // namespace detail

/// Mean of i.i.d. samples with SE = sd / sqrt(n).
inline CovarianceReport mean_report(std::span<const double> xs, double theory) {
  if (xs.size() < 2) throw std::invalid_argument("mean_report needs >= 2 samples");
  Welford w;
  for (double x : xs) w.update(x);
  return detail::make_report(w.mean(), w.std_error(), theory, xs.size());
}

/// Sample covariance of paired replicas; plug-in SE from the spread of the
/// centered products (x_i - xbar)(y_i - ybar).
inline CovarianceReport replica_covariance(std::span<const double> xs, std::span<const double> ys,
                                           double theory) {
  if (xs.size() != ys.size()) throw std::invalid_argument("replica_covariance: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("replica_covariance needs >= 2 samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  Welford prod;
  for (std::size_t i = 0; i < n; ++i) prod.update((xs[i] - mx) * (ys[i] - my));
  const double estimate = prod.mean() * n / (n - 1.0);
  return detail::make_report(estimate, prod.std_error(), theory, n);
}

/// Second moment about a known mean (here: zero-mean martingale increments),
/// SE from the spread of the products.
inline CovarianceReport raw_second_moment(std::span<const double> xs, std::span<const double> ys,
                                          double theory) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("raw_second_moment: need >= 2 paired samples");
  Welford prod;
  for (std::size_t i = 0; i < xs.size(); ++i) prod.update(xs[i] * ys[i]);
  return detail::make_report(prod.mean(), prod.std_error(), theory, xs.size());
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness-of-fit of observed counts against category
/// probabilities. Categories with zero probability must have zero counts.
inline ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> probs) {
  if (observed.size() != probs.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
  double total = 0.0;
  for (double o : observed) total += o;
  ChiSquareResult r;
  int used = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (probs[i] <= 0.0) {
      if (observed[i] > 0.0) return {std::numeric_limits<double>::infinity(), 0, 0.0};
      continue;
    }
    const double e = total * probs[i];
    r.statistic += (observed[i] - e) * (observed[i] - e) / e;
    ++used;
  }
  r.dof = std::max(used - 1, 1);
  r.p_value = boost::math::gamma_q(0.5 * r.dof, 0.5 * r.statistic);
  return r;
}

/// Mean of a correlated time series with a batch-means standard error.
inline CovarianceReport batch_means(std::span<const double> series, std::size_t batches, double theory) {
  if (batches < 2 || series.size() < batches)
    throw std::invalid_argument("batch_means: need >= 2 batches and >= 1 sample per batch");
  const std::size_t per = series.size() / batches;
  Welford w;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += series[b * per + i];
    w.update(s / per);
  }
  return detail::make_report(w.mean(), w.std_error(), theory, batches);
}

/// Bonferroni-adjusted z threshold for `cells` simultaneous two-sided tests
/// at family-wise level alpha.
inline double bonferroni_z(std::size_t cells, double alpha = 0.0027) {
  const double per = alpha / static_cast<double>(std::max<std::size_t>(cells, 1));
  // two-sided: P(|Z| > z) = per  =>  z = sqrt(2) erfc^{-1}(per)
  return std::sqrt(2.0) * boost::math::erfc_inv(per);
}

}  // namespace stirring
