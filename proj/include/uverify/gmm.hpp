#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "uverify/common.hpp"

namespace uverify {

inline constexpr double kDefaultVarianceFloor = 1e-4;

struct GmmComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> var;
};

// Diagonal-covariance Gaussian mixture. Immutable after construction; the
// constructor validates parameters and caches per-component constants so
// that log_likelihood never produces non-finite output for finite input.
class Gmm {
 public:
  Gmm() = default;

  explicit Gmm(std::vector<GmmComponent> comps, double var_floor = kDefaultVarianceFloor)
      : comps_(std::move(comps)) {
    if (comps_.empty()) throw ValidationError("GMM needs at least one component");
    const std::size_t d = comps_[0].mean.size();
    double wsum = 0.0;
    for (const auto& c : comps_) {
      if (c.mean.size() != d || c.var.size() != d)
        throw ValidationError("GMM components disagree on dimension");
      if (!std::isfinite(c.weight) || c.weight < 0.0)
        throw ValidationError("GMM component weight must be finite and non-negative");
      if (!all_finite(c.mean) || !all_finite(c.var))
        throw ValidationError("GMM parameters must be finite");
      for (double v : c.var)
        if (v < var_floor)
          throw ValidationError("GMM variance " + format_double(v) + " below floor " +
                                format_double(var_floor));
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
      throw ValidationError("GMM weights sum to " + format_double(wsum) + ", expected 1");
    const double log2pi = std::log(2.0 * 3.14159265358979323846);
    log_const_.resize(comps_.size());
    inv_var_.resize(comps_.size() * d);
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += log2pi + std::log(comps_[k].var[j]);
        inv_var_[k * d + j] = 1.0 / comps_[k].var[j];
      }
      double lw = comps_[k].weight > 0.0 ? std::log(comps_[k].weight)
                                         : -std::numeric_limits<double>::infinity();
      log_const_[k] = lw - 0.5 * s;
    }
  }

  std::size_t dim() const { return comps_.empty() ? 0 : comps_[0].mean.size(); }
  std::size_t num_components() const { return comps_.size(); }
  const std::vector<GmmComponent>& components() const { return comps_; }

  // log sum_k w_k N(x; mu_k, diag var_k), evaluated in log space.
  double log_likelihood(std::span<const double> x) const {
    const std::size_t d = dim();
    if (x.size() != d)
      throw ValidationError("GMM scoring: frame has dimension " + std::to_string(x.size()) +
                            ", model expects " + std::to_string(d));
    double stack[kStackComponents];
    std::vector<double> heap;
    double* lls = stack;
    if (comps_.size() > kStackComponents) {
      heap.resize(comps_.size());
      lls = heap.data();
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      double q = 0.0;
      const double* mean = comps_[k].mean.data();
      const double* iv = inv_var_.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) {
        double diff = x[j] - mean[j];
        q += diff * diff * iv[j];
      }
      lls[k] = log_const_[k] - 0.5 * q;
      best = std::max(best, lls[k]);
    }
    if (!std::isfinite(best)) return best;
    double s = 0.0;
    for (std::size_t k = 0; k < comps_.size(); ++k) s += std::exp(lls[k] - best);
    return best + std::log(s);
  }

 private:
  static constexpr std::size_t kStackComponents = 64;

  std::vector<GmmComponent> comps_;
  std::vector<double> log_const_;
  std::vector<double> inv_var_;
};

struct EmOptions {
  std::size_t max_iters = 50;
  double rel_tol = 1e-6;  // stop when per-frame log-likelihood gain falls below this
  double var_floor = kDefaultVarianceFloor;
  std::size_t kmeans_iters = 10;
};

struct EmTrace {
  std::vector<double> loglik;  // total data log-likelihood after each EM iteration
};

namespace detail {

// Flat row-major frame pool used as EM training input.
struct FramePool {
  std::size_t n = 0, dim = 0;
  std::vector<double> x;

  void add(std::span<const double> frame) {
    if (dim == 0) dim = frame.size();
    if (frame.size() != dim) throw ValidationError("frame pool dimension mismatch");
    x.insert(x.end(), frame.begin(), frame.end());
    ++n;
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * dim, dim);
  }
};

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// k-means++ seeding followed by Lloyd iterations. Deterministic per seed.
inline std::vector<std::vector<double>> kmeans(const FramePool& data, std::size_t k,
                                               std::uint64_t seed, std::size_t iters) {
  Rng rng(seed);
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  std::vector<double> min_d(data.n, std::numeric_limits<double>::infinity());
  {
    auto first = data.row(rng.index(data.n));
    centers.emplace_back(first.begin(), first.end());
  }
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
      min_d[i] = std::min(min_d[i], sq_dist(data.row(i), centers.back()));
      total += min_d[i];
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.index(data.n);
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      pick = data.n - 1;
      for (std::size_t i = 0; i < data.n; ++i) {
        acc += min_d[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    auto row = data.row(pick);
    centers.emplace_back(row.begin(), row.end());
  }

  std::vector<std::size_t> assign(data.n, 0);
  for (std::size_t it = 0; it < iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < data.n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        double d = sq_dist(data.row(i), centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(data.dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < data.n; ++i) {
      auto row = data.row(i);
      for (std::size_t j = 0; j < data.dim; ++j) sums[assign[i]][j] += row[j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed an empty cluster at the point farthest from its center
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < data.n; ++i) {
          double d = sq_dist(data.row(i), centers[assign[i]]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        auto row = data.row(far);
        centers[c].assign(row.begin(), row.end());
        changed = true;
        continue;
      }
      for (std::size_t j = 0; j < data.dim; ++j)
        centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    if (!changed && it > 0) break;
  }
  return centers;
}

}  // namespace detail

// Fits a K-component diagonal GMM by k-means-seeded EM. Throws DataError on
// insufficient data or if a parameter goes non-finite (naming the iteration).
inline Gmm train_gmm(const detail::FramePool& data, std::size_t k, std::uint64_t seed,
                     const EmOptions& opts = {}, EmTrace* trace = nullptr) {
  if (k == 0) throw ValidationError("component count must be >= 1");
  if (data.n == 0 || data.dim == 0) throw DataError("no training frames");
  if (data.n < k * data.dim)
    throw DataError("insufficient training data: " + std::to_string(data.n) + " frames for K=" +
                    std::to_string(k) + ", D=" + std::to_string(data.dim) + " (need >= " +
                    std::to_string(k * data.dim) + ")");
  if (!all_finite(data.x)) throw DataError("training frames contain non-finite values");

  const std::size_t n = data.n, d = data.dim;
  auto centers = detail::kmeans(data, k, seed, opts.kmeans_iters);

  // initial parameters from the hard k-means partition
  std::vector<GmmComponent> comps(k);
  {
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> sq(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto row = data.row(i);
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double dist = detail::sq_dist(row, centers[c]);
        if (dist < bd) {
          bd = dist;
          best = c;
        }
      }
      ++counts[best];
      for (std::size_t j = 0; j < d; ++j) {
        sums[best][j] += row[j];
        sq[best][j] += row[j] * row[j];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      comps[c].mean.assign(d, 0.0);
      comps[c].var.assign(d, 1.0);
      double cnt = static_cast<double>(std::max<std::size_t>(counts[c], 1));
      comps[c].weight = std::max(static_cast<double>(counts[c]) / static_cast<double>(n), 1e-8);
      for (std::size_t j = 0; j < d; ++j) {
        double mu = counts[c] ? sums[c][j] / cnt : centers[c][j];
        double v = counts[c] ? sq[c][j] / cnt - mu * mu : 1.0;
        comps[c].mean[j] = mu;
        comps[c].var[j] = std::max(v, opts.var_floor);
      }
    }
    double wsum = 0.0;
    for (auto& c : comps) wsum += c.weight;
    for (auto& c : comps) c.weight /= wsum;
  }

  std::vector<double> resp(n * k);
  std::vector<double> comp_ll(k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  Gmm model(comps, opts.var_floor);
  if (trace) trace->loglik.clear();

  for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
    // E step
    double total_ll = 0.0;
    const auto& mc = model.components();
    std::vector<double> log_norm(k);
    std::vector<double> inv_var(k * d);
    for (std::size_t c = 0; c < k; ++c) {
      double lg = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        lg += std::log(2.0 * 3.14159265358979323846 * mc[c].var[j]);
        inv_var[c * d + j] = 1.0 / mc[c].var[j];
      }
      double lw = mc[c].weight > 0.0 ? std::log(mc[c].weight)
                                     : -std::numeric_limits<double>::infinity();
      log_norm[c] = lw - 0.5 * lg;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto row = data.row(i);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double diff = row[j] - mc[c].mean[j];
          q += diff * diff * inv_var[c * d + j];
        }
        comp_ll[c] = log_norm[c] - 0.5 * q;
        best = std::max(best, comp_ll[c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(comp_ll[c] - best);
      double lse = best + std::log(s);
      total_ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(comp_ll[c] - lse);
    }
    if (!std::isfinite(total_ll))
      throw DataError("EM produced a non-finite log-likelihood at iteration " +
                      std::to_string(iter));
    if (trace) trace->loglik.push_back(total_ll);

    // M step
    std::vector<GmmComponent> next(k);
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + c];
      next[c].mean.assign(d, 0.0);
      next[c].var.assign(d, 0.0);
      if (nk <= 1e-12) {
        // dead component: keep previous parameters
        next[c] = model.components()[c];
        next[c].weight = 1e-12;
        continue;
      }
      next[c].weight = nk / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto row = data.row(i);
        double r = resp[i * k + c];
        for (std::size_t j = 0; j < d; ++j) next[c].mean[j] += r * row[j];
      }
      for (std::size_t j = 0; j < d; ++j) next[c].mean[j] /= nk;
      for (std::size_t i = 0; i < n; ++i) {
        auto row = data.row(i);
        double r = resp[i * k + c];
        for (std::size_t j = 0; j < d; ++j) {
          double diff = row[j] - next[c].mean[j];
          next[c].var[j] += r * diff * diff;
        }
      }
      for (std::size_t j = 0; j < d; ++j)
        next[c].var[j] = std::max(next[c].var[j] / nk, opts.var_floor);
    }
    double wsum = 0.0;
    for (auto& c : next) wsum += c.weight;
    for (auto& c : next) c.weight /= wsum;
    for (const auto& c : next)
      if (!all_finite(c.mean) || !all_finite(c.var) || !std::isfinite(c.weight))
        throw DataError("EM produced non-finite parameters at iteration " + std::to_string(iter));
    model = Gmm(std::move(next), opts.var_floor);

    if (std::isfinite(prev_ll) &&
        (total_ll - prev_ll) / static_cast<double>(n) < opts.rel_tol)
      break;
    prev_ll = total_ll;
  }
  return model;
}

}  // namespace uverify
