#include "sil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sil/rng.hpp"

namespace sil {

double mean(std::span<const double> x) {
  if (x.empty()) throw ContractViolation("mean: empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractViolation("pearson: series lengths differ");
  if (x.size() < 2) throw ContractViolation("pearson: need at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("pearson: zero variance in a series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mean_squared_error(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw ContractViolation("mse: series must be nonempty and equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (x[i] - y[i]) * (x[i] - y[i]);
  return total / static_cast<double>(x.size());
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractViolation("quantile of empty series");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double bootstrap_ceiling(const std::vector<std::vector<double>>& ratings_per_item, std::size_t replicates,
                         std::uint64_t seed) {
  if (replicates == 0) throw ContractViolation("bootstrap_ceiling: need at least one replicate");
  if (ratings_per_item.size() < 2) throw ContractViolation("bootstrap_ceiling: need at least two items");
  std::vector<double> original;
  original.reserve(ratings_per_item.size());
  for (const auto& r : ratings_per_item) {
    if (r.empty()) throw ContractViolation("bootstrap_ceiling: item without ratings");
    original.push_back(mean(r));
  }
  std::vector<double> resampled(original.size());
  double total = 0.0;
  for (std::size_t b = 0; b < replicates; ++b) {
    Rng rng(derive_seed(seed, "ceiling/" + std::to_string(b)));
    for (std::size_t i = 0; i < ratings_per_item.size(); ++i) {
      const auto& r = ratings_per_item[i];
      double s = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) s += r[rng.below(r.size())];
      resampled[i] = s / static_cast<double>(r.size());
    }
    total += pearson(original, resampled);
  }
  return total / static_cast<double>(replicates);
}

Interval bootstrap_mean_ci(std::span<const double> values, std::size_t replicates, double level, std::uint64_t seed) {
  if (values.empty()) throw ContractViolation("bootstrap_ci: empty group");
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("bootstrap_ci: level must be in (0,1)");
  Interval out;
  out.mean = mean(values);
  if (replicates == 0) {
    out.lo = out.hi = out.mean;
    return out;
  }
  Rng rng(seed);
  std::vector<double> means(replicates);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += values[rng.below(values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  out.lo = sorted_quantile(means, alpha);
  out.hi = sorted_quantile(means, 1.0 - alpha);
  return out;
}

std::map<std::string, Interval> bootstrap_ci(const std::map<std::string, std::vector<double>>& groups,
                                             std::size_t replicates, double level, std::uint64_t seed) {
  std::map<std::string, Interval> out;
  for (const auto& [key, values] : groups) {
    out[key] = bootstrap_mean_ci(values, replicates, level, derive_seed(seed, "ci/" + key));
  }
  return out;
}

Interval bootstrap_pearson_ci(std::span<const double> x, std::span<const double> y, std::size_t replicates,
                              double level, std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("bootstrap_pearson_ci: level must be in (0,1)");
  Interval out;
  out.mean = pearson(x, y);
  out.lo = out.hi = out.mean;
  Rng rng(seed);
  std::vector<double> rs, bx(x.size()), by(y.size());
  rs.reserve(replicates);
  for (std::size_t b = 0; b < replicates; ++b) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto k = rng.below(x.size());
      bx[i] = x[k];
      by[i] = y[k];
    }
    try {
      rs.push_back(pearson(bx, by));
    } catch (const UndefinedCorrelation&) {
    }
  }
  if (rs.empty()) return out;
  std::sort(rs.begin(), rs.end());
  const double alpha = (1.0 - level) / 2.0;
  out.lo = sorted_quantile(rs, alpha);
  out.hi = sorted_quantile(rs, 1.0 - alpha);
  return out;
}

}  // namespace sil
