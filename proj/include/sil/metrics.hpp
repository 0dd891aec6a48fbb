#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sil/error.hpp"

namespace sil {

/// Thrown when a correlation has no defined value (a constant series).
class UndefinedCorrelation : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Sample Pearson correlation. Requires equal lengths >= 2.
double pearson(std::span<const double> x, std::span<const double> y);
double mean_squared_error(std::span<const double> x, std::span<const double> y);
double mean(std::span<const double> x);

/// Linear-interpolated quantile of already sorted values, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

/// Human agreement ceiling: per replicate, resample each item's ratings with
/// replacement, correlate resampled item means with the original means;
/// returns the average correlation over `replicates`.
double bootstrap_ceiling(const std::vector<std::vector<double>>& ratings_per_item, std::size_t replicates,
                         std::uint64_t seed);

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the mean of `values`.
Interval bootstrap_mean_ci(std::span<const double> values, std::size_t replicates, double level, std::uint64_t seed);

/// Percentile bootstrap CI of each group's mean. Groups get independent
/// streams derived from (seed, key).
std::map<std::string, Interval> bootstrap_ci(const std::map<std::string, std::vector<double>>& groups,
                                             std::size_t replicates, double level, std::uint64_t seed);

/// Percentile bootstrap of Pearson r over paired items. Resamples with an
/// undefined correlation are skipped; `mean` holds the full-sample r.
Interval bootstrap_pearson_ci(std::span<const double> x, std::span<const double> y, std::size_t replicates,
                              double level, std::uint64_t seed);

}  // namespace sil
