#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace idmgym {

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double mass = 0.0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Contiguous equal- or unequal-width bins with probability masses.
struct Histogram {
  std::vector<HistogramBin> bins;

  /// Non-empty, lo < hi, bins contiguous, masses >= 0 summing to 1 +- 1e-9.
  void validate() const;
  [[nodiscard]] double mean() const;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Equal-width histogram spanning [min, max] of the values. When all values
/// coincide a narrow bin range is centred on that value so lo < hi holds.
Histogram histogram_from_samples(std::span<const double> values, std::size_t n_bins);

/// Per-parameter histograms keyed by ParamSet field name.
using ParamHistograms = std::map<std::string, Histogram>;

/// JSON: {"a_max": [{"lo":..,"hi":..,"mass":..}, ...], ...}. Keys are written
/// in ParamSet field order.
void write_histograms_json(const std::filesystem::path& path, const ParamHistograms& h);
std::string histograms_to_json(const ParamHistograms& h);
ParamHistograms histograms_from_json(const std::string& text, const std::string& source = "<json>");
ParamHistograms read_histograms_json(const std::filesystem::path& path);

}  // namespace idmgym
