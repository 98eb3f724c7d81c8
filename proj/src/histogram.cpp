#include "idmgym/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "idmgym/errors.hpp"
#include "idmgym/model.hpp"

namespace idmgym {

using ojson = nlohmann::ordered_json;

void Histogram::validate() const {
  if (bins.empty()) throw ValidationError("histogram has no bins");
  double total = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
      throw ValidationError(fmt::format("histogram bin {}: need finite lo < hi", i));
    }
    if (!std::isfinite(b.mass) || b.mass < 0.0) {
      throw ValidationError(fmt::format("histogram bin {}: negative or non-finite mass", i));
    }
    if (i > 0 && b.lo != bins[i - 1].hi) {
      throw ValidationError(fmt::format("histogram bin {}: not contiguous with bin {}", i, i - 1));
    }
    total += b.mass;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError(fmt::format("histogram masses sum to {}, expected 1", total));
  }
}

double Histogram::mean() const {
  double m = 0.0;
  for (const auto& b : bins) m += b.mass * 0.5 * (b.lo + b.hi);
  return m;
}

Histogram histogram_from_samples(std::span<const double> values, std::size_t n_bins) {
  if (values.empty()) throw InputDomainError("histogram_from_samples: no samples");
  if (n_bins == 0) throw InputDomainError("histogram_from_samples: n_bins must be >= 1");
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  double lo = *min_it;
  double hi = *max_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw InputDomainError("histogram_from_samples: non-finite sample");
  }
  if (lo == hi) {
    const double half = 0.5 * std::max(std::abs(lo) * 1e-6, 1e-12) * static_cast<double>(n_bins);
    lo -= half;
    hi += half;
  }

  std::vector<double> edges(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  edges.back() = hi;

  std::vector<std::size_t> counts(n_bins, 0);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (double x : values) {
    auto idx = static_cast<std::size_t>(std::floor((x - lo) / width));
    idx = std::min(idx, n_bins - 1);
    // Edge rounding: make the bin agree with the stored edges.
    while (idx > 0 && x < edges[idx]) --idx;
    while (idx + 1 < n_bins && x >= edges[idx + 1]) ++idx;
    ++counts[idx];
  }

  Histogram h;
  h.bins.reserve(n_bins);
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.bins.push_back({edges[i], edges[i + 1], static_cast<double>(counts[i]) / n});
  }
  return h;
}

std::string histograms_to_json(const ParamHistograms& h) {
  ojson root = ojson::object();
  auto emit = [&](const std::string& name, const Histogram& hist) {
    ojson arr = ojson::array();
    for (const auto& b : hist.bins) arr.push_back({{"lo", b.lo}, {"hi", b.hi}, {"mass", b.mass}});
    root[name] = std::move(arr);
  };
  for (auto name : ParamSet::kNames) {
    if (auto it = h.find(std::string(name)); it != h.end()) emit(it->first, it->second);
  }
  for (const auto& [name, hist] : h) {
    if (ParamSet::index_of(name) == ParamSet::kSize) emit(name, hist);
  }
  return root.dump(2) + "\n";
}

void write_histograms_json(const std::filesystem::path& path, const ParamHistograms& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << histograms_to_json(h);
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

ParamHistograms histograms_from_json(const std::string& text, const std::string& source) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", source, e.what()));
  }
  if (!root.is_object()) throw ParseError(fmt::format("{}: expected a JSON object", source));
  ParamHistograms out;
  for (const auto& [name, arr] : root.items()) {
    if (ParamSet::index_of(name) == ParamSet::kSize) {
      throw ParseError(fmt::format("{}: unknown parameter '{}'", source, name));
    }
    if (!arr.is_array()) throw ParseError(fmt::format("{}: '{}' must be an array", source, name));
    Histogram h;
    for (const auto& bin : arr) {
      if (!bin.is_object() || !bin.contains("lo") || !bin.contains("hi") ||
          !bin.contains("mass") || !bin["lo"].is_number() || !bin["hi"].is_number() ||
          !bin["mass"].is_number()) {
        throw ParseError(fmt::format("{}: '{}' bins need numeric lo, hi, mass", source, name));
      }
      h.bins.push_back({bin["lo"].get<double>(), bin["hi"].get<double>(), bin["mass"].get<double>()});
    }
    try {
      h.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: '{}': {}", source, name, e.what()));
    }
    out.emplace(name, std::move(h));
  }
  return out;
}

ParamHistograms read_histograms_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return histograms_from_json(ss.str(), path.string());
}

}  // namespace idmgym
