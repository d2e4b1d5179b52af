#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "baaf/dataset.hpp"
#include "baaf/gmm.hpp"
#include "baaf/rng.hpp"

namespace testing {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("baaf-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "s") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline baaf::FeatureDataset gaussian_dataset(std::size_t rows, std::size_t dim, std::uint64_t seed,
                                             double scale = 1.0) {
  baaf::Rng rng(seed);
  std::vector<float> v(rows * dim);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return {make_ids(rows), baaf::FeatureMatrix(rows, dim, std::move(v))};
}

// Nominal cloud plus planted far-away points appended at the end.
inline baaf::FeatureDataset planted_dataset(std::size_t nominal, std::size_t planted, std::size_t dim,
                                            double distance, std::uint64_t seed) {
  baaf::Rng rng(seed);
  std::vector<float> v;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < nominal; ++i) {
    for (std::size_t c = 0; c < dim; ++c) v.push_back(static_cast<float>(rng.normal()));
    ids.push_back("n" + std::to_string(i));
  }
  // Planted points sit on distinct signed axes, so they are far from each other too.
  for (std::size_t a = 0; a < planted; ++a) {
    for (std::size_t c = 0; c < dim; ++c) {
      const bool on = c == (a / 2) % dim;
      v.push_back(on ? static_cast<float>((a % 2 ? -1.0 : 1.0) * distance) : 0.0f);
    }
    ids.push_back("a" + std::to_string(a));
  }
  return {std::move(ids), baaf::FeatureMatrix(nominal + planted, dim, std::move(v))};
}

// Pairwise concordance count, ties one half.
inline double brute_auroc(const std::vector<double>& scores, const std::vector<bool>& anomalous) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!anomalous[a]) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (anomalous[b]) continue;
      pairs += 1.0;
      if (scores[a] > scores[b]) num += 1.0;
      else if (scores[a] == scores[b]) num += 0.5;
    }
  }
  return num / pairs;
}

inline double log_density_gap(double x, const baaf::GaussianComponent& a, const baaf::GaussianComponent& b) {
  auto logd = [](double x, const baaf::GaussianComponent& c) {
    return std::log(c.weight) - 0.5 * std::log(2.0 * M_PI * c.variance) -
           0.5 * (x - c.mean) * (x - c.mean) / c.variance;
  };
  return logd(x, a) - logd(x, b);
}

// Bisection for the sign change of the log-density gap on [lo, hi].
inline double bisect_crossover(const baaf::GaussianComponent& a, const baaf::GaussianComponent& b,
                               double lo, double hi) {
  double flo = log_density_gap(lo, a, b);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = log_density_gap(mid, a, b);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testing
