#pragma once

#include <array>
#include <span>
#include <vector>

namespace baaf {

enum class NormalizationMode { kGlobal, kPerModel };

struct NormalizedScores {
  std::vector<std::vector<double>> groups;
  /// Set when a normalization group was constant and mapped to zeros.
  bool constant_group = false;
};

/// Min-max normalizes prediction vectors (one per trained model) into [0, 1],
/// either over the union of all vectors or per vector.
NormalizedScores normalize_scores(const std::vector<std::vector<double>>& raw,
                                  NormalizationMode mode);

/// Single-vector convenience form.
std::vector<double> normalize_scores(std::span<const double> raw, bool* constant = nullptr);

struct GaussianComponent {
  double weight = 0.5;  // mixing weight
  double mean = 0.0;
  double variance = 1.0;
};

/// Two-component 1-D mixture. Component 0 is the nominal side (lower mean).
struct GmmFit {
  std::array<GaussianComponent, 2> components{};
  double threshold = 0.0;
  bool threshold_clamped = false;
  bool converged = false;
  int iterations = 0;
  double final_weighted_loglik = 0.0;
  /// Weighted log-likelihood after initialization and after every iteration.
  std::vector<double> loglik_trace;
};

struct EmOptions {
  double tolerance = 1e-8;
  int max_iterations = 500;
  double variance_floor = 1e-6;
};

double normal_pdf(double x, double mean, double variance);
double weighted_log_likelihood(std::span<const double> values, std::span<const double> weights,
                               const std::array<GaussianComponent, 2>& components);

/// Responsibilities r[i][c] of each component for each value.
std::vector<std::array<double, 2>> e_step(std::span<const double> values,
                                          const std::array<GaussianComponent, 2>& components);

/// Weighted M-step for fixed responsibilities.
std::array<GaussianComponent, 2> m_step(std::span<const double> values,
                                        std::span<const double> weights,
                                        std::span<const std::array<double, 2>> responsibilities,
                                        const std::array<GaussianComponent, 2>& previous,
                                        double variance_floor);

/// Weighted quantile: smallest value whose cumulative weight reaches q * total.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

/// Weighted EM for a two-component 1-D Gaussian mixture, followed by the
/// crossover threshold. Throws DegenerateError when the positive-weight values
/// are all identical or the fit collapses onto one component.
GmmFit fit_weighted_gmm(std::span<const double> values, std::span<const double> weights,
                        const EmOptions& options = {});

struct Crossover {
  double threshold = 0.0;
  bool clamped = false;
};

/// Point in (mean_0, mean_1) where the weighted densities are equal. When no
/// root lies in that interval the nearest real root (or the vertex) is
/// clamped into it and `clamped` is set.
Crossover crossover_threshold(const GaussianComponent& nominal, const GaussianComponent& anomalous);

}  // namespace baaf
