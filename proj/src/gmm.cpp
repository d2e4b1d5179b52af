#include "baaf/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "baaf/errors.hpp"

namespace baaf {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - d * d / (2.0 * variance);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite value");
  }
}

}  // namespace

NormalizedScores normalize_scores(const std::vector<std::vector<double>>& raw,
                                  NormalizationMode mode) {
  if (raw.empty()) throw ParameterError("normalize_scores: no prediction groups");
  NormalizedScores out;
  out.groups.reserve(raw.size());
  if (mode == NormalizationMode::kPerModel) {
    for (const auto& group : raw) {
      bool constant = false;
      out.groups.push_back(normalize_scores(group, &constant));
      out.constant_group = out.constant_group || constant;
    }
    return out;
  }

  std::size_t total = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& group : raw) {
    check_finite(group, "normalize_scores");
    total += group.size();
    for (double v : group) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (total == 0) throw ParameterError("normalize_scores: empty input");
  if (total < 2) throw ParameterError("normalize_scores: need at least 2 values");
  const double range = hi - lo;
  out.constant_group = !(range > 0.0);
  for (const auto& group : raw) {
    std::vector<double> g(group.size(), 0.0);
    if (range > 0.0) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = (group[i] - lo) / range;
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

std::vector<double> normalize_scores(std::span<const double> raw, bool* constant) {
  if (raw.empty()) throw ParameterError("normalize_scores: empty input");
  if (raw.size() < 2) throw ParameterError("normalize_scores: need at least 2 values");
  check_finite(raw, "normalize_scores");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(raw.size(), 0.0);
  if (constant) *constant = !(range > 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / range;
  }
  return out;
}

double normal_pdf(double x, double mean, double variance) {
  return std::exp(log_normal_pdf(x, mean, variance));
}

double weighted_log_likelihood(std::span<const double> values, std::span<const double> weights,
                               const std::array<GaussianComponent, 2>& c) {
  double ll = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double l0 = std::log(c[0].weight) + log_normal_pdf(values[i], c[0].mean, c[0].variance);
    const double l1 = std::log(c[1].weight) + log_normal_pdf(values[i], c[1].mean, c[1].variance);
    ll += weights[i] * log_sum_exp(l0, l1);
  }
  return ll;
}

std::vector<std::array<double, 2>> e_step(std::span<const double> values,
                                          const std::array<GaussianComponent, 2>& c) {
  std::vector<std::array<double, 2>> r(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double l0 = std::log(c[0].weight) + log_normal_pdf(values[i], c[0].mean, c[0].variance);
    const double l1 = std::log(c[1].weight) + log_normal_pdf(values[i], c[1].mean, c[1].variance);
    const double norm = log_sum_exp(l0, l1);
    r[i] = {std::exp(l0 - norm), std::exp(l1 - norm)};
  }
  return r;
}

std::array<GaussianComponent, 2> m_step(std::span<const double> values,
                                        std::span<const double> weights,
                                        std::span<const std::array<double, 2>> resp,
                                        const std::array<GaussianComponent, 2>& previous,
                                        double variance_floor) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::array<GaussianComponent, 2> out = previous;
  for (std::size_t c = 0; c < 2; ++c) {
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double w = weights[i] * resp[i][c];
      mass += w;
      first += w * values[i];
    }
    out[c].weight = mass / total;
    if (!(mass > 0.0)) continue;  // collapsed; keep previous location
    const double mean = first / mass;
    double second = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - mean;
      second += weights[i] * resp[i][c] * d * d;
    }
    out[c].mean = mean;
    out[c].variance = std::max(second / mass, variance_floor);
  }
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = q * total;
  double cumulative = 0.0;
  for (std::size_t i : order) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    if (cumulative >= target) return values[i];
  }
  // Rounding can leave cumulative a hair below target; return the largest weighted value.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (weights[*it] > 0.0) return values[*it];
  }
  return values[order.back()];
}

GmmFit fit_weighted_gmm(std::span<const double> values, std::span<const double> weights,
                        const EmOptions& options) {
  if (values.size() != weights.size()) throw ParameterError("fit_weighted_gmm: size mismatch");
  if (values.size() < 4) throw ParameterError("fit_weighted_gmm: need at least 4 values");
  check_finite(values, "fit_weighted_gmm");
  check_finite(weights, "fit_weighted_gmm");

  // Zero-weight samples are dropped outright and the rest put into a
  // canonical order, so the fit is exactly permutation invariant.
  std::vector<std::pair<double, double>> samples;
  samples.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0) throw ParameterError("fit_weighted_gmm: negative weight");
    if (weights[i] > 0.0) samples.emplace_back(values[i], weights[i]);
  }
  if (samples.empty()) throw ParameterError("fit_weighted_gmm: total weight is 0");
  std::sort(samples.begin(), samples.end());
  std::vector<double> x(samples.size());
  std::vector<double> w(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) std::tie(x[i], w[i]) = samples[i];
  if (x.front() == x.back()) throw DegenerateError("fit_weighted_gmm: all values identical");

  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += w[i] * x[i];
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);
  var = std::max(var / total, options.variance_floor);

  double lo = weighted_quantile(x, w, 0.25);
  double hi = weighted_quantile(x, w, 0.75);
  if (!(hi > lo)) {
    const double sd = std::sqrt(var);
    lo = mean - 0.5 * sd;
    hi = mean + 0.5 * sd;
  }
  std::array<GaussianComponent, 2> comps{GaussianComponent{0.5, lo, var},
                                         GaussianComponent{0.5, hi, var}};

  GmmFit fit;
  double ll = weighted_log_likelihood(x, w, comps);
  fit.loglik_trace.push_back(ll);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const auto resp = e_step(x, comps);
    comps = m_step(x, w, resp, comps, options.variance_floor);
    if (!(comps[0].weight > 0.0) || !(comps[1].weight > 0.0)) {
      throw DegenerateError("fit_weighted_gmm: a component collapsed");
    }
    const double next = weighted_log_likelihood(x, w, comps);
    fit.loglik_trace.push_back(next);
    fit.iterations = it;
    const double gain = next - ll;
    ll = next;
    if (gain < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.final_weighted_loglik = ll;

  if (comps[0].mean > comps[1].mean) std::swap(comps[0], comps[1]);
  // Keep the mixing weights summing to one exactly.
  comps[1].weight = 1.0 - comps[0].weight;
  fit.components = comps;
  const auto cross = crossover_threshold(comps[0], comps[1]);
  fit.threshold = cross.threshold;
  fit.threshold_clamped = cross.clamped;
  return fit;
}

Crossover crossover_threshold(const GaussianComponent& c1, const GaussianComponent& c2) {
  if (std::abs(c2.mean - c1.mean) <= 1e-9) {
    throw DegenerateError("crossover_threshold: component means coincide");
  }
  if (c1.mean > c2.mean) throw ParameterError("crossover_threshold: expected mean_0 < mean_1");
  if (!(c1.variance > 0.0) || !(c2.variance > 0.0) || !(c1.weight > 0.0) || !(c2.weight > 0.0)) {
    throw ParameterError("crossover_threshold: weights and variances must be positive");
  }
  const double m1 = c1.mean, m2 = c2.mean, v1 = c1.variance, v2 = c2.variance;
  const double log_ratio = std::log(c1.weight) - std::log(c2.weight);

  // f(x) = log(pi1 N1) - log(pi2 N2) = a x^2 + b x + c
  const double a = 1.0 / (2.0 * v2) - 1.0 / (2.0 * v1);
  const double b = m1 / v1 - m2 / v2;
  const double c = m2 * m2 / (2.0 * v2) - m1 * m1 / (2.0 * v1) + log_ratio - 0.5 * std::log(v1 / v2);
  auto f = [&](double t) {
    return log_ratio + log_normal_pdf(t, m1, v1) - log_normal_pdf(t, m2, v2);
  };
  auto df = [&](double t) { return 2.0 * a * t + b; };

  std::vector<double> roots;
  if (v1 == v2) {
    roots.push_back(0.5 * (m1 + m2) + v1 * log_ratio / (m2 - m1));
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      if (q != 0.0) {
        roots.push_back(c / q);
        roots.push_back(q / a);
      } else {
        roots.push_back(-b / (2.0 * a));
      }
    }
    for (double& r : roots) {
      // One guarded Newton polish.
      const double slope = df(r);
      if (slope != 0.0) {
        const double next = r - f(r) / slope;
        if (std::isfinite(next) && std::abs(f(next)) < std::abs(f(r))) r = next;
      }
    }
  }

  std::vector<double> inside;
  for (double r : roots) {
    if (std::isfinite(r) && r > m1 && r < m2) inside.push_back(r);
  }
  Crossover out;
  if (!inside.empty()) {
    std::sort(inside.begin(), inside.end());
    out.threshold = inside.front();
    for (double r : inside) {
      if (df(r) < 0.0) {
        out.threshold = r;
        break;
      }
    }
  } else {
    out.clamped = true;
    double candidate;
    if (roots.empty()) {
      candidate = a != 0.0 ? -b / (2.0 * a) : 0.5 * (m1 + m2);
    } else {
      auto distance = [&](double r) { return r < m1 ? m1 - r : r - m2; };
      candidate = *std::min_element(roots.begin(), roots.end(), [&](double p, double q) {
        return distance(p) < distance(q);
      });
    }
    out.threshold = std::clamp(candidate, m1, m2);
  }
  out.threshold = std::clamp(out.threshold, 0.0, 1.0);
  return out;
}

}  // namespace baaf
