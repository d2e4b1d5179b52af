#include "baaf/backends.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "baaf/errors.hpp"
#include "baaf/rng.hpp"

namespace baaf {

namespace {

constexpr double kCovarianceFloor = 1e-12;
constexpr std::uint8_t kBlobVersion = 1;
constexpr char kBlobMagic[4] = {'B', 'A', 'F', 'D'};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

Eigen::VectorXd column_mean(const FeatureMatrix& m) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.dim()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.dim(); ++c) mean[c] += row[c];
  }
  return mean / static_cast<double>(m.rows());
}

// Population covariance around a given center.
Eigen::MatrixXd covariance(const FeatureMatrix& m, const Eigen::VectorXd& center) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd diff(d);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (Eigen::Index c = 0; c < d; ++c) diff[c] = row[c] - center[c];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov / static_cast<double>(m.rows());
}

std::vector<float> to_floats(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

TrainedDetector fit_knn(const KnnParams& p, const FeatureMatrix& train, std::uint64_t seed) {
  FeatureMatrix bank = p.coreset_fraction >= 1.0
                           ? train
                           : coreset_subsample(train, p.coreset_fraction, seed);
  return TrainedDetector(KnnModel{p.k_neighbors, std::move(bank)}, train.dim(), train.rows());
}

TrainedDetector fit_gaussian(const GaussianParams& p, const FeatureMatrix& train) {
  const auto d = static_cast<Eigen::Index>(train.dim());
  const Eigen::VectorXd mean_d = column_mean(train);
  // Center on the f32-rounded mean so a query equal to the stored mean scores 0.
  std::vector<float> mean = to_floats(mean_d);
  Eigen::VectorXd center(d);
  for (Eigen::Index i = 0; i < d; ++i) center[i] = mean[i];
  const Eigen::MatrixXd cov = covariance(train, center);
  const double trace = cov.trace();
  if (p.shrinkage == 0.0) {
    if (trace == 0.0) {
      throw SingularityError("gaussian: zero-variance training data with shrinkage 0");
    }
    if (train.rows() <= train.dim()) {
      throw SingularityError("gaussian: " + std::to_string(train.rows()) +
                             " samples cannot span d=" + std::to_string(train.dim()) +
                             " with shrinkage 0");
    }
  }
  Eigen::MatrixXd shrunk = (1.0 - p.shrinkage) * cov;
  shrunk.diagonal().array() += p.shrinkage * trace / static_cast<double>(d) + kCovarianceFloor;

  Eigen::LLT<Eigen::MatrixXd> llt(shrunk);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("gaussian: covariance is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  const Eigen::MatrixXd inv_lower =
      lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  std::vector<float> whitening(static_cast<std::size_t>(d * d));
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      whitening[static_cast<std::size_t>(r * d + c)] =
          c <= r ? static_cast<float>(inv_lower(r, c)) : 0.0f;
    }
  }
  for (float w : whitening) {
    if (!std::isfinite(w)) throw SingularityError("gaussian: non-finite whitening matrix");
  }
  return TrainedDetector(GaussianModel{std::move(mean), std::move(whitening)}, train.dim(),
                         train.rows());
}

TrainedDetector fit_pca(const PcaParams& p, const FeatureMatrix& train) {
  const auto d = static_cast<Eigen::Index>(train.dim());
  std::vector<float> mean = to_floats(column_mean(train));
  Eigen::VectorXd center(d);
  for (Eigen::Index i = 0; i < d; ++i) center[i] = mean[i];
  const Eigen::MatrixXd cov = covariance(train, center);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DegenerateError("pca: eigen-decomposition failed");
  // Eigenvalues come back ascending.
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();
  std::size_t kept = 0;
  if (total > 0.0) {
    double cumulative = 0.0;
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      cumulative += values[i];
      ++kept;
      if (cumulative >= p.variance_kept * total * (1.0 - 1e-12)) break;
    }
  }
  std::vector<float> basis;
  basis.reserve(kept * train.dim());
  for (std::size_t k = 0; k < kept; ++k) {
    const auto col = eig.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(k));
    for (Eigen::Index c = 0; c < d; ++c) basis.push_back(static_cast<float>(col[c]));
  }
  return TrainedDetector(PcaModel{std::move(mean), FeatureMatrix(kept, train.dim(), std::move(basis))},
                         train.dim(), train.rows());
}

// Little-endian blob helpers.
class BlobWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint64_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw ParameterError("blob: field too large");
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
  }
  void f32(std::span<const float> values) {
    for (float f : values) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>((bits >> s) & 0xFF));
    }
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= static_cast<std::uint32_t>(in_[pos_++]) << s;
    return v;
  }
  std::vector<float> f32(std::size_t count) {
    need(count * 4);
    std::vector<float> out(count);
    for (auto& f : out) {
      std::uint32_t bits = 0;
      for (int s = 0; s < 32; s += 8) bits |= static_cast<std::uint32_t>(in_[pos_++]) << s;
      f = std::bit_cast<float>(bits);
    }
    return out;
  }
  void finish() const {
    if (pos_ != in_.size()) throw ShapeError("detector blob: trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ShapeError("detector blob: truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kKnnMemoryBank: return "knn";
    case BackendKind::kGaussianMahalanobis: return "gaussian";
    case BackendKind::kPcaReconstruction: return "pca";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(const std::string& name) {
  if (name == "knn" || name == "knn_memory_bank") return BackendKind::kKnnMemoryBank;
  if (name == "gaussian" || name == "gaussian_mahalanobis") return BackendKind::kGaussianMahalanobis;
  if (name == "pca" || name == "pca_reconstruction") return BackendKind::kPcaReconstruction;
  throw ParameterError("unknown backend '" + name + "'");
}

BackendKind BackendConfig::kind() const {
  return std::visit(Overloaded{[](const KnnParams&) { return BackendKind::kKnnMemoryBank; },
                               [](const GaussianParams&) { return BackendKind::kGaussianMahalanobis; },
                               [](const PcaParams&) { return BackendKind::kPcaReconstruction; }},
                    params);
}

void BackendConfig::validate() const {
  std::visit(Overloaded{
                 [](const KnnParams& p) {
                   if (p.k_neighbors < 1) throw ParameterError("knn: k_neighbors must be >= 1");
                   if (!(p.coreset_fraction > 0.0 && p.coreset_fraction <= 1.0)) {
                     throw ParameterError("knn: coreset_fraction must be in (0, 1]");
                   }
                 },
                 [](const GaussianParams& p) {
                   if (!(p.shrinkage >= 0.0 && p.shrinkage <= 1.0)) {
                     throw ParameterError("gaussian: shrinkage must be in [0, 1]");
                   }
                 },
                 [](const PcaParams& p) {
                   if (!(p.variance_kept > 0.0 && p.variance_kept < 1.0)) {
                     throw ParameterError("pca: variance_kept must be in (0, 1)");
                   }
                 }},
             params);
}

TrainedDetector::TrainedDetector(Model model, std::size_t dim, std::size_t train_sample_count)
    : model_(std::move(model)), dim_(dim), train_sample_count_(train_sample_count) {}

BackendKind TrainedDetector::kind() const {
  return std::visit(Overloaded{[](const KnnModel&) { return BackendKind::kKnnMemoryBank; },
                               [](const GaussianModel&) { return BackendKind::kGaussianMahalanobis; },
                               [](const PcaModel&) { return BackendKind::kPcaReconstruction; }},
                    model_);
}

double TrainedDetector::score(std::span<const float> query) const {
  if (query.size() != dim_) {
    throw ParameterError("score: query has dimension " + std::to_string(query.size()) +
                         ", detector expects " + std::to_string(dim_));
  }
  return std::visit(
      Overloaded{
          [&](const KnnModel& m) {
            const std::size_t rows = m.bank.rows();
            const std::size_t k = std::min(m.k_neighbors, rows);
            if (k == 1) {
              double best = std::numeric_limits<double>::infinity();
              for (std::size_t r = 0; r < rows; ++r) {
                best = std::min(best, squared_distance(query, m.bank.row(r)));
              }
              return std::sqrt(best);
            }
            std::vector<double> d(rows);
            for (std::size_t r = 0; r < rows; ++r) d[r] = squared_distance(query, m.bank.row(r));
            std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
            return std::sqrt(d[k - 1]);
          },
          [&](const GaussianModel& m) {
            std::vector<double> diff(dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
              diff[i] = static_cast<double>(query[i]) - static_cast<double>(m.mean[i]);
            }
            double acc = 0.0;
            for (std::size_t r = 0; r < dim_; ++r) {
              double z = 0.0;
              const float* w = m.whitening.data() + r * dim_;
              for (std::size_t c = 0; c <= r; ++c) z += static_cast<double>(w[c]) * diff[c];
              acc += z * z;
            }
            return std::sqrt(acc);
          },
          [&](const PcaModel& m) {
            std::vector<double> residual(dim_);
            for (std::size_t i = 0; i < dim_; ++i) {
              residual[i] = static_cast<double>(query[i]) - static_cast<double>(m.mean[i]);
            }
            const std::vector<double> centered = residual;
            for (std::size_t k = 0; k < m.basis.rows(); ++k) {
              const auto b = m.basis.row(k);
              double coeff = 0.0;
              for (std::size_t i = 0; i < dim_; ++i) coeff += static_cast<double>(b[i]) * centered[i];
              for (std::size_t i = 0; i < dim_; ++i) residual[i] -= coeff * static_cast<double>(b[i]);
            }
            double acc = 0.0;
            for (double v : residual) acc += v * v;
            return std::sqrt(acc);
          }},
      model_);
}

std::vector<double> TrainedDetector::score_all(const FeatureMatrix& queries) const {
  std::vector<double> out(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) out[i] = score(queries.row(i));
  return out;
}

std::vector<std::uint8_t> TrainedDetector::to_blob() const {
  BlobWriter w;
  for (char c : kBlobMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kBlobVersion);
  w.u8(static_cast<std::uint8_t>(kind()));
  w.u32(dim_);
  w.u32(train_sample_count_);
  std::visit(Overloaded{[&](const KnnModel& m) {
                          w.u32(m.k_neighbors);
                          w.u32(m.bank.rows());
                          w.f32(m.bank.data());
                        },
                        [&](const GaussianModel& m) {
                          w.f32(m.mean);
                          w.f32(m.whitening);
                        },
                        [&](const PcaModel& m) {
                          w.u32(m.basis.rows());
                          w.f32(m.mean);
                          w.f32(m.basis.data());
                        }},
             model_);
  return w.take();
}

TrainedDetector TrainedDetector::from_blob(std::span<const std::uint8_t> blob) {
  BlobReader r(blob);
  for (char c : kBlobMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw ValidationError("detector blob: bad magic");
  }
  if (const auto v = r.u8(); v != kBlobVersion) {
    throw ValidationError("detector blob: unsupported version " + std::to_string(v));
  }
  const auto tag = r.u8();
  const std::size_t dim = r.u32();
  const std::size_t count = r.u32();
  if (dim == 0) throw ValidationError("detector blob: zero dimension");
  switch (static_cast<BackendKind>(tag)) {
    case BackendKind::kKnnMemoryBank: {
      const std::size_t k = r.u32();
      const std::size_t rows = r.u32();
      auto bank = r.f32(rows * dim);
      r.finish();
      return TrainedDetector(KnnModel{k, FeatureMatrix(rows, dim, std::move(bank))}, dim, count);
    }
    case BackendKind::kGaussianMahalanobis: {
      auto mean = r.f32(dim);
      auto whitening = r.f32(dim * dim);
      r.finish();
      return TrainedDetector(GaussianModel{std::move(mean), std::move(whitening)}, dim, count);
    }
    case BackendKind::kPcaReconstruction: {
      const std::size_t components = r.u32();
      auto mean = r.f32(dim);
      auto basis = r.f32(components * dim);
      r.finish();
      return TrainedDetector(PcaModel{std::move(mean), FeatureMatrix(components, dim, std::move(basis))},
                             dim, count);
    }
  }
  throw ValidationError("detector blob: unknown backend tag " + std::to_string(tag));
}

TrainedDetector fit(const BackendConfig& config, const FeatureMatrix& train, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw ParameterError("fit: empty training set");
  return std::visit(Overloaded{[&](const KnnParams& p) { return fit_knn(p, train, seed); },
                               [&](const GaussianParams& p) { return fit_gaussian(p, train); },
                               [&](const PcaParams& p) { return fit_pca(p, train); }},
                    config.params);
}

std::vector<std::size_t> coreset_indices(const FeatureMatrix& bank, double fraction,
                                         std::uint64_t seed, std::optional<std::size_t> first_pick) {
  if (bank.empty()) throw ParameterError("coreset: empty bank");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("coreset: fraction must be in (0, 1]");
  const std::size_t rows = bank.rows();
  const auto target = std::min(
      rows, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows) - 1e-9)));
  const std::size_t want = std::max<std::size_t>(target, 1);

  std::size_t first;
  if (first_pick) {
    if (*first_pick >= rows) throw ParameterError("coreset: first pick out of range");
    first = *first_pick;
  } else {
    Rng rng(seed);
    first = static_cast<std::size_t>(rng.uniform_index(rows));
  }

  std::vector<std::size_t> picked{first};
  picked.reserve(want);
  std::vector<bool> taken(rows, false);
  taken[first] = true;
  std::vector<double> min_dist(rows);
  for (std::size_t r = 0; r < rows; ++r) min_dist[r] = squared_distance(bank.row(r), bank.row(first));
  while (picked.size() < want) {
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!taken[r] && min_dist[r] > best_dist) {
        best_dist = min_dist[r];
        best = r;
      }
    }
    picked.push_back(best);
    taken[best] = true;
    const auto chosen = bank.row(best);
    for (std::size_t r = 0; r < rows; ++r) {
      min_dist[r] = std::min(min_dist[r], squared_distance(bank.row(r), chosen));
    }
  }
  return picked;
}

FeatureMatrix coreset_subsample(const FeatureMatrix& bank, double fraction, std::uint64_t seed,
                                std::optional<std::size_t> first_pick) {
  const auto idx = coreset_indices(bank, fraction, seed, first_pick);
  return bank.select(idx);
}

}  // namespace baaf
