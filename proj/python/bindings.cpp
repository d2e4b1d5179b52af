#include <map>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "baaf/backends.hpp"
#include "baaf/dataset.hpp"
#include "baaf/engine.hpp"
#include "baaf/errors.hpp"
#include "baaf/gmm.hpp"
#include "baaf/metrics.hpp"
#include "baaf/report.hpp"
#include "baaf/synth.hpp"
#include "baaf/video.hpp"

namespace py = pybind11;
using namespace baaf;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_matrix(const F32Array& a) {
  if (a.ndim() != 2) throw ParameterError("expected a 2-D feature array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  return FeatureMatrix(rows, dim, std::vector<float>(a.data(), a.data() + rows * dim));
}

py::array_t<float> to_array(const FeatureMatrix& m) {
  py::array_t<float> out({m.rows(), m.dim()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const F64Array& a) {
  if (a.ndim() != 1) throw ParameterError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

FeatureDataset make_dataset(std::optional<std::vector<std::string>> ids, const F32Array& features,
                            std::optional<std::vector<std::string>> clip_of,
                            std::optional<std::vector<std::int64_t>> frame_index) {
  auto m = to_matrix(features);
  if (!ids) {
    ids.emplace();
    for (std::size_t i = 0; i < m.rows(); ++i) ids->push_back(std::to_string(i));
  }
  std::optional<ClipAssignment> clips;
  if (clip_of || frame_index) {
    if (!clip_of || !frame_index) throw ParameterError("clip_of and frame_index go together");
    clips = ClipAssignment{std::move(*clip_of), std::move(*frame_index)};
  }
  return FeatureDataset(std::move(*ids), std::move(m), std::move(clips));
}

py::object labels_to_py(const std::optional<EvalLabels>& labels) {
  if (!labels) return py::none();
  py::dict d;
  for (const auto& [id, l] : labels->map()) d[py::str(id)] = l == Label::kAnomalous;
  return d;
}

std::optional<EvalLabels> labels_from_py(const std::optional<std::map<std::string, bool>>& labels) {
  if (!labels) return std::nullopt;
  EvalLabels out;
  for (const auto& [id, a] : *labels) out.set(id, a ? Label::kAnomalous : Label::kNominal);
  return out;
}

py::dict gmm_dict(const GmmFit& fit) {
  py::list comps;
  for (const auto& c : fit.components) {
    comps.append(py::dict(py::arg("weight") = c.weight, py::arg("mean") = c.mean,
                          py::arg("variance") = c.variance));
  }
  return py::dict(py::arg("components") = comps, py::arg("threshold") = fit.threshold,
                  py::arg("threshold_clamped") = fit.threshold_clamped,
                  py::arg("converged") = fit.converged, py::arg("iterations") = fit.iterations,
                  py::arg("loglik_trace") = fit.loglik_trace);
}

// The report crosses into Python as a JSON string; the package wrapper parses it.
py::tuple train(const FeatureDataset& ds, const BaafConfig& config, std::size_t threads, bool video,
                std::size_t closing_window, std::size_t min_clip) {
  EngineOptions opts;
  opts.threads = threads;
  if (video) {
    auto r = [&] {
      py::gil_scoped_release release;
      return baaf_train_video(ds, config, VideoOptions{closing_window, min_clip}, opts);
    }();
    return py::make_tuple(std::move(r.detector), serialize_report(r.report));
  }
  auto r = [&] {
    py::gil_scoped_release release;
    return baaf_train(ds, config, opts);
  }();
  return py::make_tuple(std::move(r.detector), serialize_report(r.report));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "BaafError", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", validation.ptr());
  auto degenerate = py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", degenerate.ptr());

  py::class_<FeatureDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("ids") = py::none(), py::arg("features"),
           py::arg("clip_of") = py::none(), py::arg("frame_index") = py::none())
      .def("__len__", &FeatureDataset::size)
      .def_property_readonly("dim", &FeatureDataset::dim)
      .def_property_readonly("ids", &FeatureDataset::ids)
      .def_property_readonly("features", [](const FeatureDataset& d) { return to_array(d.features()); })
      .def_property_readonly("has_clips", &FeatureDataset::has_clips)
      .def("subset", [](const FeatureDataset& d, std::vector<std::size_t> idx) { return d.subset(idx); })
      .def("__eq__", [](const FeatureDataset& a, const FeatureDataset& b) { return a == b; });

  m.def("load_dataset", [](const std::filesystem::path& p) {
    auto ld = load_dataset(p);
    return py::make_tuple(std::move(ld.data), labels_to_py(ld.labels));
  }, py::arg("manifest"));
  m.def("write_dataset",
        [](const FeatureDataset& d, const std::filesystem::path& p,
           const std::optional<std::map<std::string, bool>>& labels, const std::string& format) {
          const auto fmt = format == "csv" ? PayloadFormat::kCsv : PayloadFormat::kF32le;
          if (format != "csv" && format != "f32le") throw ParameterError("format must be csv or f32le");
          write_dataset({d, labels_from_py(labels)}, p, fmt);
        },
        py::arg("dataset"), py::arg("manifest"), py::arg("labels") = py::none(),
        py::arg("format") = "f32le");
  m.def("random_split", [](const FeatureDataset& d, std::size_t n, std::uint64_t seed) {
    return random_split(d, n, seed).bags;
  }, py::arg("dataset"), py::arg("n"), py::arg("seed"));

  py::class_<BackendConfig>(m, "BackendConfig")
      .def_static("knn", &BackendConfig::knn, py::arg("k") = 1, py::arg("coreset_fraction") = 1.0)
      .def_static("gaussian", &BackendConfig::gaussian, py::arg("shrinkage") = 0.01)
      .def_static("pca", &BackendConfig::pca, py::arg("variance_kept") = 0.95)
      .def_property_readonly("kind", [](const BackendConfig& c) { return to_string(c.kind()); });

  py::class_<TrainedDetector>(m, "Detector")
      .def_property_readonly("kind", [](const TrainedDetector& d) { return to_string(d.kind()); })
      .def_property_readonly("dim", &TrainedDetector::dim)
      .def_property_readonly("train_sample_count", &TrainedDetector::train_sample_count)
      .def("score", [](const TrainedDetector& d, const F32Array& x) {
        const auto q = to_matrix(x);
        std::vector<double> s;
        {
          py::gil_scoped_release release;
          s = d.score_all(q);
        }
        return to_array(s);
      }, py::arg("features"))
      .def("to_bytes", [](const TrainedDetector& d) {
        const auto b = d.to_blob();
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("from_bytes", [](const py::bytes& b) {
        const std::string s = b;
        return TrainedDetector::from_blob(
            std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      });

  m.def("fit", [](const BackendConfig& c, const F32Array& x, std::uint64_t seed) {
    return fit(c, to_matrix(x), seed);
  }, py::arg("backend"), py::arg("features"), py::arg("seed") = 0);

  py::class_<BaafConfig>(m, "BaafConfig")
      .def(py::init([](std::size_t n, std::size_t k, const BackendConfig& backend,
                       const std::string& norm, std::uint64_t seed) {
             BaafConfig c;
             c.n_bags = n;
             c.k_votes = k;
             c.backend = backend;
             if (norm == "per-model") c.normalization = NormalizationMode::kPerModel;
             else if (norm != "global") throw ParameterError("normalization must be global or per-model");
             c.master_seed = seed;
             c.validate();
             return c;
           }),
           py::arg("n_bags") = 4, py::arg("k_votes") = 1, py::arg("backend") = BackendConfig::knn(),
           py::arg("normalization") = "global", py::arg("seed") = 0)
      .def_readonly("n_bags", &BaafConfig::n_bags)
      .def_readonly("k_votes", &BaafConfig::k_votes)
      .def_readonly("seed", &BaafConfig::master_seed)
      .def_property_readonly("name", &BaafConfig::name);

  m.def("baaf_train", &train, py::arg("dataset"), py::arg("config"), py::arg("threads") = 1,
        py::arg("video") = false, py::arg("closing_window") = 3, py::arg("min_clip_length") = 5);
  m.def("replay_filter_decisions", [](const std::string& report) {
    return replay_filter_decisions(nlohmann::json::parse(report));
  }, py::arg("report_json"));

  m.def("fit_weighted_gmm", [](const F64Array& values, const F64Array& weights) {
    return gmm_dict(fit_weighted_gmm(to_vector(values), to_vector(weights)));
  }, py::arg("values"), py::arg("weights"));
  m.def("crossover_threshold", [](std::array<double, 3> nominal, std::array<double, 3> anomalous) {
    const auto c = crossover_threshold({nominal[0], nominal[1], nominal[2]},
                                       {anomalous[0], anomalous[1], anomalous[2]});
    return py::make_tuple(c.threshold, c.clamped);
  }, py::arg("nominal"), py::arg("anomalous"));
  m.def("normalize_scores", [](const F64Array& raw) { return to_array(normalize_scores(to_vector(raw))); },
        py::arg("scores"));

  m.def("auroc", [](const F64Array& scores, const std::vector<bool>& anomalous) {
    return auroc(to_vector(scores), anomalous);
  }, py::arg("scores"), py::arg("anomalous"));

  m.def("close_anomaly_mask", &close_anomaly_mask, py::arg("removed"), py::arg("window") = 3);
  m.def("segment_clip", [](const std::vector<bool>& removed, std::size_t min_length) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& s : segment_clip(removed, min_length)) out.emplace_back(s.start, s.end);
    return out;
  }, py::arg("removed"), py::arg("min_length") = 5);

  m.def("synth_generate", [](std::size_t dim, std::size_t nominal, std::size_t test_nominal,
                             std::size_t anomaly, std::uint64_t seed) {
    SynthConfig c;
    c.dim = dim;
    c.n_nominal = nominal;
    c.n_test_nominal = test_nominal;
    c.n_anomaly = anomaly;
    c.seed = seed;
    auto d = synth_generate(c);
    return py::make_tuple(std::move(d.train_nominal), std::move(d.test.data), labels_to_py(d.test.labels));
  }, py::arg("dim") = 8, py::arg("nominal") = 200, py::arg("test_nominal") = 50,
     py::arg("anomaly") = 50, py::arg("seed") = 0);
  m.def("inject_corruption", [](const FeatureDataset& train, const FeatureDataset& pool,
                                const std::map<std::string, bool>& pool_labels, double rate,
                                std::uint64_t seed) {
    CorruptionSpec spec;
    spec.rate = rate;
    spec.seed = seed;
    auto out = inject_corruption(train, {pool, labels_from_py(pool_labels)}, spec);
    return py::make_tuple(std::move(out.train.data), labels_to_py(out.train.labels), out.injected_ids);
  }, py::arg("train"), py::arg("pool"), py::arg("pool_labels"), py::arg("rate"), py::arg("seed") = 0);
}
