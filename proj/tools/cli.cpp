#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "baaf/dataset.hpp"
#include "baaf/engine.hpp"
#include "baaf/errors.hpp"
#include "baaf/metrics.hpp"
#include "baaf/report.hpp"
#include "baaf/rng.hpp"
#include "baaf/sweep.hpp"
#include "baaf/synth.hpp"
#include "baaf/video.hpp"

namespace baaf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::size_t default_threads() {
  if (const char* env = std::getenv("BAAF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// FNV-1a over file bytes; identifies inputs in the run manifest.
std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << h;
  return out.str();
}

json input_hashes(const fs::path& manifest) {
  json out;
  out[manifest.string()] = file_hash(manifest);
  std::ifstream in(manifest);
  json m;
  try {
    in >> m;
  } catch (const json::exception&) {
    return out;
  }
  for (const char* key : {"feature_file", "labels_file", "clips_file"}) {
    if (m.contains(key) && m[key].is_string()) {
      const auto p = manifest.parent_path() / m[key].get<std::string>();
      out[p.string()] = file_hash(p);
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

json run_manifest(const std::string& command, const json& options, std::uint64_t seed,
                  const json& inputs, const json& outputs) {
  return json{{"tool", "baaf"},
              {"version", kToolVersion},
              {"command", command},
              {"options", options},
              {"master_seed", seed},
              {"inputs", inputs},
              {"outputs", outputs}};
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Option structs; each round-trips through the run manifest.

struct BackendOptions {
  std::string backend = "knn";
  std::size_t k_neighbors = 1;
  double coreset = 1.0;
  double shrinkage = 0.01;
  double variance_kept = 0.95;

  BackendConfig config() const {
    switch (backend_kind_from_string(backend)) {
      case BackendKind::kKnnMemoryBank: return BackendConfig::knn(k_neighbors, coreset);
      case BackendKind::kGaussianMahalanobis: return BackendConfig::gaussian(shrinkage);
      case BackendKind::kPcaReconstruction: return BackendConfig::pca(variance_kept);
    }
    throw ParameterError("unknown backend");
  }
  void add(CLI::App* app) {
    app->add_option("--backend", backend, "OCC backend: knn | gaussian | pca")
        ->check(CLI::IsMember({"knn", "gaussian", "pca"}));
    app->add_option("--k", k_neighbors, "knn: neighbor rank used as score")->check(CLI::PositiveNumber);
    app->add_option("--coreset", coreset, "knn: coreset fraction in (0, 1]")
        ->check(CLI::Range(1e-9, 1.0));
    app->add_option("--shrinkage", shrinkage, "gaussian: covariance shrinkage")->check(CLI::Range(0.0, 1.0));
    app->add_option("--variance-kept", variance_kept, "pca: retained variance fraction")
        ->check(CLI::Range(1e-9, 0.999999999));
  }
};

void to_json(json& j, const BackendOptions& o) {
  j = json{{"backend", o.backend}, {"k", o.k_neighbors}, {"coreset", o.coreset},
           {"shrinkage", o.shrinkage}, {"variance_kept", o.variance_kept}};
}
void from_json(const json& j, BackendOptions& o) {
  o.backend = j.at("backend");
  o.k_neighbors = j.at("k");
  o.coreset = j.at("coreset");
  o.shrinkage = j.at("shrinkage");
  o.variance_kept = j.at("variance_kept");
}

NormalizationMode parse_norm(const std::string& s) {
  if (s == "global") return NormalizationMode::kGlobal;
  if (s == "per-model") return NormalizationMode::kPerModel;
  throw ParameterError("unknown normalization '" + s + "'");
}

CorruptionMode parse_mode(const std::string& s) {
  if (s == "overlapping") return CorruptionMode::kOverlapping;
  if (s == "non-overlapping") return CorruptionMode::kNonOverlapping;
  throw ParameterError("unknown corruption mode '" + s + "'");
}

RateConvention parse_convention(const std::string& s) {
  if (s == "final") return RateConvention::kFractionOfFinal;
  if (s == "nominal") return RateConvention::kFractionOfNominal;
  throw ParameterError("unknown rate convention '" + s + "'");
}

struct CorruptionOptions {
  std::size_t group = 1;
  double jitter = 0.05;
  std::string mode = "overlapping";
  std::string convention = "final";

  void add(CLI::App* app) {
    app->add_option("--non-iid-group", group,
                    "anomalies per near-duplicate group (1 = i.i.d.)")->check(CLI::PositiveNumber);
    app->add_option("--jitter", jitter, "std-dev of near-duplicate jitter")->check(CLI::NonNegativeNumber);
    app->add_option("--mode", mode, "overlapping | non-overlapping")
        ->check(CLI::IsMember({"overlapping", "non-overlapping"}));
    app->add_option("--convention", convention, "rate denominator: final | nominal")
        ->check(CLI::IsMember({"final", "nominal"}));
  }
  CorruptionSpec spec(double rate, std::uint64_t seed) const {
    CorruptionSpec s;
    s.rate = rate;
    s.seed = seed;
    s.duplicate_group = group;
    s.duplicate_jitter = jitter;
    s.mode = parse_mode(mode);
    s.convention = parse_convention(convention);
    return s;
  }
};

void to_json(json& j, const CorruptionOptions& o) {
  j = json{{"non_iid_group", o.group}, {"jitter", o.jitter}, {"mode", o.mode}, {"convention", o.convention}};
}
void from_json(const json& j, CorruptionOptions& o) {
  o.group = j.at("non_iid_group");
  o.jitter = j.at("jitter");
  o.mode = j.at("mode");
  o.convention = j.at("convention");
}

struct SynthOptions {
  std::size_t dim = 8;
  std::size_t nominal = 200;
  std::size_t test_nominal = 50;
  std::size_t anomaly = 50;
  double corruption = 0.0;
  CorruptionOptions corrupt;
  std::uint64_t seed = 0;
  std::string out = "synth/dataset.json";
  std::string format = "f32le";
  std::string test_out;
};

void to_json(json& j, const SynthOptions& o) {
  j = json{{"dim", o.dim},         {"nominal", o.nominal}, {"test_nominal", o.test_nominal},
           {"anomaly", o.anomaly}, {"corruption", o.corruption}, {"corrupt", o.corrupt},
           {"seed", o.seed},       {"out", o.out},         {"format", o.format},
           {"test_out", o.test_out}};
}
void from_json(const json& j, SynthOptions& o) {
  o.dim = j.at("dim");
  o.nominal = j.at("nominal");
  o.test_nominal = j.at("test_nominal");
  o.anomaly = j.at("anomaly");
  o.corruption = j.at("corruption");
  o.corrupt = j.at("corrupt").get<CorruptionOptions>();
  o.seed = j.at("seed");
  o.out = j.at("out");
  o.format = j.at("format");
  o.test_out = j.at("test_out");
}

struct FilterOptions {
  std::string manifest;
  std::size_t bags = 4;
  std::size_t votes = 1;
  std::string baaf;
  BackendOptions backend;
  std::string norm = "global";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out = "baaf_out";
  bool video = false;
  std::size_t closing_window = 3;
  std::size_t min_clip = 5;
};

void to_json(json& j, const FilterOptions& o) {
  j = json{{"manifest", o.manifest}, {"bags", o.bags},       {"votes", o.votes},
           {"backend", o.backend},   {"norm", o.norm},       {"seed", o.seed},
           {"threads", o.threads},   {"out", o.out},         {"video", o.video},
           {"closing_window", o.closing_window},             {"min_clip", o.min_clip}};
}
void from_json(const json& j, FilterOptions& o) {
  o.manifest = j.at("manifest");
  o.bags = j.at("bags");
  o.votes = j.at("votes");
  o.backend = j.at("backend").get<BackendOptions>();
  o.norm = j.at("norm");
  o.seed = j.at("seed");
  o.threads = j.at("threads");
  o.out = j.at("out");
  o.video = j.at("video");
  o.closing_window = j.at("closing_window");
  o.min_clip = j.at("min_clip");
}

struct EvalOptions {
  std::size_t dim = 16;
  std::size_t nominal = 360;
  std::size_t test_nominal = 200;
  std::size_t anomaly = 250;
  std::string rates = "0,0.1,0.2,0.3,0.4";
  std::string seeds = "0";
  std::size_t bags = 6;
  std::size_t votes = 3;
  std::string baaf;
  BackendOptions backend;
  std::string norm = "global";
  CorruptionOptions corrupt;
  std::size_t threads = 1;
  std::size_t bins = 20;
  std::string out = "baaf_eval";
};

void to_json(json& j, const EvalOptions& o) {
  j = json{{"dim", o.dim},       {"nominal", o.nominal}, {"test_nominal", o.test_nominal},
           {"anomaly", o.anomaly}, {"rates", o.rates},   {"seeds", o.seeds},
           {"bags", o.bags},     {"votes", o.votes},     {"backend", o.backend},
           {"norm", o.norm},     {"corrupt", o.corrupt}, {"threads", o.threads},
           {"bins", o.bins},     {"out", o.out}};
}
void from_json(const json& j, EvalOptions& o) {
  o.dim = j.at("dim");
  o.nominal = j.at("nominal");
  o.test_nominal = j.at("test_nominal");
  o.anomaly = j.at("anomaly");
  o.rates = j.at("rates");
  o.seeds = j.at("seeds");
  o.bags = j.at("bags");
  o.votes = j.at("votes");
  o.backend = j.at("backend").get<BackendOptions>();
  o.norm = j.at("norm");
  o.corrupt = j.at("corrupt").get<CorruptionOptions>();
  o.threads = j.at("threads");
  o.bins = j.at("bins");
  o.out = j.at("out");
}

struct ScoreOptions {
  std::string detector;
  std::string manifest;
  std::string out = "scores.csv";
};

void to_json(json& j, const ScoreOptions& o) {
  j = json{{"detector", o.detector}, {"manifest", o.manifest}, {"out", o.out}};
}
void from_json(const json& j, ScoreOptions& o) {
  o.detector = j.at("detector");
  o.manifest = j.at("manifest");
  o.out = j.at("out");
}

void apply_baaf_spec(const std::string& spec, std::size_t& votes, std::size_t& bags) {
  if (spec.empty()) return;
  const auto parts = split(spec, '/');
  if (parts.size() != 2) throw CLI::ValidationError("--baaf", "expected votes/bags, e.g. 3/4");
  try {
    votes = std::stoul(parts[0]);
    bags = std::stoul(parts[1]);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--baaf", "expected votes/bags, e.g. 3/4");
  }
  if (bags < 2 || votes < 1) throw CLI::ValidationError("--baaf", "need votes >= 1 and bags >= 2");
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  SynthConfig config;
  config.dim = o.dim;
  config.n_nominal = o.nominal;
  config.n_test_nominal = o.test_nominal;
  config.n_anomaly = o.anomaly;
  config.seed = o.seed;
  const auto data = synth_generate(config);
  const auto corrupted =
      inject_corruption(data.train_nominal, data.test, o.corrupt.spec(o.corruption, derive_seed(o.seed, 21)));
  const auto format = o.format == "csv" ? PayloadFormat::kCsv : PayloadFormat::kF32le;

  const fs::path manifest(o.out);
  write_dataset(corrupted.train, manifest, format);
  // The run record rides inside the dataset manifest to keep the output at three files.
  json outputs{{"dataset", manifest.string()}};
  if (!o.test_out.empty()) {
    write_dataset(evaluation_test_set(data.test, corrupted, parse_mode(o.corrupt.mode)),
                  fs::path(o.test_out), format);
    outputs["test"] = o.test_out;
  }
  json m;
  {
    std::ifstream in(manifest);
    in >> m;
  }
  m["run"] = run_manifest("synth", o, o.seed, json::object(), outputs);
  write_text(manifest, m.dump(2) + "\n");
  out << "wrote " << corrupted.train.data.size() << " samples (" << corrupted.injected_ids.size()
      << " injected anomalies) to " << manifest.string() << "\n";
  return kOk;
}

int cmd_filter(const FilterOptions& o, std::ostream& out) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "run_manifest.json",
             run_manifest("filter", o, o.seed, input_hashes(o.manifest),
                          {{"report", (dir / "filter_report.json").string()},
                           {"filtered", (dir / "filtered.json").string()},
                           {"detector", (dir / "detector.bin").string()}})
                     .dump(2) +
                 "\n");

  const auto input = load_dataset(o.manifest);
  BaafConfig config;
  config.n_bags = o.bags;
  config.k_votes = o.votes;
  config.backend = o.backend.config();
  config.normalization = parse_norm(o.norm);
  config.master_seed = o.seed;
  EngineOptions engine;
  engine.threads = std::max<std::size_t>(1, o.threads);

  // Labels never reach the engine: it only sees input.data.
  std::optional<TrainedDetector> detector;
  FilterReport report;
  std::optional<VideoFilterResult> video;
  if (o.video) {
    VideoOptions vopt{o.closing_window, o.min_clip};
    auto result = baaf_train_video(input.data, config, vopt, engine);
    detector.emplace(std::move(result.detector));
    report = std::move(result.report);
    video = std::move(result.video);
  } else {
    auto result = baaf_train(input.data, config, engine);
    detector.emplace(std::move(result.detector));
    report = std::move(result.report);
  }

  if (input.labels) {
    std::vector<std::string> removed;
    for (auto i : report.removed) removed.push_back(input.data.id(i));
    report.evaluation = filter_precision_recall(removed, input);
  }
  auto report_json = report_to_json(report);
  if (video) {
    json clips = json::array();
    for (const auto& c : video->clips) {
      json kept = json::array();
      for (const auto& iv : c.kept) kept.push_back({iv.start, iv.end});
      std::vector<int> flags(c.removed.begin(), c.removed.end());
      clips.push_back({{"clip_id", c.clip_id}, {"removed_frames", flags}, {"kept_intervals", kept}});
    }
    report_json["video"] = {{"closing_window", o.closing_window},
                            {"min_clip_length", o.min_clip},
                            {"clips", clips}};
  }
  write_text(dir / "filter_report.json", report_json.dump(2) + "\n");

  LabeledDataset filtered;
  if (video) {
    filtered.data = video->filtered;
  } else {
    filtered.data = input.data.subset(report.kept);
  }
  if (input.labels) {
    EvalLabels labels;
    for (const auto& id : filtered.data.ids()) labels.set(id, *input.labels->get(id));
    filtered.labels = std::move(labels);
  }
  write_dataset(filtered, dir / "filtered.json");

  const auto blob = detector->to_blob();
  write_text(dir / "detector.bin", std::string(blob.begin(), blob.end()));

  out << config.name() << "+" << to_string(config.backend.kind()) << ": kept " << report.kept.size()
      << " of " << input.data.size() << ", removed " << report.removed.size()
      << ", fit calls " << report.total_fit_calls << "\n";
  if (report.evaluation) {
    auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("null"); };
    out << "filter precision " << show(report.evaluation->precision) << ", recall "
        << show(report.evaluation->recall) << "\n";
  }
  return kOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "run_manifest.json",
             run_manifest("eval", o, 0, json::object(),
                          {{"metrics", (dir / "metrics.csv").string()},
                           {"gmm_params", (dir / "gmm_params.csv").string()},
                           {"gmm_histogram", (dir / "gmm_histogram.csv").string()}})
                     .dump(2) +
                 "\n");

  SweepConfig config;
  config.synth.dim = o.dim;
  config.synth.n_nominal = o.nominal;
  config.synth.n_test_nominal = o.test_nominal;
  config.synth.n_anomaly = o.anomaly;
  config.baaf.n_bags = o.bags;
  config.baaf.k_votes = o.votes;
  config.baaf.backend = o.backend.config();
  config.baaf.normalization = parse_norm(o.norm);
  config.corruption = o.corrupt.spec(0.0, 0);
  config.threads = std::max<std::size_t>(1, o.threads);
  config.histogram_bins = o.bins;
  config.rates.clear();
  for (const auto& r : split(o.rates, ',')) config.rates.push_back(std::stod(r));
  config.seeds.clear();
  for (const auto& s : split(o.seeds, ',')) config.seeds.push_back(std::stoull(s));
  if (config.rates.empty() || config.seeds.empty()) throw ParameterError("eval: empty rate or seed list");

  const auto result = run_sweep(config);
  write_text(dir / "metrics.csv", metrics_to_csv(result.rows));
  write_text(dir / "gmm_params.csv", gmm_params_to_csv(result.dumps));
  write_text(dir / "gmm_histogram.csv", gmm_histogram_to_csv(result.dumps));
  out << metrics_to_csv(result.rows);
  return kOk;
}

int cmd_score(const ScoreOptions& o, std::ostream& out) {
  auto inputs = input_hashes(o.manifest);
  inputs[o.detector] = file_hash(o.detector);
  write_text(o.out + ".run_manifest.json",
             run_manifest("score", o, 0, inputs, {{"scores", o.out}}).dump(2) + "\n");
  std::ifstream in(o.detector, std::ios::binary);
  if (!in) throw ValidationError("cannot open detector '" + o.detector + "'");
  const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto detector = TrainedDetector::from_blob(blob);
  const auto data = load_dataset(o.manifest);
  const auto scores = detector.score_all(data.data.features());
  std::ostringstream csv;
  csv.precision(17);
  csv << "sample_id,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) csv << data.data.id(i) << ',' << scores[i] << '\n';
  write_text(o.out, csv.str());
  if (data.labels) {
    std::vector<bool> truth;
    for (const auto& id : data.data.ids()) truth.push_back(data.labels->is_anomalous(id));
    try {
      out << "i_auroc " << auroc(scores, truth) << "\n";
    } catch (const ParameterError&) {
      // single-class file: nothing to report
    }
  }
  out << "scored " << scores.size() << " samples -> " << o.out << "\n";
  return kOk;
}

int replay(const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run manifest '" + path + "'");
  json m;
  in >> m;
  if (m.contains("run") && !m.contains("command")) m = m["run"];  // dataset manifest from synth
  const auto command = m.at("command").get<std::string>();
  const auto& options = m.at("options");
  if (command == "synth") return cmd_synth(options.get<SynthOptions>(), out);
  if (command == "filter") return cmd_filter(options.get<FilterOptions>(), out);
  if (command == "eval") return cmd_eval(options.get<EvalOptions>(), out);
  if (command == "score") return cmd_score(options.get<ScoreOptions>(), out);
  throw ValidationError("run manifest: unknown command '" + command + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bagged one-class anomaly filtering (BAAF) toolkit", "baaf"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic (optionally corrupted) training set");
  synth_cmd->add_option("--dim", synth.dim, "feature dimension")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--nominal", synth.nominal, "training nominals")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--test-nominal", synth.test_nominal, "fresh test nominals");
  synth_cmd->add_option("--anomaly", synth.anomaly, "anomaly pool size");
  synth_cmd->add_option("--corruption", synth.corruption, "anomaly fraction injected into train")
      ->check(CLI::Range(0.0, 0.4999999));
  synth.corrupt.add(synth_cmd);
  synth_cmd->add_option("--seed", synth.seed, "seed");
  synth_cmd->add_option("--out", synth.out, "output manifest path");
  synth_cmd->add_option("--format", synth.format, "payload format")->check(CLI::IsMember({"f32le", "csv"}));
  synth_cmd->add_option("--test-out", synth.test_out, "also write the labeled test set here");

  FilterOptions filter;
  filter.threads = default_threads();
  auto* filter_cmd = app.add_subcommand("filter", "filter a training set and train the final detector");
  filter_cmd->add_option("--manifest", filter.manifest, "dataset manifest")->required();
  filter_cmd->add_option("--bags", filter.bags, "number of bags n")->check(CLI::Range(2, 1 << 20));
  filter_cmd->add_option("--votes", filter.votes, "number of votes k")->check(CLI::Range(1, 1 << 20));
  filter_cmd->add_option("--baaf", filter.baaf, "shorthand votes/bags, e.g. 3/4");
  filter.backend.add(filter_cmd);
  filter_cmd->add_option("--norm", filter.norm, "global | per-model")
      ->check(CLI::IsMember({"global", "per-model"}));
  filter_cmd->add_option("--seed", filter.seed, "master seed");
  filter_cmd->add_option("--threads", filter.threads, "worker threads (default $BAAF_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  filter_cmd->add_option("--out", filter.out, "output directory");
  filter_cmd->add_flag("--video", filter.video, "clip-aware post-processing (needs a clips file)");
  filter_cmd->add_option("--closing-window", filter.closing_window, "odd closing width in frames");
  filter_cmd->add_option("--min-clip", filter.min_clip, "shortest sub-clip kept");

  EvalOptions eval;
  eval.threads = default_threads();
  auto* eval_cmd = app.add_subcommand("eval", "corruption sweep on synthetic data");
  eval_cmd->add_option("--dim", eval.dim)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--nominal", eval.nominal)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--test-nominal", eval.test_nominal)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--anomaly", eval.anomaly)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--rates", eval.rates, "comma-separated corruption rates");
  eval_cmd->add_option("--seeds", eval.seeds, "comma-separated seeds");
  eval_cmd->add_option("--bags", eval.bags)->check(CLI::Range(2, 1 << 20));
  eval_cmd->add_option("--votes", eval.votes)->check(CLI::Range(1, 1 << 20));
  eval_cmd->add_option("--baaf", eval.baaf, "shorthand votes/bags");
  eval.backend.add(eval_cmd);
  eval_cmd->add_option("--norm", eval.norm)->check(CLI::IsMember({"global", "per-model"}));
  eval.corrupt.add(eval_cmd);
  eval_cmd->add_option("--threads", eval.threads)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--bins", eval.bins, "histogram bins for GMM dumps")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval.out, "output directory");

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "score a dataset with a saved detector");
  score_cmd->add_option("--detector", score.detector)->required();
  score_cmd->add_option("--manifest", score.manifest)->required();
  score_cmd->add_option("--out", score.out);

  std::string replay_path;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its run manifest");
  replay_cmd->add_option("manifest", replay_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    apply_baaf_spec(filter.baaf, filter.votes, filter.bags);
    apply_baaf_spec(eval.baaf, eval.votes, eval.bags);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*filter_cmd) return cmd_filter(filter, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*score_cmd) return cmd_score(score, out);
    if (*replay_cmd) return replay(replay_path, out);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DegenerateError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const ValidationError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace baaf::cli
