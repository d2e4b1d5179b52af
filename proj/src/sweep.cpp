#include "baaf/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "baaf/metrics.hpp"
#include "baaf/rng.hpp"

namespace baaf {

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "null"; }

std::vector<bool> anomalous_mask(const LabeledDataset& test) {
  const auto labels = test.labels->aligned(test.data);
  std::vector<bool> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == Label::kAnomalous;
  return out;
}

}  // namespace

CellResult run_cell(const SynthData& data, const SweepConfig& config, double rate,
                    std::uint64_t seed, std::size_t rate_index) {
  CorruptionSpec spec = config.corruption;
  spec.rate = rate;
  spec.seed = derive_seed(seed, 11, rate_index);
  const auto corrupted = inject_corruption(data.train_nominal, data.test, spec);
  const auto test = evaluation_test_set(data.test, corrupted, spec.mode);
  const auto truth = anomalous_mask(test);

  BaafConfig baaf = config.baaf;
  baaf.master_seed = derive_seed(seed, 12, rate_index);
  EngineOptions options;
  options.threads = config.threads;
  auto result = baaf_train(corrupted.train.data, baaf, options);

  const auto final_seed = final_train_seed(baaf.master_seed);
  const auto unfiltered = fit(baaf.backend, corrupted.train.data, final_seed);
  const auto clean = fit(baaf.backend, data.train_nominal, final_seed);

  std::vector<std::string> removed_ids;
  for (std::size_t i : result.report.removed) removed_ids.push_back(corrupted.train.data.id(i));
  const auto eval = filter_precision_recall(removed_ids, corrupted.train);
  result.report.evaluation = eval;

  CellResult cell;
  cell.row.config = baaf.name() + "+" + to_string(baaf.backend.kind());
  cell.row.seed = seed;
  cell.row.rate = rate;
  cell.row.i_auroc_filtered = auroc(result.detector.score_all(test.data.features()), truth);
  cell.row.i_auroc_unfiltered = auroc(unfiltered.score_all(test.data.features()), truth);
  cell.row.i_auroc_clean = auroc(clean.score_all(test.data.features()), truth);
  cell.row.filter_precision = eval.precision;
  cell.row.filter_recall = eval.recall;
  cell.row.fit_calls = result.report.total_fit_calls;
  cell.row.injected = corrupted.injected_ids.size();
  cell.row.removed = result.report.removed.size();
  cell.report = std::move(result.report);
  return cell;
}

SweepResult run_sweep(const SweepConfig& config) {
  SweepResult out;
  for (std::uint64_t seed : config.seeds) {
    SynthConfig synth = config.synth;
    synth.seed = seed;
    const auto data = synth_generate(synth);
    for (std::size_t r = 0; r < config.rates.size(); ++r) {
      auto cell = run_cell(data, config, config.rates[r], seed, r);
      auto dumps = gmm_dumps(cell.report, config.rates[r], seed, config.histogram_bins);
      out.dumps.insert(out.dumps.end(), dumps.begin(), dumps.end());
      out.rows.push_back(std::move(cell.row));
    }
  }
  return out;
}

std::vector<GmmDump> gmm_dumps(const FilterReport& report, double rate, std::uint64_t seed,
                               std::size_t bins) {
  std::vector<GmmDump> out;
  for (const auto& vote : report.votes) {
    for (std::size_t i = 0; i < vote.thresholds.size(); ++i) {
      GmmDump d;
      d.rate = rate;
      d.seed = seed;
      d.vote = vote.vote_index;
      d.bag = i;
      d.threshold = vote.thresholds[i];
      d.histogram.assign(std::max<std::size_t>(bins, 1), 0);
      for (const auto& p : vote.predictions[i]) {
        for (double v : p) {
          auto b = static_cast<std::size_t>(v * static_cast<double>(d.histogram.size()));
          d.histogram[std::min(b, d.histogram.size() - 1)] += 1;
        }
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "config,seed,p,i_auroc_filtered,i_auroc_unfiltered,i_auroc_clean,filter_precision,"
         "filter_recall,fit_calls\n";
  for (const auto& r : rows) {
    out << r.config << ',' << r.seed << ',' << num(r.rate) << ',' << num(r.i_auroc_filtered) << ','
        << num(r.i_auroc_unfiltered) << ',' << num(r.i_auroc_clean) << ',' << opt(r.filter_precision)
        << ',' << opt(r.filter_recall) << ',' << r.fit_calls << '\n';
  }
  return out.str();
}

std::string gmm_params_to_csv(const std::vector<GmmDump>& dumps) {
  std::ostringstream out;
  out << "p,seed,vote,bag,weight_1,mean_1,variance_1,weight_2,mean_2,variance_2,threshold,fallback,"
         "clamped,iterations,converged\n";
  for (const auto& d : dumps) {
    out << num(d.rate) << ',' << d.seed << ',' << d.vote << ',' << d.bag << ',';
    if (d.threshold.gmm) {
      for (const auto& c : d.threshold.gmm->components) {
        out << num(c.weight) << ',' << num(c.mean) << ',' << num(c.variance) << ',';
      }
    } else {
      out << ",,,,,,";
    }
    out << num(d.threshold.threshold) << ',' << (d.threshold.fallback ? 1 : 0) << ','
        << (d.threshold.clamped ? 1 : 0) << ','
        << (d.threshold.gmm ? d.threshold.gmm->iterations : 0) << ','
        << (d.threshold.gmm && d.threshold.gmm->converged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string gmm_histogram_to_csv(const std::vector<GmmDump>& dumps) {
  std::ostringstream out;
  out << "p,seed,vote,bag,bin_lo,bin_hi,count,density,weighted_pdf_1,weighted_pdf_2,threshold\n";
  for (const auto& d : dumps) {
    std::size_t total = 0;
    for (auto c : d.histogram) total += c;
    const double width = 1.0 / static_cast<double>(d.histogram.size());
    for (std::size_t b = 0; b < d.histogram.size(); ++b) {
      const double lo = static_cast<double>(b) * width;
      const double center = lo + 0.5 * width;
      const double density =
          total ? static_cast<double>(d.histogram[b]) / (static_cast<double>(total) * width) : 0.0;
      out << num(d.rate) << ',' << d.seed << ',' << d.vote << ',' << d.bag << ',' << num(lo) << ','
          << num(lo + width) << ',' << d.histogram[b] << ',' << num(density) << ',';
      if (d.threshold.gmm) {
        const auto& c = d.threshold.gmm->components;
        out << num(c[0].weight * normal_pdf(center, c[0].mean, c[0].variance)) << ','
            << num(c[1].weight * normal_pdf(center, c[1].mean, c[1].variance));
      } else {
        out << ',';
      }
      out << ',' << num(d.threshold.threshold) << '\n';
    }
  }
  return out.str();
}

}  // namespace baaf
