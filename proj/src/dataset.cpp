#include "baaf/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "baaf/errors.hpp"
#include "baaf/rng.hpp"

namespace baaf {

namespace fs = std::filesystem;
using json = nlohmann::json;

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows_ * dim_) {
    throw ShapeError("feature matrix: expected " + std::to_string(rows_ * dim_) +
                     " values, got " + std::to_string(data_.size()));
  }
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t i : indices) {
    if (i >= rows_) throw ParameterError("row index out of range");
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return FeatureMatrix(indices.size(), dim_, std::move(out));
}

FeatureDataset::FeatureDataset(std::vector<std::string> ids, FeatureMatrix features,
                               std::optional<ClipAssignment> clips)
    : ids_(std::move(ids)), features_(std::move(features)), clips_(std::move(clips)) {
  if (ids_.size() != features_.rows()) {
    throw ValidationError("dataset: id count does not match feature rows");
  }
  if (!ids_.empty() && features_.dim() == 0) {
    throw ValidationError("dataset: feature dimension must be >= 1");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw ValidationError("dataset: duplicate sample id '" + ids_[i] + "'");
    }
  }
  for (float v : features_.data()) {
    if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature value");
  }
  if (!clips_) return;

  if (clips_->clip_of.size() != ids_.size() || clips_->frame_index.size() != ids_.size()) {
    throw ValidationError("dataset: every sample needs a clip assignment");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto& clip = clips_->clip_of[i];
    if (clip_spans_.empty() || clip_spans_.back().clip_id != clip) {
      if (!seen.insert(clip).second) {
        throw ValidationError("dataset: samples of clip '" + clip + "' are not contiguous");
      }
      clip_spans_.push_back({clip, i, i + 1});
    } else {
      if (clips_->frame_index[i] <= clips_->frame_index[i - 1]) {
        throw ValidationError("dataset: frames of clip '" + clip +
                              "' are not in increasing frame order");
      }
      clip_spans_.back().end = i + 1;
    }
  }
}

std::optional<std::size_t> FeatureDataset::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<std::string> ids;
  ids.reserve(indices.size());
  for (std::size_t i : indices) ids.push_back(ids_.at(i));
  std::optional<ClipAssignment> clips;
  if (clips_) {
    clips.emplace();
    for (std::size_t i : indices) {
      clips->clip_of.push_back(clips_->clip_of[i]);
      clips->frame_index.push_back(clips_->frame_index[i]);
    }
  }
  return FeatureDataset(std::move(ids), features_.select(indices), std::move(clips));
}

std::optional<Label> EvalLabels::get(const std::string& id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

std::vector<Label> EvalLabels::aligned(const FeatureDataset& dataset) const {
  std::vector<Label> out;
  out.reserve(dataset.size());
  for (const auto& id : dataset.ids()) {
    auto label = get(id);
    if (!label) throw ValidationError("labels: no label for sample '" + id + "'");
    out.push_back(*label);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (!labels) return;
  if (labels->size() != data.size()) {
    throw ValidationError("labels: cover " + std::to_string(labels->size()) + " of " +
                          std::to_string(data.size()) + " samples");
  }
  (void)labels->aligned(data);
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError(what + ": cannot parse number '" + text + "'");
  }
  return value;
}

std::string format_float(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

bool looks_like_header(const std::vector<std::string>& row, const char* first_name) {
  return !row.empty() && row.front() == first_name;
}

std::vector<float> read_f32le(const fs::path& path, std::size_t rows, std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ShapeError("cannot open feature payload '" + path.string() + "'");
  const std::size_t expected = rows * dim * sizeof(float);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected) {
    throw ShapeError("feature payload '" + path.string() + "' has " +
                     std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
  std::vector<float> out(rows * dim);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = (bits >> 24) | ((bits >> 8) & 0xFF00u) | ((bits << 8) & 0xFF0000u) | (bits << 24);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

void write_f32le(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  for (float v : values) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    const char b[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                       static_cast<char>((bits >> 16) & 0xFF),
                       static_cast<char>((bits >> 24) & 0xFF)};
    out.write(b, 4);
  }
}

}  // namespace

LabeledDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest '" + manifest_path.string() + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  std::string feature_file;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::string format;
  try {
    feature_file = manifest.at("feature_file").get<std::string>();
    rows = manifest.at("rows").get<std::size_t>();
    dim = manifest.at("dim").get<std::size_t>();
    format = manifest.at("format").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError("manifest: " + std::string(e.what()));
  }
  if (dim == 0) throw ValidationError("manifest: dim must be >= 1");

  std::vector<std::string> ids;
  std::vector<float> values;
  if (format == "f32le") {
    values = read_f32le(base / feature_file, rows, dim);
    if (manifest.contains("ids")) {
      ids = manifest["ids"].get<std::vector<std::string>>();
      if (ids.size() != rows) throw ShapeError("manifest: ids array length != rows");
    } else {
      for (std::size_t i = 0; i < rows; ++i) ids.push_back(std::to_string(i));
    }
  } else if (format == "csv") {
    auto table = read_csv(base / feature_file);
    if (table.size() != rows) {
      throw ShapeError("feature csv has " + std::to_string(table.size()) + " rows, expected " +
                       std::to_string(rows));
    }
    values.reserve(rows * dim);
    for (const auto& row : table) {
      if (row.size() != dim + 1) {
        throw ValidationError("feature csv row '" + (row.empty() ? "" : row[0]) + "' has " +
                              std::to_string(row.empty() ? 0 : row.size() - 1) +
                              " values, expected " + std::to_string(dim));
      }
      ids.push_back(row[0]);
      for (std::size_t c = 1; c < row.size(); ++c) {
        values.push_back(parse_number<float>(row[c], "feature csv"));
      }
    }
  } else {
    throw ValidationError("manifest: unknown format '" + format + "'");
  }

  std::optional<ClipAssignment> clips;
  if (manifest.contains("clips_file")) {
    auto table = read_csv(base / manifest["clips_file"].get<std::string>());
    if (!table.empty() && looks_like_header(table.front(), "sample_id")) table.erase(table.begin());
    std::unordered_map<std::string, std::pair<std::string, std::int64_t>> by_id;
    for (const auto& row : table) {
      if (row.size() != 3) throw ValidationError("clips file: expected sample_id,clip_id,frame_index");
      by_id[row[0]] = {row[1], parse_number<std::int64_t>(row[2], "clips file")};
    }
    clips.emplace();
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ValidationError("clips file: no clip for sample '" + id + "'");
      clips->clip_of.push_back(it->second.first);
      clips->frame_index.push_back(it->second.second);
    }
  }

  LabeledDataset out{FeatureDataset(std::move(ids), FeatureMatrix(rows, dim, std::move(values)),
                                    std::move(clips)),
                     std::nullopt};

  if (manifest.contains("labels_file")) {
    auto table = read_csv(base / manifest["labels_file"].get<std::string>());
    if (!table.empty() && looks_like_header(table.front(), "sample_id")) table.erase(table.begin());
    EvalLabels labels;
    for (const auto& row : table) {
      if (row.size() != 2) throw ValidationError("labels file: expected sample_id,label");
      if (!out.data.index_of(row[0])) {
        throw ValidationError("labels file: unknown sample '" + row[0] + "'");
      }
      const int v = parse_number<int>(row[1], "labels file");
      if (v != 0 && v != 1) throw ValidationError("labels file: label must be 0 or 1");
      labels.set(row[0], v == 1 ? Label::kAnomalous : Label::kNominal);
    }
    out.labels = std::move(labels);
  }
  out.validate();
  return out;
}

void write_dataset(const LabeledDataset& dataset, const fs::path& manifest_path,
                   PayloadFormat format) {
  dataset.validate();
  const auto& data = dataset.data;
  const fs::path base = manifest_path.parent_path();
  if (!base.empty()) fs::create_directories(base);
  const std::string stem = manifest_path.stem().string();

  json manifest;
  manifest["version"] = 1;
  manifest["rows"] = data.size();
  manifest["dim"] = data.dim();

  if (format == PayloadFormat::kF32le) {
    const std::string name = stem + ".f32";
    write_f32le(base / name, data.features().data());
    manifest["feature_file"] = name;
    manifest["format"] = "f32le";
    manifest["ids"] = data.ids();
  } else {
    const std::string name = stem + ".features.csv";
    std::ofstream out(base / name);
    if (!out) throw ValidationError("cannot write '" + (base / name).string() + "'");
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << data.id(i);
      for (float v : data.row(i)) out << ',' << format_float(v);
      out << '\n';
    }
    manifest["feature_file"] = name;
    manifest["format"] = "csv";
  }

  if (dataset.labels) {
    const std::string name = stem + ".labels.csv";
    std::ofstream out(base / name);
    for (const auto& id : data.ids()) {
      out << id << ',' << (dataset.labels->is_anomalous(id) ? 1 : 0) << '\n';
    }
    manifest["labels_file"] = name;
  }
  if (data.has_clips()) {
    const std::string name = stem + ".clips.csv";
    std::ofstream out(base / name);
    const auto& clips = *data.clips();
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << data.id(i) << ',' << clips.clip_of[i] << ',' << clips.frame_index[i] << '\n';
    }
    manifest["clips_file"] = name;
  }

  std::ofstream out(manifest_path);
  if (!out) throw ValidationError("cannot write manifest '" + manifest_path.string() + "'");
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Partitioning

std::vector<std::size_t> BagPartition::bag_of(std::size_t sample_count) const {
  std::vector<std::size_t> out(sample_count, bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    for (std::size_t i : bags[b]) out.at(i) = b;
  }
  return out;
}

BagPartition random_split(const FeatureDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ParameterError("random_split: need at least 2 bags, got " + std::to_string(n));

  // Units of assignment: single samples, or whole clips.
  std::vector<std::pair<std::size_t, std::size_t>> units;
  if (dataset.has_clips()) {
    for (const auto& span : dataset.clip_spans()) units.emplace_back(span.begin, span.end);
  } else {
    for (std::size_t i = 0; i < dataset.size(); ++i) units.emplace_back(i, i + 1);
  }
  if (n > units.size()) {
    throw ParameterError("random_split: " + std::to_string(n) + " bags but only " +
                         std::to_string(units.size()) +
                         (dataset.has_clips() ? " clips" : " samples"));
  }

  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  BagPartition partition;
  partition.seed = seed;
  partition.bags.resize(n);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto [begin, end] = units[order[pos]];
    auto& bag = partition.bags[pos % n];
    for (std::size_t i = begin; i < end; ++i) bag.push_back(i);
  }
  for (auto& bag : partition.bags) std::sort(bag.begin(), bag.end());
  return partition;
}

}  // namespace baaf
