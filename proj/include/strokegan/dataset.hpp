#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "strokegan/image_io.hpp"
#include "strokegan/stroke_codec.hpp"

namespace strokegan {

inline constexpr double kTrainFraction = 0.8;

/// Decorrelates the seeds of independent random streams derived from one
/// user seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct DatasetSplit {
  std::vector<char32_t> train;  // sorted
  std::vector<char32_t> test;   // sorted
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Shuffles with `seed` and keeps round(0.8·N) characters for training.
inline DatasetSplit make_split(std::vector<char32_t> codepoints, std::uint64_t seed) {
  std::sort(codepoints.begin(), codepoints.end());
  codepoints.erase(std::unique(codepoints.begin(), codepoints.end()), codepoints.end());
  if (codepoints.size() < 10) {
    throw Error(ErrorKind::TooFewCharacters, std::to_string(codepoints.size()) + " distinct characters, need >= 10");
  }
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::shuffle(codepoints.begin(), codepoints.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(codepoints.size())));
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(codepoints.begin(), codepoints.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(codepoints.begin() + static_cast<std::ptrdiff_t>(n_train), codepoints.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Few-shot pairing plans.

struct RandomStrategy {
  double fraction = 0.2;
  friend bool operator==(const RandomStrategy&, const RandomStrategy&) = default;
};

/// Draws from a designated structural character set, in file order.
struct DeterministicStrategy {
  std::string set_path;
  std::size_t count = 750;
  friend bool operator==(const DeterministicStrategy&, const DeterministicStrategy&) = default;
};

using FewShotStrategy = std::variant<RandomStrategy, DeterministicStrategy>;

inline std::string describe(const FewShotStrategy& s) {
  if (const auto* r = std::get_if<RandomStrategy>(&s)) {
    std::ostringstream os;
    os.precision(17);
    os << "random " << r->fraction;
    return os.str();
  }
  const auto& d = std::get<DeterministicStrategy>(s);
  return "deterministic " + std::to_string(d.count) + " " + d.set_path;
}

inline FewShotStrategy parse_strategy(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  if (kind == "random") {
    RandomStrategy r;
    if (!(is >> r.fraction)) throw Error(ErrorKind::InvalidConfig, "strategy '" + text + "'");
    return r;
  }
  if (kind == "deterministic") {
    DeterministicStrategy d;
    if (!(is >> d.count)) throw Error(ErrorKind::InvalidConfig, "strategy '" + text + "'");
    std::getline(is >> std::ws, d.set_path);
    return d;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown few-shot strategy '" + text + "'");
}

struct FewShotPlan {
  std::vector<char32_t> paired;    // sorted; S_f / T_f correspondence
  std::vector<char32_t> unpaired;  // sorted; S_u / T_u
  FewShotStrategy strategy;
  std::uint64_t seed = 0;

  bool is_paired(char32_t cp) const { return std::binary_search(paired.begin(), paired.end(), cp); }
  friend bool operator==(const FewShotPlan&, const FewShotPlan&) = default;
};

/// One `U+XXXX` per line; blank lines and `#` comments ignored.
inline std::vector<char32_t> load_codepoint_list(const std::filesystem::path& path,
                                                 ErrorKind missing = ErrorKind::MissingFile) {
  std::ifstream in(path);
  if (!in) throw Error(missing, path.string());
  std::vector<char32_t> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    char32_t cp = 0;
    if (!parse_codepoint(line, cp)) throw LineError(ErrorKind::MalformedRecord, line_no, "bad codepoint '" + line + "'");
    out.push_back(cp);
  }
  return out;
}

inline void save_codepoint_list(const std::filesystem::path& path, const std::vector<char32_t>& cps) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (char32_t cp : cps) out << format_codepoint(cp) << '\n';
}

/// floor(p·n) with a tolerance for binary representation error (0.29·100 is
/// 28.999… in doubles).
inline std::size_t floor_fraction(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

inline FewShotPlan make_fewshot_plan(const DatasetSplit& split, const FewShotStrategy& strategy, std::uint64_t seed) {
  FewShotPlan plan;
  plan.strategy = strategy;
  plan.seed = seed;
  std::set<char32_t> paired;
  if (const auto* r = std::get_if<RandomStrategy>(&strategy)) {
    if (!(r->fraction >= 0.0 && r->fraction <= 1.0)) {
      throw Error(ErrorKind::PercentOutOfRange, std::to_string(r->fraction));
    }
    std::vector<char32_t> pool = split.train;
    std::mt19937_64 rng(mix_seed(seed, 2));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(floor_fraction(r->fraction, pool.size()));
    paired.insert(pool.begin(), pool.end());
  } else {
    const auto& d = std::get<DeterministicStrategy>(strategy);
    const std::vector<char32_t> structural = load_codepoint_list(d.set_path, ErrorKind::StructuralSetUnavailable);
    for (char32_t cp : structural) {
      if (paired.size() >= d.count) break;
      if (std::binary_search(split.train.begin(), split.train.end(), cp)) paired.insert(cp);
    }
  }
  plan.paired.assign(paired.begin(), paired.end());
  for (char32_t cp : split.train) {
    if (!paired.contains(cp)) plan.unpaired.push_back(cp);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Training entries and copy augmentation.

struct TrainingEntry {
  char32_t codepoint = 0;
  bool has_pair = false;
  friend bool operator==(const TrainingEntry&, const TrainingEntry&) = default;
};

/// Paired characters first (codepoint order), then unpaired.
inline std::vector<TrainingEntry> training_entries(const FewShotPlan& plan) {
  std::vector<TrainingEntry> out;
  out.reserve(plan.paired.size() + plan.unpaired.size());
  for (char32_t cp : plan.paired) out.push_back({cp, true});
  for (char32_t cp : plan.unpaired) out.push_back({cp, false});
  return out;
}

/// Appends floor(fraction·|train|) duplicates of the leading entries, all
/// marked unpaired.
inline std::vector<TrainingEntry> copy_augment(std::vector<TrainingEntry> train, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorKind::PercentOutOfRange, std::to_string(fraction));
  const std::size_t extra = floor_fraction(fraction, train.size());
  train.reserve(train.size() + extra);
  for (std::size_t i = 0; i < extra; ++i) train.push_back({train[i].codepoint, false});
  return train;
}

// ---------------------------------------------------------------------------
// Manifests.

inline void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "# strokegan split\nseed " << split.seed << "\n[train]\n";
  for (char32_t cp : split.train) out << format_codepoint(cp) << '\n';
  out << "[test]\n";
  for (char32_t cp : split.test) out << format_codepoint(cp) << '\n';
}

inline void write_plan_manifest(const std::filesystem::path& path, const FewShotPlan& plan) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "# strokegan fewshot-plan\nseed " << plan.seed << "\nstrategy " << describe(plan.strategy) << "\n[paired]\n";
  for (char32_t cp : plan.paired) out << format_codepoint(cp) << '\n';
  out << "[unpaired]\n";
  for (char32_t cp : plan.unpaired) out << format_codepoint(cp) << '\n';
}

namespace detail {

struct Manifest {
  std::map<std::string, std::string> header;
  std::map<std::string, std::vector<char32_t>> sections;
};

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  Manifest m;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      m.sections[section];
      continue;
    }
    if (section.empty()) {
      const auto sp = line.find(' ');
      if (sp == std::string::npos) throw LineError(ErrorKind::MalformedRecord, line_no, line);
      m.header[line.substr(0, sp)] = line.substr(sp + 1);
      continue;
    }
    char32_t cp = 0;
    if (!parse_codepoint(line, cp)) throw LineError(ErrorKind::MalformedRecord, line_no, line);
    m.sections[section].push_back(cp);
  }
  return m;
}

}  // namespace detail

inline DatasetSplit read_split_manifest(const std::filesystem::path& path) {
  auto m = detail::read_manifest(path);
  DatasetSplit s;
  s.seed = std::stoull(m.header.at("seed"));
  s.train = m.sections["train"];
  s.test = m.sections["test"];
  return s;
}

inline FewShotPlan read_plan_manifest(const std::filesystem::path& path) {
  auto m = detail::read_manifest(path);
  FewShotPlan p;
  p.seed = std::stoull(m.header.at("seed"));
  p.strategy = parse_strategy(m.header.at("strategy"));
  p.paired = m.sections["paired"];
  p.unpaired = m.sections["unpaired"];
  return p;
}

// ---------------------------------------------------------------------------
// Font-pair datasets held in memory.

/// Source and target glyphs (1×H×W in [-1, 1]) keyed by codepoint, plus the
/// stroke table of the source characters.
struct GlyphDataset {
  std::size_t resolution = 0;
  std::map<char32_t, Tensor<float>> source;
  std::map<char32_t, Tensor<float>> target;
  StrokeTable strokes;

  /// Characters present in both fonts and the stroke table.
  std::vector<char32_t> common_codepoints() const {
    std::vector<char32_t> out;
    for (const auto& [cp, img] : source) {
      if (target.contains(cp) && strokes.contains(cp)) out.push_back(cp);
    }
    return out;
  }
};

/// Reads `<root>/<font_id>/U+XXXX.png`.
inline std::map<char32_t, Tensor<float>> load_font_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::MissingFile, dir.string());
  std::map<char32_t, Tensor<float>> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".png") continue;
    char32_t cp = 0;
    if (!parse_codepoint(entry.path().stem().string(), cp)) continue;
    out.emplace(cp, load_glyph_png(entry.path()));
  }
  return out;
}

inline void save_font_dir(const std::filesystem::path& dir, const std::map<char32_t, Tensor<float>>& glyphs) {
  std::filesystem::create_directories(dir);
  for (const auto& [cp, img] : glyphs) save_glyph_png(dir / (format_codepoint(cp) + ".png"), img);
}

/// Loads `<root>/<source_font>/`, `<root>/<target_font>/` and the stroke table
/// (relative paths resolve against `root`). All glyphs must share one square
/// resolution.
inline GlyphDataset load_glyph_dataset(const std::filesystem::path& root, const std::string& source_font,
                                       const std::string& target_font, const std::filesystem::path& stroke_table) {
  GlyphDataset d;
  const auto table_path = stroke_table.is_absolute() ? stroke_table : root / stroke_table;
  d.strokes = load_stroke_table(table_path);
  d.source = load_font_dir(root / source_font);
  d.target = load_font_dir(root / target_font);
  if (d.source.empty()) throw Error(ErrorKind::EmptyGlyphSet, (root / source_font).string());
  if (d.target.empty()) throw Error(ErrorKind::EmptyGlyphSet, (root / target_font).string());
  d.resolution = d.source.begin()->second.dim(1);
  for (const auto* glyphs : {&d.source, &d.target}) {
    for (const auto& [cp, img] : *glyphs) {
      if (img.dim(1) != d.resolution || img.dim(2) != d.resolution) {
        throw Error(ErrorKind::ShapeMismatch, format_codepoint(cp) + " is " + img.describe() + ", expected " +
                                                  std::to_string(d.resolution) + "×" + std::to_string(d.resolution));
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Batches.

/// One mini-batch. `paired_truth` rows are only meaningful where `has_pair`
/// is set (other rows are zero).
struct Batch {
  std::vector<char32_t> codepoints;
  Tensor<float> source;            // B×1×H×W
  Tensor<float> encodings;         // B×32
  Tensor<float> target_unpaired;   // B×1×H×W, independent draw of target glyphs
  Tensor<float> target_encodings;  // B×32, encodings of the target_unpaired characters
  Tensor<float> paired_truth;      // B×1×H×W
  std::vector<bool> has_pair;

  std::size_t size() const { return codepoints.size(); }
};

/// Deterministic, random-access batch stream. Epoch e visits the entries in a
/// permutation derived from (seed, e); batch b of epoch e is a pure function
/// of those inputs, so resumed runs see exactly the same data.
class BatchStream {
 public:
  BatchStream(const GlyphDataset& data, std::vector<TrainingEntry> entries, std::size_t batch_size,
              std::uint64_t seed)
      : data_(&data), entries_(std::move(entries)), batch_size_(batch_size), seed_(seed) {
    if (batch_size_ == 0) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (entries_.empty()) throw Error(ErrorKind::EmptyDataset, "no training entries");
    std::set<char32_t> seen;
    for (const auto& e : entries_) {
      if (!data.source.contains(e.codepoint)) throw Error(ErrorKind::EmptyDataset, "no source glyph for " + format_codepoint(e.codepoint));
      if (!data.strokes.contains(e.codepoint)) throw Error(ErrorKind::UnknownCharacter, format_codepoint(e.codepoint));
      if (e.has_pair && !data.target.contains(e.codepoint)) {
        throw Error(ErrorKind::EmptyDataset, "no target glyph for paired " + format_codepoint(e.codepoint));
      }
      if (seen.insert(e.codepoint).second && data.target.contains(e.codepoint)) target_pool_.push_back(e.codepoint);
    }
    if (target_pool_.empty()) throw Error(ErrorKind::EmptyDataset, "no target glyphs among training characters");
  }

  std::size_t batches_per_epoch() const { return (entries_.size() + batch_size_ - 1) / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }
  const std::vector<TrainingEntry>& entries() const { return entries_; }

  /// Entry indices of epoch `epoch` in visiting order.
  std::vector<std::size_t> epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(entries_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mix_seed(seed_, 1000 + 2 * epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }

  Batch batch(std::size_t epoch, std::size_t index) const {
    if (index >= batches_per_epoch()) throw Error(ErrorKind::InvalidConfig, "batch index out of range");
    if (cached_epoch_ != epoch || cached_order_.empty()) {
      cached_order_ = epoch_order(epoch);
      cached_targets_.resize(entries_.size());
      std::mt19937_64 rng(mix_seed(seed_, 1001 + 2 * epoch));
      std::uniform_int_distribution<std::size_t> pick(0, target_pool_.size() - 1);
      for (auto& t : cached_targets_) t = target_pool_[pick(rng)];
      cached_epoch_ = epoch;
    }
    const std::size_t begin = index * batch_size_;
    const std::size_t end = std::min(begin + batch_size_, entries_.size());
    const std::size_t n = end - begin, res = data_->resolution;
    Batch b;
    b.source = Tensor<float>({n, 1, res, res});
    b.encodings = Tensor<float>({n, std::size_t{kStrokeTypes}});
    b.target_unpaired = Tensor<float>({n, 1, res, res});
    b.target_encodings = Tensor<float>({n, std::size_t{kStrokeTypes}});
    b.paired_truth = Tensor<float>({n, 1, res, res});
    const std::size_t px = res * res;
    for (std::size_t i = 0; i < n; ++i) {
      const TrainingEntry& e = entries_[cached_order_[begin + i]];
      b.codepoints.push_back(e.codepoint);
      b.has_pair.push_back(e.has_pair);
      copy_image(data_->source.at(e.codepoint), b.source.data() + i * px);
      copy_image(data_->target.at(cached_targets_[begin + i]), b.target_unpaired.data() + i * px);
      if (e.has_pair) copy_image(data_->target.at(e.codepoint), b.paired_truth.data() + i * px);
      const StrokeEncoding enc = encode_character(data_->strokes, e.codepoint);
      const StrokeEncoding tenc = encode_character(data_->strokes, cached_targets_[begin + i]);
      for (int j = 0; j < kStrokeTypes; ++j) {
        b.encodings[i * kStrokeTypes + j] = enc[j] ? 1.0f : 0.0f;
        b.target_encodings[i * kStrokeTypes + j] = tenc[j] ? 1.0f : 0.0f;
      }
    }
    for (const Tensor<float>* t : {&b.source, &b.target_unpaired, &b.paired_truth}) {
      if (!in_unit_range(t->values())) throw Error(ErrorKind::DomainError, "batch pixel outside [-1, 1]");
    }
    return b;
  }

  /// Batch for a global step counter.
  Batch at_step(std::size_t step) const { return batch(step / batches_per_epoch(), step % batches_per_epoch()); }

 private:
  void copy_image(const Tensor<float>& img, float* dst) const {
    if (img.size() != data_->resolution * data_->resolution) {
      throw Error(ErrorKind::ShapeMismatch, "glyph " + img.describe() + " vs resolution " + std::to_string(data_->resolution));
    }
    std::copy(img.data(), img.data() + img.size(), dst);
  }

  const GlyphDataset* data_;
  std::vector<TrainingEntry> entries_;
  std::vector<char32_t> target_pool_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  mutable std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  mutable std::vector<std::size_t> cached_order_;
  mutable std::vector<char32_t> cached_targets_;
};

}  // namespace strokegan
