#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "strokegan/adam.hpp"
#include "strokegan/config.hpp"
#include "strokegan/dataset.hpp"
#include "strokegan/losses.hpp"
#include "strokegan/model.hpp"

namespace strokegan {

using Generator = GeneratorParams<float>;
using Discriminator = DiscriminatorParams<float>;

/// Everything needed to continue a run bit-exactly.
struct TrainState {
  TrainConfig config;
  Generator generator;
  Discriminator discriminator;
  std::optional<Generator> reverse;  // only with config.two_generators
  AdamState<Generator> generator_opt;
  AdamState<Discriminator> discriminator_opt;
  std::optional<AdamState<Generator>> reverse_opt;
  std::uint64_t step = 0;
  // Data order and target draws are pure functions of (data_seed, step).
  std::uint64_t data_seed = 0;

  /// Optional observer of the update sequence within a step.
  std::function<void(const std::string&)> on_event;

  void emit(const std::string& e) const {
    if (on_event) on_event(e);
  }
};

inline TrainState make_train_state(const TrainConfig& config) {
  config.validate();
  ModelParams<float> m = init_params<float>(config.seed, config.shape);
  TrainState s;
  s.config = config;
  s.generator = std::move(m.generator);
  s.discriminator = std::move(m.discriminator);
  s.generator_opt = AdamState<Generator>::like(s.generator);
  s.discriminator_opt = AdamState<Discriminator>::like(s.discriminator);
  if (config.two_generators) {
    s.reverse = init_params<float>(mix_seed(config.seed, 99), config.shape).generator;
    s.reverse_opt = AdamState<Generator>::like(*s.reverse);
  }
  s.data_seed = config.seed;
  return s;
}

/// Loss values of one step. `adv_d` is L_adv as the discriminator sees it
/// (E log D(y) + E log(1 − D(G(x)))); `adv_g` is the generator's adversarial
/// objective; `total` is L_adv + λ_cyc·L_cyc + λ_stroke·L_stroke + λ_FS3·L_FS3.
struct StepLosses {
  std::uint64_t step = 0;
  double adv_d = 0.0;
  double adv_g = 0.0;
  double cycle = 0.0;
  double stroke = 0.0;
  double fs3 = 0.0;
  double total = 0.0;

  friend bool operator==(const StepLosses&, const StepLosses&) = default;
};

inline constexpr const char* kLossCsvHeader = "step,L_adv_D,L_adv_G,L_cyc,L_stroke,L_FS3,total";

inline std::string loss_csv_row(const StepLosses& l) {
  std::ostringstream os;
  os.precision(9);
  os << l.step << ',' << l.adv_d << ',' << l.adv_g << ',' << l.cycle << ',' << l.stroke << ',' << l.fs3 << ','
     << l.total;
  return os.str();
}

namespace detail {

inline void require_finite(double v, const char* term, const StepLosses& partial) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::NonFiniteLoss, std::string(term) + " = " + std::to_string(v) + " at step " +
                                              std::to_string(partial.step) + " (" + loss_csv_row(partial) + ")");
  }
}

}  // namespace detail

/// Intermediate of the generator forward pass shared by both updates.
struct GeneratorPass {
  Tensor<float> fake;
  GeneratorTrace<float> trace;
};

inline GeneratorPass generate_fakes(TrainState& s, const Batch& batch) {
  GeneratorPass p;
  p.fake = generator_forward(s.generator, batch.source, Mode::Train, &p.trace);
  s.emit("G.forward");
  return p;
}

/// Discriminator update: minimizes −L_adv + λ_stroke·L_stroke(D_st(G(x)), c).
/// Touches only discriminator parameters and optimizer state.
inline void discriminator_update(TrainState& s, const Batch& batch, const Tensor<float>& fake, StepLosses& out,
                                 double lr) {
  const TrainConfig& c = s.config;
  Discriminator grads = zeros_like(s.discriminator);

  DiscriminatorTrace<float> real_trace, fake_trace;
  const auto real = discriminator_forward(s.discriminator, batch.target_unpaired, Mode::Train, &real_trace);
  const auto gen = discriminator_forward(s.discriminator, fake, Mode::Train, &fake_trace);

  const auto adv = discriminator_adversarial(real.realism, gen.realism);
  out.adv_d = -adv.value;
  detail::require_finite(out.adv_d, "L_adv_D", out);

  auto stroke = stroke_loss(gen.stroke, batch.encodings);
  for (auto& v : stroke.grad.values()) v *= static_cast<float>(c.weights.lambda_stroke);
  Tensor<float> real_stroke_grad;
  if (c.supervise_real_strokes && !batch.target_encodings.empty()) {
    auto rs = stroke_loss(real.stroke, batch.target_encodings);
    for (auto& v : rs.grad.values()) v *= static_cast<float>(c.weights.lambda_stroke);
    real_stroke_grad = std::move(rs.grad);
  }
  discriminator_backward(s.discriminator, real_trace, adv.grad_real, real_stroke_grad, grads);
  discriminator_backward(s.discriminator, fake_trace, adv.grad_fake, stroke.grad, grads);
  s.discriminator_opt.apply<float>(s.discriminator, grads, lr, c.adam());
  s.emit("D.update");
}

/// Generator update against the already-updated discriminator: minimizes
/// adv_G + λ_cyc·L_cyc + λ_stroke·L_stroke + λ_FS3·L_FS3. Touches only
/// generator parameters (and the reverse generator, when enabled).
inline void generator_update(TrainState& s, const Batch& batch, GeneratorPass& pass, StepLosses& out, double lr) {
  const TrainConfig& c = s.config;
  Generator grads = zeros_like(s.generator);

  DiscriminatorTrace<float> d_trace;
  const auto d_out = discriminator_forward(s.discriminator, pass.fake, Mode::Train, &d_trace);
  s.emit("D.forward");

  const auto adv = generator_adversarial(d_out.realism, c.adversarial_form);
  out.adv_g = adv.value;
  detail::require_finite(out.adv_g, "L_adv_G", out);

  auto stroke = stroke_loss(d_out.stroke, batch.encodings);
  out.stroke = stroke.value;
  detail::require_finite(out.stroke, "L_stroke", out);
  for (auto& v : stroke.grad.values()) v *= static_cast<float>(c.weights.lambda_stroke);

  // Discriminator gradients here are scratch; only dL/d(fake) is used.
  Discriminator scratch = zeros_like(s.discriminator);
  Tensor<float> d_fake = discriminator_backward(s.discriminator, d_trace, adv.grad, stroke.grad, scratch);

  auto fs3 = fs3_loss(pass.fake, batch.paired_truth, batch.has_pair);
  out.fs3 = fs3.value;
  detail::require_finite(out.fs3, "L_FS3", out);
  const float w_fs3 = static_cast<float>(c.weights.lambda_fs3);
  for (std::size_t i = 0; i < d_fake.size(); ++i) d_fake[i] += w_fs3 * fs3.grad[i];

  // Cycle: x → G(x) → G(G(x)), or F(G(x)) with the two-generator variant.
  GeneratorTrace<float> rec_trace;
  Generator* back = c.two_generators ? &*s.reverse : &s.generator;
  Generator reverse_grads;
  if (c.two_generators) reverse_grads = zeros_like(*s.reverse);
  const Tensor<float> rec = generator_forward(*back, pass.fake, Mode::Train, &rec_trace);
  auto cyc = cycle_loss(batch.source, rec);
  out.cycle = cyc.value;
  detail::require_finite(out.cycle, "L_cyc", out);
  for (auto& v : cyc.grad.values()) v *= static_cast<float>(c.weights.lambda_cyc);
  const Tensor<float> d_from_cycle =
      generator_backward(*back, rec_trace, cyc.grad, c.two_generators ? reverse_grads : grads);
  nn::add_inplace(d_fake, d_from_cycle);

  generator_backward(s.generator, pass.trace, d_fake, grads);
  s.generator_opt.apply<float>(s.generator, grads, lr, c.adam());
  if (c.two_generators) s.reverse_opt->apply<float>(*s.reverse, reverse_grads, lr, c.adam());
  s.emit("G.update");
}

/// One D update followed by one G update; step counter +1.
inline StepLosses train_step(TrainState& s, const Batch& batch, std::uint64_t epoch = 0) {
  StepLosses out;
  out.step = s.step;
  const double lr = learning_rate_at(s.config, epoch);
  GeneratorPass pass = generate_fakes(s, batch);
  discriminator_update(s, batch, pass.fake, out, lr);
  generator_update(s, batch, pass, out, lr);
  const LossBreakdown b = total_loss({out.adv_d, out.cycle, out.stroke, out.fs3}, s.config.weights);
  out.total = b.total;
  ++s.step;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints. Layout (little-endian):
//   magic "SGANCKPT" | u32 format version | str config echo
//   | u64 step | u64 data_seed | u8 has_reverse
//   | tree generator | tree discriminator | [tree reverse]
//   | adam generator | adam discriminator | [adam reverse]
// tree  = u32 count, then per tensor: str name | u32 rank | u64 dims… | f32 data…
//         (trainable tensors, then batch-norm buffers)
// adam  = u64 step | tree m | tree v   (trainable tensors only)
// str   = u32 length | bytes

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename V>
  void pod(const V& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    str(name);
    pod(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) pod(static_cast<std::uint64_t>(d));
    out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename V>
  V pod() {
    V v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw Error(ErrorKind::CorruptCheckpoint, "truncated file");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 26)) throw Error(ErrorKind::CorruptCheckpoint, "string length " + std::to_string(n));
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw Error(ErrorKind::CorruptCheckpoint, "truncated file");
    return s;
  }
  void tensor(const std::string& expected_name, Tensor<float>& t) {
    const std::string name = str();
    if (name != expected_name) {
      throw Error(ErrorKind::CorruptCheckpoint, "expected tensor '" + expected_name + "', found '" + name + "'");
    }
    const auto rank = pod<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(pod<std::uint64_t>());
    if (shape != t.shape()) {
      throw Error(ErrorKind::CorruptCheckpoint, name + " shape " + Tensor<float>::describe(shape) + " vs " + t.describe());
    }
    in_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in_) throw Error(ErrorKind::CorruptCheckpoint, "truncated tensor " + name);
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

template <typename Params>
void write_tree(Writer& w, const Params& p, bool buffers) {
  std::uint32_t n = 0;
  p.visit([&](const std::string&, const Tensor<float>&) { ++n; });
  if (buffers) p.visit_buffers([&](const std::string&, const Tensor<float>&) { ++n; });
  w.pod(n);
  p.visit([&](const std::string& name, const Tensor<float>& t) { w.tensor(name, t); });
  if (buffers) p.visit_buffers([&](const std::string& name, const Tensor<float>& t) { w.tensor(name, t); });
}

template <typename Params>
void read_tree(Reader& r, Params& p, bool buffers) {
  std::uint32_t expected = 0;
  p.visit([&](const std::string&, const Tensor<float>&) { ++expected; });
  if (buffers) p.visit_buffers([&](const std::string&, const Tensor<float>&) { ++expected; });
  const auto n = r.pod<std::uint32_t>();
  if (n != expected) {
    throw Error(ErrorKind::CorruptCheckpoint, "tensor count " + std::to_string(n) + " vs " + std::to_string(expected));
  }
  p.visit([&](const std::string& name, Tensor<float>& t) { r.tensor(name, t); });
  if (buffers) p.visit_buffers([&](const std::string& name, Tensor<float>& t) { r.tensor(name, t); });
}

template <typename Params>
void write_adam(Writer& w, const AdamState<Params>& a) {
  w.pod(static_cast<std::uint64_t>(a.step));
  write_tree(w, a.m, false);
  write_tree(w, a.v, false);
}

template <typename Params>
void read_adam(Reader& r, AdamState<Params>& a) {
  a.step = r.pod<std::uint64_t>();
  read_tree(r, a.m, false);
  read_tree(r, a.v, false);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const TrainState& s) {
  detail::Writer w(out);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod(kCheckpointVersion);
  w.str(format_config(s.config));
  w.pod(static_cast<std::uint64_t>(s.step));
  w.pod(static_cast<std::uint64_t>(s.data_seed));
  w.pod(static_cast<std::uint8_t>(s.reverse ? 1 : 0));
  detail::write_tree(w, s.generator, true);
  detail::write_tree(w, s.discriminator, true);
  if (s.reverse) detail::write_tree(w, *s.reverse, true);
  detail::write_adam(w, s.generator_opt);
  detail::write_adam(w, s.discriminator_opt);
  if (s.reverse) detail::write_adam(w, *s.reverse_opt);
}

inline TrainState read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kCheckpointMagic)) {
    throw Error(ErrorKind::CorruptCheckpoint, "bad magic");
  }
  detail::Reader r(in);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::CorruptCheckpoint,
                "format version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  std::istringstream config_text(r.str());
  TrainConfig config;
  try {
    config = parse_config(config_text);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("config echo: ") + e.what());
  }
  // Shapes come from the config; the stored tensors must match them.
  TrainState s = make_train_state(config);
  s.step = r.pod<std::uint64_t>();
  s.data_seed = r.pod<std::uint64_t>();
  const bool has_reverse = r.pod<std::uint8_t>() != 0;
  if (has_reverse != config.two_generators) throw Error(ErrorKind::CorruptCheckpoint, "reverse generator flag mismatch");
  detail::read_tree(r, s.generator, true);
  detail::read_tree(r, s.discriminator, true);
  if (has_reverse) detail::read_tree(r, *s.reverse, true);
  detail::read_adam(r, s.generator_opt);
  detail::read_adam(r, s.discriminator_opt);
  if (has_reverse) detail::read_adam(r, *s.reverse_opt);
  if (!r.at_end()) throw Error(ErrorKind::CorruptCheckpoint, "trailing bytes");
  return s;
}

/// Atomic: writes `<path>.tmp` then renames over `path`.
inline void save_checkpoint(const std::filesystem::path& path, const TrainState& s) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    write_checkpoint(out, s);
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------

/// Inputs to a run derived from the config and the dataset.
struct RunPlan {
  DatasetSplit split;
  FewShotPlan plan;
  std::vector<TrainingEntry> entries;
};

inline RunPlan plan_run(const TrainConfig& c, const GlyphDataset& data) {
  RunPlan r;
  r.split = make_split(data.common_codepoints(), c.seed);
  r.plan = make_fewshot_plan(r.split, c.fewshot, c.seed);
  r.entries = copy_augment(training_entries(r.plan), c.copy_augment);
  return r;
}

inline std::uint64_t total_steps(const TrainConfig& c, const BatchStream& stream) {
  const std::uint64_t full = static_cast<std::uint64_t>(c.epochs) * stream.batches_per_epoch();
  return c.max_steps ? std::min<std::uint64_t>(full, c.max_steps) : full;
}

struct TrainResult {
  TrainState state;
  std::vector<StepLosses> history;
  RunPlan plan;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints + losses.csv
  std::uint64_t stop_after = 0;                  // 0: run to completion
  std::function<void(const StepLosses&)> on_step;
};

/// Runs (or continues) training until the configured step budget. Resuming a
/// state saved at step k reproduces the uninterrupted run from k onward.
inline TrainResult train_run(TrainState state, const GlyphDataset& data, const RunOptions& opts = {}) {
  if (data.resolution != state.config.resolution) {
    throw Error(ErrorKind::ShapeMismatch, "dataset resolution " + std::to_string(data.resolution) +
                                              " vs config " + std::to_string(state.config.resolution));
  }
  TrainResult result;
  result.plan = plan_run(state.config, data);
  BatchStream stream(data, result.plan.entries, state.config.batch_size, state.data_seed);
  const std::uint64_t end = total_steps(state.config, stream);
  const std::uint64_t stop = opts.stop_after ? std::min(end, opts.stop_after) : end;

  std::ofstream csv;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    write_split_manifest(*opts.out_dir / "split.txt", result.plan.split);
    write_plan_manifest(*opts.out_dir / "plan.txt", result.plan.plan);
    // Rows past the resumed step (written after the last checkpoint) are
    // dropped so the CSV matches an uninterrupted run.
    const auto csv_path = *opts.out_dir / "losses.csv";
    std::vector<std::string> kept;
    if (state.step > 0) {
      std::ifstream prev(csv_path);
      std::string line;
      std::getline(prev, line);
      while (std::getline(prev, line) && kept.size() < state.step) kept.push_back(line);
    }
    csv.open(csv_path, std::ios::trunc);
    csv << kLossCsvHeader << '\n';
    for (const auto& line : kept) csv << line << '\n';
  }
  const std::size_t per_epoch = stream.batches_per_epoch();
  while (state.step < stop) {
    const std::uint64_t epoch = state.step / per_epoch;
    const Batch batch = stream.at_step(state.step);
    StepLosses l = train_step(state, batch, epoch);
    result.history.push_back(l);
    if (csv.is_open()) csv << loss_csv_row(l) << '\n';
    if (opts.on_step) opts.on_step(l);
    const bool due = state.config.checkpoint_every && state.step % state.config.checkpoint_every == 0;
    if (opts.out_dir && (due || state.step == stop)) {
      csv.flush();
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%08llu.bin", static_cast<unsigned long long>(state.step));
      save_checkpoint(*opts.out_dir / name, state);
      save_checkpoint(*opts.out_dir / "checkpoint_latest.bin", state);
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace strokegan
