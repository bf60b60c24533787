#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "strokegan/config.hpp"
#include "strokegan/dataset.hpp"
#include "strokegan/metrics.hpp"
#include "strokegan/raster.hpp"
#include "strokegan/synthetic.hpp"
#include "strokegan/trainer.hpp"

namespace fs = std::filesystem;
using namespace strokegan;

namespace {

constexpr std::size_t kGridRows = 16;
constexpr const char* kDataRootEnv = "STROKEGAN_DATA_ROOT";

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

/// Config file (if any), then per-key flag overrides.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Config file of key = value lines");
    for (const auto& key : config_key_names()) {
      app->add_option(flag_name(key), overrides[key], "Override config key " + key)->group("Config overrides");
    }
  }

  bool any_given(const CLI::App* app) const {
    if (!config_path.empty()) return true;
    for (const auto& key : config_key_names()) {
      if (app->count(flag_name(key))) return true;
    }
    return false;
  }

  TrainConfig resolve(const CLI::App* app, const fs::path& data_root) const {
    TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
    for (const auto& key : config_key_names()) {
      if (app->count(flag_name(key))) set_config_value(c, key, overrides.at(key));
    }
    // A relative structural-set path is looked up under the data root first.
    if (auto* d = std::get_if<DeterministicStrategy>(&c.fewshot)) {
      const fs::path p = d->set_path;
      if (p.is_relative() && !data_root.empty() && fs::exists(data_root / p)) d->set_path = (data_root / p).string();
    }
    c.validate();
    return c;
  }
};

void write_manifest(const fs::path& path, const std::string& command, const TrainConfig& c,
                    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "# strokegan " << command << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << " = " << v << '\n';
  out << format_config(c);
}

nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& key : config_key_names()) j[key] = get_config_value(c, key);
  return j;
}

GlyphDataset load_data(const fs::path& root, const TrainConfig& c) {
  if (root.empty()) throw Error(ErrorKind::MissingFile, std::string("no data root (use --data-root or ") + kDataRootEnv + ")");
  return load_glyph_dataset(root, c.source_font, c.target_font, c.stroke_table);
}

std::vector<char32_t> parse_codepoint_args(const std::vector<std::string>& args) {
  std::vector<char32_t> out;
  for (const auto& arg : args) {
    std::string spaced = arg, token;
    std::replace(spaced.begin(), spaced.end(), ',', ' ');
    std::istringstream is(spaced);
    while (is >> token) {
      char32_t cp = 0;
      if (!parse_codepoint(token, cp)) throw Error(ErrorKind::MalformedRecord, "bad codepoint '" + token + "'");
      out.push_back(cp);
    }
  }
  return out;
}

/// Writes samples/U+XXXX.png for every generated glyph and grid.png with
/// source | generated | truth columns for the first rows.
void write_samples(const fs::path& out, const PairedSet& set, const std::vector<Tensor<float>>& generated) {
  fs::create_directories(out / "samples");
  std::vector<std::vector<Tensor<float>>> rows;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    save_glyph_png(out / "samples" / (format_codepoint(set.codepoints[i]) + ".png"), generated[i]);
    if (rows.size() < kGridRows) rows.push_back({set.sources[i], generated[i], set.truths[i]});
  }
  save_image_grid(out / "grid.png", rows);
}

MetricReport evaluate_to(const fs::path& out, const Generator& g, const PairedSet& test, std::uint64_t embedder_seed,
                         nlohmann::json config) {
  const RandomConvEmbedder embedder(embedder_seed);
  std::vector<Tensor<float>> generated;
  std::vector<std::string> warnings;
  MetricReport r = evaluate(g, test, embedder, &generated, &warnings);
  for (const auto& w : warnings) warn(w);
  r.config = std::move(config);
  fs::create_directories(out);
  save_report(out / "report.json", r);
  write_samples(out, test, generated);
  return r;
}

void print_report(const MetricReport& r) {
  std::printf("fid %.6g  perceptual %.6g  psnr %.4f dB  ssim %.6f  pairs %zu\n", r.fid, r.perceptual, r.psnr_db, r.ssim,
              r.n_pairs);
}

std::function<void(const StepLosses&)> progress(std::size_t every, std::uint64_t total) {
  if (every == 0) return {};
  return [every, total](const StepLosses& l) {
    if (l.step % every == 0 || l.step == total) {
      std::fprintf(stderr, "step %llu/%llu  L_cyc %.4f  L_FS3 %.4f  total %.4f\n", static_cast<unsigned long long>(l.step),
                   static_cast<unsigned long long>(total), l.cycle, l.fs3, l.total);
    }
  };
}

std::uint64_t planned_steps(const TrainConfig& c, const GlyphDataset& data) {
  const RunPlan plan = plan_run(c, data);
  return total_steps(c, BatchStream(data, plan.entries, c.batch_size, c.seed));
}

// ---------------------------------------------------------------------------
// build-data

struct BuildSynthetic {
  std::string out;
  std::size_t chars = 200;
  std::uint64_t seed = 1;
  std::size_t resolution = 64;

  void run() const {
    const SyntheticFontPair pair = make_synthetic_font_pair(chars, seed, resolution);
    const GlyphDataset d = pair.dataset();
    save_font_dir(fs::path(out) / "source", d.source);
    save_font_dir(fs::path(out) / "target", d.target);
    save_stroke_table(fs::path(out) / "strokes.tsv", d.strokes);
    std::ofstream m(fs::path(out) / "manifest.txt");
    m << "# strokegan build-data synthetic\nchars = " << chars << "\nseed = " << seed << "\nresolution = " << resolution
      << '\n';
    std::printf("wrote %zu synthetic pairs to %s\n", chars, out.c_str());
  }
};

struct BuildFont {
  std::string font, font_id, out, codepoints_file, table;
  std::size_t resolution = kDefaultResolution;

  void run() const {
    std::vector<char32_t> cps;
    if (!codepoints_file.empty()) {
      cps = load_codepoint_list(codepoints_file);
    } else if (!table.empty()) {
      for (const auto& [cp, _] : load_stroke_table(table).entries) cps.push_back(cp);
    } else {
      throw Error(ErrorKind::InvalidConfig, "build-data font needs --codepoints-file or --table");
    }
    const std::string id = font_id.empty() ? fs::path(font).stem().string() : font_id;
    const RasterResult r = rasterize_font(font, cps, resolution, id);
    std::map<char32_t, Tensor<float>> glyphs;
    for (const auto& g : r.images) glyphs.emplace(g.codepoint, g.pixels);
    save_font_dir(fs::path(out) / id, glyphs);
    for (char32_t cp : r.missing) warn(format_codepoint(cp) + " is not renderable with " + font);
    std::printf("rendered %zu glyphs to %s (%zu missing)\n", r.images.size(), (fs::path(out) / id).c_str(),
                r.missing.size());
  }
};

// ---------------------------------------------------------------------------
// encode

struct Encode {
  std::string table;
  std::vector<std::string> codepoints;
  std::string codepoints_file;
  bool collisions = false;

  void run() const {
    const StrokeTable t = load_stroke_table(table);
    std::vector<char32_t> cps = parse_codepoint_args(codepoints);
    if (!codepoints_file.empty()) {
      const auto more = load_codepoint_list(codepoints_file);
      cps.insert(cps.end(), more.begin(), more.end());
    }
    for (char32_t cp : cps) std::printf("%s\t%s\n", format_codepoint(cp).c_str(), encode_character(t, cp).to_string().c_str());
    if (collisions) {
      for (const auto& group : encoding_collisions(t)) {
        std::string line;
        for (char32_t cp : group) line += (line.empty() ? "" : " ") + format_codepoint(cp);
        std::printf("collision\t%s\n", line.c_str());
      }
    }
  }
};

// ---------------------------------------------------------------------------
// train

struct Train {
  ConfigOptions config;
  std::string data_root, out;
  bool resume = false;
  bool no_eval = false;
  std::size_t log_every = 100;
  std::uint64_t embedder_seed = 0;

  void run(const CLI::App* app) const {
    const fs::path out_dir = out;
    TrainState state;
    if (resume) {
      state = load_checkpoint(out_dir / "checkpoint_latest.bin");
      if (config.any_given(app) && config.resolve(app, data_root) != state.config) {
        throw Error(ErrorKind::InvalidConfig, "resolved config differs from the checkpoint being resumed");
      }
    } else {
      state = make_train_state(config.resolve(app, data_root));
    }
    const TrainConfig c = state.config;
    const GlyphDataset data = load_data(data_root, c);
    fs::create_directories(out_dir);
    write_manifest(out_dir / "manifest.txt", "train", c, {{"data_root", fs::absolute(data_root).string()}});
    const std::uint64_t total = planned_steps(c, data);
    if (resume) std::fprintf(stderr, "resuming at step %llu\n", static_cast<unsigned long long>(state.step));
    TrainResult result = train_run(std::move(state), data, {out_dir, 0, progress(log_every, total)});
    std::printf("trained %llu steps; checkpoints in %s\n", static_cast<unsigned long long>(result.state.step),
                out_dir.c_str());
    if (no_eval) return;
    const PairedSet test = paired_set(data, result.plan.split.test);
    if (test.sources.empty()) {
      warn("no held-out pairs; skipping evaluation");
      return;
    }
    print_report(evaluate_to(out_dir, result.state.generator, test, embedder_seed, config_json(c)));
  }
};

// ---------------------------------------------------------------------------
// generate

struct Generate {
  std::string checkpoint, out, glyph_dir, font, codepoints_file;
  std::vector<std::string> codepoints;

  void run() const {
    std::vector<char32_t> cps = parse_codepoint_args(codepoints);
    if (!codepoints_file.empty()) {
      const auto more = load_codepoint_list(codepoints_file);
      cps.insert(cps.end(), more.begin(), more.end());
    }
    if (glyph_dir.empty() == font.empty()) throw Error(ErrorKind::InvalidConfig, "give exactly one of --glyph-dir or --font");
    const TrainState state = load_checkpoint(checkpoint);
    if (cps.empty()) {
      warn("no characters requested; nothing generated");
      return;
    }
    const std::size_t res = state.config.resolution;
    std::vector<Tensor<float>> sources;
    if (!glyph_dir.empty()) {
      const auto glyphs = load_font_dir(glyph_dir);
      for (char32_t cp : cps) {
        const auto it = glyphs.find(cp);
        if (it == glyphs.end()) throw Error(ErrorKind::UnknownCharacter, format_codepoint(cp) + " not in " + glyph_dir);
        if (it->second.dim(1) != res || it->second.dim(2) != res) {
          throw Error(ErrorKind::ShapeMismatch, format_codepoint(cp) + " is " + it->second.describe() + ", model expects " +
                                                    std::to_string(res) + "×" + std::to_string(res));
        }
        sources.push_back(it->second);
      }
    } else {
      RasterResult r;
      try {
        r = rasterize_font(font, cps, res);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyGlyphSet) throw;
        throw Error(ErrorKind::UnrenderableFont, font + " renders none of the requested characters");
      }
      if (!r.missing.empty()) {
        std::string list;
        for (char32_t cp : r.missing) list += " " + format_codepoint(cp);
        throw Error(ErrorKind::UnrenderableFont, font + " cannot render" + list);
      }
      for (const auto& g : r.images) sources.push_back(g.pixels);
    }
    const auto generated =
        translate_all([&](const Tensor<float>& b) { return generator_forward(state.generator, b); }, sources);
    fs::create_directories(out);
    for (std::size_t i = 0; i < cps.size(); ++i) save_glyph_png(fs::path(out) / (format_codepoint(cps[i]) + ".png"), generated[i]);
    write_manifest(fs::path(out) / "manifest.txt", "generate", state.config,
                   {{"checkpoint", fs::absolute(checkpoint).string()}, {"step", std::to_string(state.step)}});
    std::printf("generated %zu glyphs in %s\n", generated.size(), out.c_str());
  }
};

// ---------------------------------------------------------------------------
// evaluate

struct Evaluate {
  std::string checkpoint, data_root, out, split_file, real_features, fake_features;
  std::uint64_t embedder_seed = 0;

  void run() const {
    if (!real_features.empty() || !fake_features.empty()) {
      if (real_features.empty() || fake_features.empty()) {
        throw Error(ErrorKind::InvalidConfig, "--real-features and --fake-features go together");
      }
      std::vector<std::string> warnings;
      const Eigen::MatrixXd real = load_feature_matrix(real_features), fake = load_feature_matrix(fake_features);
      const double v = fid(real, fake, {kFidJitter, &warnings});
      for (const auto& w : warnings) warn(w);
      std::printf("fid %.10g\n", v);
      if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(fs::path(out) / "report.json")
            << nlohmann::json{{"fid", v}, {"n_real", real.rows()}, {"n_fake", fake.rows()},
                              {"embedder_id", "external"}}.dump(2)
            << '\n';
      }
      return;
    }
    if (checkpoint.empty() || out.empty()) throw Error(ErrorKind::InvalidConfig, "evaluate needs --checkpoint and --out");
    const TrainState state = load_checkpoint(checkpoint);
    const GlyphDataset data = load_data(data_root, state.config);
    const std::vector<char32_t> test_cps =
        split_file.empty() ? plan_run(state.config, data).split.test : read_split_manifest(split_file).test;
    const PairedSet test = paired_set(data, test_cps);
    nlohmann::json cfg = config_json(state.config);
    cfg["checkpoint"] = fs::absolute(checkpoint).string();
    cfg["step"] = state.step;
    fs::create_directories(out);
    write_manifest(fs::path(out) / "manifest.txt", "evaluate", state.config,
                   {{"checkpoint", fs::absolute(checkpoint).string()}, {"data_root", fs::absolute(data_root).string()}});
    print_report(evaluate_to(out, state.generator, test, embedder_seed, std::move(cfg)));
  }
};

// ---------------------------------------------------------------------------
// ablate

struct Ablate {
  ConfigOptions config;
  std::string mode, data_root, out;
  std::vector<double> percentages = {0, 10, 20, 30, 40, 50, 70, 100};
  std::vector<double> copy_fractions = {0.0, 1.0};
  std::size_t log_every = 0;
  std::uint64_t embedder_seed = 0;

  /// Mean of each loss over the last tenth of the run (at least one step);
  /// `step` holds the number of steps run.
  static StepLosses tail_mean(const std::vector<StepLosses>& h) {
    StepLosses m;
    if (h.empty()) return m;
    const std::size_t n = std::max<std::size_t>(1, h.size() / 10);
    for (std::size_t i = h.size() - n; i < h.size(); ++i) {
      m.adv_d += h[i].adv_d;
      m.adv_g += h[i].adv_g;
      m.cycle += h[i].cycle;
      m.stroke += h[i].stroke;
      m.fs3 += h[i].fs3;
      m.total += h[i].total;
    }
    for (double* v : {&m.adv_d, &m.adv_g, &m.cycle, &m.stroke, &m.fs3, &m.total}) *v /= static_cast<double>(n);
    m.step = h.size();
    return m;
  }

  void run(const CLI::App* app) const {
    const TrainConfig base = config.resolve(app, data_root);
    const GlyphDataset data = load_data(data_root, base);
    std::vector<std::pair<std::string, TrainConfig>> variants;
    char name[64];
    if (mode == "fewshot-sweep") {
      for (double p : percentages) {
        if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorKind::PercentOutOfRange, std::to_string(p));
        TrainConfig c = base;
        c.fewshot = RandomStrategy{p / 100.0};
        std::snprintf(name, sizeof name, "fewshot_%g", p);
        variants.emplace_back(name, c);
      }
    } else {
      for (double f : copy_fractions) {
        TrainConfig c = base;
        c.copy_augment = f;
        c.validate();
        std::snprintf(name, sizeof name, "copy_%g", f);
        variants.emplace_back(name, c);
      }
    }
    fs::create_directories(out);
    write_manifest(fs::path(out) / "manifest.txt", "ablate " + mode, base,
                   {{"data_root", fs::absolute(data_root).string()}});
    std::ofstream csv(fs::path(out) / "ablation.csv");
    const char* header =
        "variant,fewshot,copy_augment,n_paired,fs3_weight_effective,steps,L_adv_D,L_adv_G,L_cyc,L_stroke,L_FS3,total,"
        "fid,perceptual,psnr_db,ssim,n_pairs";
    csv << header << '\n';
    std::printf("%s\n", header);
    for (const auto& [variant, c] : variants) {
      const fs::path dir = fs::path(out) / variant;
      fs::create_directories(dir);
      write_manifest(dir / "manifest.txt", "ablate " + mode + " " + variant, c,
                     {{"data_root", fs::absolute(data_root).string()}});
      std::fprintf(stderr, "variant %s\n", variant.c_str());
      TrainResult res = train_run(make_train_state(c), data, {dir, 0, progress(log_every, planned_steps(c, data))});
      const PairedSet test = paired_set(data, res.plan.split.test);
      const MetricReport r = evaluate_to(dir, res.state.generator, test, embedder_seed, config_json(c));
      const StepLosses l = tail_mean(res.history);
      const double fs3_weight = res.plan.plan.paired.empty() ? 0.0 : c.weights.lambda_fs3;
      std::ostringstream row;
      row.precision(9);
      row << variant << ',' << describe(c.fewshot) << ',' << c.copy_augment << ',' << res.plan.plan.paired.size() << ','
          << fs3_weight << ',' << l.step << ',' << l.adv_d << ',' << l.adv_g << ',' << l.cycle << ',' << l.stroke << ','
          << l.fs3 << ',' << l.total << ',' << r.fid << ',' << r.perceptual << ',' << r.psnr_db << ',' << r.ssim << ','
          << r.n_pairs;
      csv << row.str() << '\n';
      csv.flush();
      std::printf("%s\n", row.str().c_str());
      std::fflush(stdout);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StrokeGAN+ font-to-font glyph translation"};
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build-data", "Create a data root (synthetic pair or rasterized font)");
  build->require_subcommand(1);
  BuildSynthetic synth;
  auto* build_synth = build->add_subcommand("synthetic", "Write a synthetic source/target pair and stroke table");
  build_synth->add_option("--out", synth.out, "Data root to create")->required();
  build_synth->add_option("--chars", synth.chars, "Number of characters")->check(CLI::PositiveNumber);
  build_synth->add_option("--seed", synth.seed, "Generator seed");
  build_synth->add_option("--resolution", synth.resolution, "Glyph side in pixels");
  BuildFont bfont;
  auto* build_font = build->add_subcommand("font", "Rasterize a TrueType/OpenType font into <out>/<font-id>/");
  build_font->add_option("--font", bfont.font, "Font file")->required();
  build_font->add_option("--out", bfont.out, "Data root")->required();
  build_font->add_option("--font-id", bfont.font_id, "Directory name (default: font file stem)");
  build_font->add_option("--codepoints-file", bfont.codepoints_file, "U+XXXX list to render");
  build_font->add_option("--table", bfont.table, "Render every character of this stroke table");
  build_font->add_option("--resolution", bfont.resolution, "Glyph side in pixels");

  Encode enc;
  auto* encode = app.add_subcommand("encode", "Print 32-bit stroke encodings");
  encode->add_option("--table", enc.table, "Stroke table")->required();
  encode->add_option("codepoints", enc.codepoints, "U+XXXX codepoints (comma or space separated)");
  encode->add_option("--codepoints-file", enc.codepoints_file, "U+XXXX list");
  encode->add_flag("--collisions", enc.collisions, "Also list characters sharing an encoding");

  Train train;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate on the held-out split");
  train.config.attach(train_cmd);
  train_cmd->add_option("--data-root", train.data_root, "Data root")->envname(kDataRootEnv);
  train_cmd->add_option("--out", train.out, "Run directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/checkpoint_latest.bin");
  train_cmd->add_flag("--no-eval", train.no_eval, "Skip evaluation after training");
  train_cmd->add_option("--log-every", train.log_every, "Progress line interval in steps (0: silent)");
  train_cmd->add_option("--embedder-seed", train.embedder_seed, "Seed of the feature embedder");

  Generate gen;
  auto* generate = app.add_subcommand("generate", "Translate glyphs with a trained checkpoint");
  generate->add_option("--checkpoint", gen.checkpoint, "Checkpoint file")->required();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--glyph-dir", gen.glyph_dir, "Directory of source U+XXXX.png glyphs");
  generate->add_option("--font", gen.font, "Source font file to rasterize");
  generate->add_option("--codepoints", gen.codepoints, "U+XXXX codepoints (comma or space separated)");
  generate->add_option("--codepoints-file", gen.codepoints_file, "U+XXXX list");

  Evaluate ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on held-out pairs, or FID of feature files");
  evaluate_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  evaluate_cmd->add_option("--data-root", ev.data_root, "Data root")->envname(kDataRootEnv);
  evaluate_cmd->add_option("--out", ev.out, "Output directory");
  evaluate_cmd->add_option("--split", ev.split_file, "split.txt whose [test] section is scored");
  evaluate_cmd->add_option("--embedder-seed", ev.embedder_seed, "Seed of the feature embedder");
  evaluate_cmd->add_option("--real-features", ev.real_features, "CSV of real-image features (one row per image)");
  evaluate_cmd->add_option("--fake-features", ev.fake_features, "CSV of generated-image features");

  Ablate ab;
  auto* ablate = app.add_subcommand("ablate", "Few-shot percentage sweep or copy-augmentation comparison");
  ab.config.attach(ablate);
  ablate->add_option("--mode", ab.mode, "fewshot-sweep | copy-augment")
      ->required()
      ->check(CLI::IsMember({"fewshot-sweep", "copy-augment"}));
  ablate->add_option("--data-root", ab.data_root, "Data root")->envname(kDataRootEnv);
  ablate->add_option("--out", ab.out, "Output directory")->required();
  ablate->add_option("--percentages", ab.percentages, "Few-shot percentages")->delimiter(',');
  ablate->add_option("--copy-fractions", ab.copy_fractions, "Copy-augmentation fractions")->delimiter(',');
  ablate->add_option("--log-every", ab.log_every, "Progress line interval in steps (0: silent)");
  ablate->add_option("--embedder-seed", ab.embedder_seed, "Seed of the feature embedder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*build_synth) synth.run();
    if (*build_font) bfont.run();
    if (*encode) enc.run();
    if (*train_cmd) train.run(train_cmd);
    if (*generate) gen.run();
    if (*evaluate_cmd) ev.run();
    if (*ablate) ab.run(ablate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
