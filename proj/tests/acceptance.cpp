// Acceptance checks AC1–AC8. Prints one PASS/FAIL line per criterion (also
// written to acceptance_report.txt) and exits non-zero if any fails.
// Arguments (e.g. `AC1 AC5`) restrict the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "strokegan/metrics.hpp"
#include "strokegan/synthetic.hpp"
#include "strokegan/trainer.hpp"

using namespace strokegan;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + ("failed: " + f);
    for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <typename Params>
std::vector<float> flatten(const Params& p) {
  std::vector<float> out;
  p.visit([&](const std::string&, const Tensor<float>& t) { out.insert(out.end(), t.data(), t.data() + t.size()); });
  return out;
}

// ---------------------------------------------------------------------------

Checks ac1_stroke_codec() {
  Checks c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 12), id(1, kStrokeTypes);
  StrokeTable table;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> ids(static_cast<std::size_t>(len(rng)));
    for (int& v : ids) v = id(rng);
    table.entries[static_cast<char32_t>(0x4E00 + i)] = ids;
  }
  std::size_t mismatches = 0;
  for (const auto& [cp, ids] : table.entries) {
    const StrokeEncoding e = encode_character(table, cp);
    for (int bit = 0; bit < kStrokeTypes; ++bit) {
      bool member = false;
      for (int v : ids) member = member || v == bit + 1;
      if (e[bit] != member) ++mismatches;
    }
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " encoding bits differ from membership oracle");

  // Collision table with short lists over few ids, against an O(n²) oracle.
  std::uniform_int_distribution<int> short_len(1, 3), few(1, 5);
  StrokeTable dense;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> ids(static_cast<std::size_t>(short_len(rng)));
    for (int& v : ids) v = few(rng);
    dense.entries[static_cast<char32_t>(0x4E00 + i)] = ids;
  }
  std::set<std::set<char32_t>> want;
  for (const auto& [a, ia] : dense.entries) {
    std::set<char32_t> group{a};
    const std::set<int> sa(ia.begin(), ia.end());
    for (const auto& [b, ib] : dense.entries) {
      if (a != b && sa == std::set<int>(ib.begin(), ib.end())) group.insert(b);
    }
    if (group.size() > 1) want.insert(group);
  }
  std::set<std::set<char32_t>> got;
  for (const auto& g : encoding_collisions(dense)) got.insert(std::set<char32_t>(g.begin(), g.end()));
  c.expect(!want.empty() && got == want, "collision groups differ from pairwise oracle");
  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, "runtime " + fmt("%.3f s", secs));
  c.note("200 entries, " + std::to_string(want.size()) + " collision groups, " + fmt("%.3f s", secs));
  return c;
}

Checks ac2_loss_analytics() {
  Checks c;
  const double adv = adversarial_loss(Tensor<double>({1}, 0.5), Tensor<double>({1}, 0.5));
  c.expect(std::abs(adv - (-1.386294)) <= 1e-6, "adversarial_loss(0.5, 0.5) = " + fmt("%.9f", adv));
  const double stroke = stroke_loss(Tensor<double>({1, 32}, 0.5), Tensor<double>({1, 32}, 0.0)).value;
  c.expect(std::abs(stroke - 2.828427) <= 1e-6, "stroke_loss = " + fmt("%.9f", stroke));

  std::mt19937_64 rng(3);
  const Tensor<double> x = gradcheck::random_tensor({2, 1, 8, 8}, rng);
  c.expect(cycle_loss(x, x).value == 0.0, "cycle identity not exactly 0");
  c.expect(fs3_loss(x, x, {true, true}).value == 0.0, "FS3 identity not exactly 0");
  c.expect(fs3_loss(x, gradcheck::random_tensor({2, 1, 8, 8}, rng), {false, false}).value == 0.0,
           "FS3 with no paired rows not exactly 0");

  const LossParts parts{-1.3, 0.4, 2.1, 0.7};
  const LossWeights w{10.0, 0.5, 3.0};
  const LossBreakdown b = total_loss(parts, w);
  c.expect(b.total == b.adversarial + b.cycle + b.stroke + b.fs3, "breakdown does not sum to total");
  c.expect(b.cycle == 10.0 * 0.4 && b.stroke == 0.5 * 2.1 && b.fs3 == 3.0 * 0.7, "weighted terms");
  c.note("adv " + fmt("%.6f", adv) + ", stroke " + fmt("%.6f", stroke));
  return c;
}

Checks ac3_gradients() {
  Checks c;
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t n = 0;
  for (const auto& reports : {gradcheck::check_all_blocks(11), gradcheck::check_all_losses(11)}) {
    for (const auto& r : reports) {
      ++n;
      worst = std::max(worst, r.report.worst());
      c.expect(r.report.worst() < gradcheck::kTolerance, r.name + " relative error " + fmt("%.3g", r.report.worst()));
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "runtime " + fmt("%.1f s", secs));
  c.note(std::to_string(n) + " checks, worst relative error " + fmt("%.2g", worst) + ", " + fmt("%.1f s", secs));
  return c;
}

Checks ac4_shapes_determinism() {
  Checks c;
  const ModelParams<float> m = init_params<float>(7);
  for (std::size_t side : {64u, 128u}) {
    for (auto [h, w] : {std::pair{side, side}, std::pair{side, std::size_t{64}}}) {
      const Tensor<float> y = generator_forward(m.generator, Tensor<float>({2, 1, h, w}, 0.1f));
      c.expect(y.shape() == std::vector<std::size_t>{2, 1, h, w}, "generator output " + y.describe());
    }
  }
  const auto d = discriminator_forward(m.discriminator, Tensor<float>({3, 1, 64, 64}, 0.0f));
  c.expect(d.stroke.shape() == std::vector<std::size_t>{3, kStrokeDims}, "stroke head " + d.stroke.describe());

  const ModelParams<float> again = init_params<float>(7);
  c.expect(flatten(again.generator) == flatten(m.generator) && flatten(again.discriminator) == flatten(m.discriminator),
           "same-seed init differs");

  TrainConfig cfg;
  cfg.resolution = 32;
  cfg.batch_size = 3;
  cfg.shape = {4, 4};
  cfg.seed = 5;
  cfg.checkpoint_every = 0;
  const GlyphDataset data = make_synthetic_font_pair(30, 1, 32).dataset();
  const RunPlan plan = plan_run(cfg, data);
  const BatchStream stream(data, plan.entries, cfg.batch_size, cfg.seed);
  TrainState a = make_train_state(cfg), b = make_train_state(cfg);
  const StepLosses la = train_step(a, stream.at_step(0)), lb = train_step(b, stream.at_step(0));
  c.expect(la == lb && flatten(a.generator) == flatten(b.generator) &&
               flatten(a.discriminator) == flatten(b.discriminator),
           "single train_step not bit-reproducible");

  for (int i = 0; i < 5; ++i) train_step(a, stream.at_step(a.step));
  std::stringstream buf;
  write_checkpoint(buf, a);
  TrainState restored = read_checkpoint(buf);
  const Batch next = stream.at_step(a.step);
  c.expect(train_step(restored, next) == train_step(a, next), "checkpoint round-trip changes next-step loss");
  c.note("generator 64²/128²/128×64 preserved, stroke head 3×32, bit-exact step and resume");
  return c;
}

Checks ac5_metrics() {
  Checks c;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto image = [&](std::size_t h, std::size_t w) {
    Tensor<double> t({1, h, w});
    for (auto& v : t.values()) v = u(rng);
    return t;
  };
  const Tensor<double> a = image(32, 32);
  c.expect(psnr(a, a) == kPsnrCapDb, "psnr(a, a) cap");
  c.expect(std::abs(psnr(Tensor<double>({1, 8, 8}, 0.0), Tensor<double>({1, 8, 8}, 1.0))) < 1e-12, "psnr(0, 1) = 0");
  Tensor<double> shifted = a;
  for (auto& v : shifted.values()) v += 1.0 / 255.0;
  c.expect(std::abs(psnr(a, shifted) - 48.1308) < 1e-4, "psnr one grey level " + fmt("%.6f", psnr(a, shifted)));
  c.expect(ssim(a, a) == 1.0, "ssim(a, a) = 1");
  const double c1 = 1e-4;
  const double flat = ssim(Tensor<double>({1, 16, 16}, 0.0), Tensor<double>({1, 16, 16}, 1.0));
  c.expect(std::abs(flat - c1 / (1 + c1)) < 1e-12, "ssim(0, 1) = C1/(1+C1), got " + fmt("%.10g", flat));

  double worst = 0;
  for (int pair = 0; pair < 5; ++pair) {
    const Tensor<double> x = image(32, 32), y = image(32, 32);
    // Direct window loop with population statistics.
    double total = 0;
    const double k2 = 64.0, cc1 = 0.01 * 0.01, cc2 = 0.03 * 0.03;
    for (int r = 0; r <= 24; ++r) {
      for (int s = 0; s <= 24; ++s) {
        double mx = 0, my = 0;
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) mx += x[(r + i) * 32 + s + j], my += y[(r + i) * 32 + s + j];
        mx /= k2, my /= k2;
        double vx = 0, vy = 0, cxy = 0;
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            const double dx = x[(r + i) * 32 + s + j] - mx, dy = y[(r + i) * 32 + s + j] - my;
            vx += dx * dx, vy += dy * dy, cxy += dx * dy;
          }
        vx /= k2, vy /= k2, cxy /= k2;
        total += ((2 * mx * my + cc1) * (2 * cxy + cc2)) / ((mx * mx + my * my + cc1) * (vx + vy + cc2));
      }
    }
    worst = std::max(worst, std::abs(ssim(x, y) - total / 625.0));
  }
  c.expect(worst <= 1e-6, "ssim vs window oracle " + fmt("%.3g", worst));

  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(10, 2), shifted_points(10, 2);
  shifted_points.col(0).setConstant(3);
  shifted_points.col(1).setConstant(4);
  c.expect(std::abs(fid(zeros, shifted_points) - 25.0) < 1e-9, "fid point masses = 25");
  Eigen::MatrixXd cloud(200, 5);
  std::normal_distribution<double> g(0, 1);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud(i) = g(rng);
  c.expect(fid(cloud, cloud) <= 1e-6, "fid(X, X) <= 1e-6");
  c.note("ssim oracle max deviation " + fmt("%.2g", worst));
  return c;
}

Checks ac6_fewshot_plans() {
  Checks c;
  auto split_of = [](std::size_t train) {
    DatasetSplit s;
    for (std::size_t i = 0; i < train; ++i) s.train.push_back(static_cast<char32_t>(0x4E00 + i));
    return s;
  };
  std::vector<char32_t> all(3755);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<char32_t>(0x4E00 + i);
  const DatasetSplit full = make_split(all, 0);
  c.expect(full.train.size() == 3004, "3755 characters split to " + std::to_string(full.train.size()) + " train");
  const std::size_t p3004 = make_fewshot_plan(full, RandomStrategy{0.2}, 0).paired.size();
  const std::size_t p1588 = make_fewshot_plan(split_of(1588), RandomStrategy{0.2}, 0).paired.size();
  c.expect(p3004 == 600, "20% of 3004 paired " + std::to_string(p3004));
  c.expect(p1588 == 317, "20% of 1588 paired " + std::to_string(p1588));
  c.expect(make_fewshot_plan(full, RandomStrategy{0.0}, 0).paired.empty(), "0% plan not empty");
  c.note("3004→600, 1588→317, 0%→0");
  return c;
}

// ---------------------------------------------------------------------------
// Desk-scale synthetic training (AC7, AC8).

constexpr std::size_t kSynthChars = 200;
constexpr std::uint64_t kSynthDataSeed = 1;
constexpr std::size_t kSynthResolution = 64;
constexpr std::size_t kSynthSteps = 500;

struct SyntheticRun {
  MetricReport baseline, final;
  double train_ssim = 0;  // trained generator on the training characters
  double cyc_before = 0, cyc_after = 0, fs3_before = 0, fs3_after = 0;
  double seconds = 0;
};

const GlyphDataset& synthetic_data() {
  static const GlyphDataset d = make_synthetic_font_pair(kSynthChars, kSynthDataSeed, kSynthResolution).dataset();
  return d;
}

/// Inference-mode L_cyc over the training characters and L_FS3 over the
/// paired ones.
std::pair<double, double> probe_losses(const Generator& g, const RunPlan& plan) {
  const GlyphDataset& data = synthetic_data();
  auto cyc_over = [&](const std::vector<char32_t>& cps) {
    double sum = 0;
    for (char32_t cp : cps) {
      Tensor<float> x = data.source.at(cp);
      x.reshape({1, 1, kSynthResolution, kSynthResolution});
      sum += cycle_loss(x, generator_forward(g, generator_forward(g, x))).value;
    }
    return sum / static_cast<double>(cps.size());
  };
  double fs3 = 0;
  for (char32_t cp : plan.plan.paired) {
    Tensor<float> x = data.source.at(cp), t = data.target.at(cp);
    x.reshape({1, 1, kSynthResolution, kSynthResolution});
    t.reshape({1, 1, kSynthResolution, kSynthResolution});
    fs3 += fs3_loss(generator_forward(g, x), t, {true}).value;
  }
  std::vector<char32_t> train = plan.plan.paired;
  train.insert(train.end(), plan.plan.unpaired.begin(), plan.plan.unpaired.end());
  return {cyc_over(train), plan.plan.paired.empty() ? 0.0 : fs3 / static_cast<double>(plan.plan.paired.size())};
}

const SyntheticRun& synthetic_run(double fraction, std::uint64_t seed) {
  static std::map<std::pair<double, std::uint64_t>, SyntheticRun> cache;
  const auto key = std::pair{fraction, seed};
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  TrainConfig cfg;
  cfg.resolution = kSynthResolution;
  cfg.batch_size = 1;
  cfg.max_steps = kSynthSteps;
  cfg.shape = {64, 64};
  cfg.fewshot = RandomStrategy{fraction};
  cfg.seed = seed;
  cfg.checkpoint_every = 0;
  const GlyphDataset& data = synthetic_data();
  const RandomConvEmbedder embedder(0);
  TrainState state = make_train_state(cfg);
  const RunPlan plan = plan_run(cfg, data);
  const PairedSet test = paired_set(data, plan.split.test);

  SyntheticRun r;
  r.baseline = evaluate(state.generator, test, embedder);
  std::tie(r.cyc_before, r.fs3_before) = probe_losses(state.generator, plan);
  const auto t0 = Clock::now();
  const TrainResult result = train_run(std::move(state), data);
  r.seconds = seconds_since(t0);
  r.final = evaluate(result.state.generator, test, embedder);
  std::tie(r.cyc_after, r.fs3_after) = probe_losses(result.state.generator, plan);
  std::vector<char32_t> train = plan.plan.paired;
  train.insert(train.end(), plan.plan.unpaired.begin(), plan.plan.unpaired.end());
  r.train_ssim = evaluate(result.state.generator, paired_set(data, train), embedder).ssim;
  std::fprintf(stderr,
               "  run %.0f%% seed %llu: %.0f s, ssim %.4f -> %.4f, psnr %.2f, fid %.4g, perceptual %.4g, "
               "L_cyc %.4f -> %.4f, L_FS3 %.4f -> %.4f, training-character ssim %.4f\n",
               fraction * 100, static_cast<unsigned long long>(seed), r.seconds, r.baseline.ssim, r.final.ssim,
               r.final.psnr_db, r.final.fid, r.final.perceptual, r.cyc_before, r.cyc_after, r.fs3_before, r.fs3_after,
               r.train_ssim);
  return cache.emplace(key, r).first->second;
}

Checks ac7_synthetic_end_to_end() {
  Checks c;
  const SyntheticRun& r = synthetic_run(0.2, 1);
  c.expect(r.cyc_after < 0.5 * r.cyc_before, "L_cyc " + fmt("%.4f", r.cyc_before) + " -> " + fmt("%.4f", r.cyc_after));
  c.expect(r.fs3_after < 0.5 * r.fs3_before, "L_FS3 " + fmt("%.4f", r.fs3_before) + " -> " + fmt("%.4f", r.fs3_after));
  c.expect(r.final.ssim > r.baseline.ssim, "SSIM " + fmt("%.4f", r.baseline.ssim) + " -> " + fmt("%.4f", r.final.ssim));
  c.expect(r.seconds <= 600.0, "training took " + fmt("%.0f s", r.seconds));
  c.note("L_cyc " + fmt("%.4f", r.cyc_before) + "→" + fmt("%.4f", r.cyc_after) + ", L_FS3 " + fmt("%.4f", r.fs3_before) +
         "→" + fmt("%.4f", r.fs3_after) + ", SSIM " + fmt("%.4f", r.baseline.ssim) + "→" + fmt("%.4f", r.final.ssim) +
         ", " + fmt("%.0f s", r.seconds) + " (training-character SSIM " + fmt("%.4f", r.train_ssim) + ", not gated)");
  return c;
}

Checks ac8_ablation_direction() {
  Checks c;
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  double ssim0 = 0, ssim20 = 0, psnr0 = 0, psnr20 = 0, fid0 = 0, fid20 = 0, perc0 = 0, perc20 = 0, cyc0 = 0, cyc20 = 0;
  for (std::uint64_t seed : seeds) {
    const SyntheticRun& zero = synthetic_run(0.0, seed);
    const SyntheticRun& twenty = synthetic_run(0.2, seed);
    ssim0 += zero.final.ssim / seeds.size(), ssim20 += twenty.final.ssim / seeds.size();
    psnr0 += zero.final.psnr_db / seeds.size(), psnr20 += twenty.final.psnr_db / seeds.size();
    fid0 += zero.final.fid / seeds.size(), fid20 += twenty.final.fid / seeds.size();
    perc0 += zero.final.perceptual / seeds.size(), perc20 += twenty.final.perceptual / seeds.size();
    cyc0 += zero.cyc_after / seeds.size(), cyc20 += twenty.cyc_after / seeds.size();
  }
  c.expect(ssim20 >= ssim0, "mean SSIM 20% " + fmt("%.4f", ssim20) + " < 0% " + fmt("%.4f", ssim0));
  c.note("mean over seeds 1-3, 0%→20%: SSIM " + fmt("%.4f", ssim0) + "→" + fmt("%.4f", ssim20) + ", PSNR " +
         fmt("%.2f", psnr0) + "→" + fmt("%.2f", psnr20) + ", FID " + fmt("%.4g", fid0) + "→" + fmt("%.4g", fid20) +
         ", perceptual " + fmt("%.4g", perc0) + "→" + fmt("%.4g", perc20) + "; not gated: L_cyc " + fmt("%.4f", cyc0) +
         "→" + fmt("%.4f", cyc20));
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Checks()>>> criteria = {
      {"AC1", ac1_stroke_codec},        {"AC2", ac2_loss_analytics},        {"AC3", ac3_gradients},
      {"AC4", ac4_shapes_determinism},  {"AC5", ac5_metrics},               {"AC6", ac6_fewshot_plans},
      {"AC7", ac7_synthetic_end_to_end}, {"AC8", ac8_ablation_direction},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  bool all_ok = true;
  std::ofstream report("acceptance_report.txt");
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    Checks c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    all_ok = all_ok && c.ok();
    const std::string line = name + (c.ok() ? " PASS  " : " FAIL  ") + c.summary();
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    report << line << '\n' << std::flush;
  }
  return all_ok ? 0 : 1;
}
