#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokegan/dataset.hpp"
#include "strokegan/losses.hpp"
#include "strokegan/model.hpp"
#include "strokegan/nn/unit.hpp"

namespace strokegan {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kFidJitter = 1e-6;

/// [-1, 1] training range → [0, 1] metric range.
template <typename T>
Tensor<double> to_unit_interval(const Tensor<T>& x) {
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (static_cast<double>(x[i]) + 1.0) / 2.0;
  return out;
}

/// 10·log10(max² / MSE); identical images give the 100 dB cap.
inline double psnr(const Tensor<double>& a, const Tensor<double>& b, double max_value = 1.0) {
  require_same_shape(a, b, "psnr");
  detail::Accumulator acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc.add(d * d);
  }
  const double mse = acc.value() / static_cast<double>(a.size());
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(max_value * max_value / mse));
}

struct SsimOptions {
  std::size_t window = kSsimWindow;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every window×window position (stride 1, uniform weights,
/// population statistics). Accepts H×W, 1×H×W or 1×1×H×W tensors.
inline double ssim(const Tensor<double>& a, const Tensor<double>& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim");
  if (a.rank() < 2) throw Error(ErrorKind::ShapeMismatch, "ssim expects an image, got " + a.describe());
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  if (a.size() != h * w) throw Error(ErrorKind::ShapeMismatch, "ssim expects a single-channel image, got " + a.describe());
  const std::size_t k = opt.window;
  if (h < k || w < k) throw Error(ErrorKind::ImageTooSmall, a.describe() + " smaller than window " + std::to_string(k));
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);

  // Summed-area tables of a, b, a², b², ab with a zero border.
  const std::size_t W = w + 1;
  std::vector<double> sa((h + 1) * W), sb(sa.size()), saa(sa.size()), sbb(sa.size()), sab(sa.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double va = a[y * w + x], vb = b[y * w + x];
      const std::size_t i = (y + 1) * W + (x + 1);
      const std::size_t up = y * W + (x + 1), left = (y + 1) * W + x, diag = y * W + x;
      sa[i] = va + sa[up] + sa[left] - sa[diag];
      sb[i] = vb + sb[up] + sb[left] - sb[diag];
      saa[i] = va * va + saa[up] + saa[left] - saa[diag];
      sbb[i] = vb * vb + sbb[up] + sbb[left] - sbb[diag];
      sab[i] = va * vb + sab[up] + sab[left] - sab[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, std::size_t y, std::size_t x) {
    return s[(y + k) * W + (x + k)] - s[y * W + (x + k)] - s[(y + k) * W + x] + s[y * W + x];
  };
  const double n = static_cast<double>(k * k);
  detail::Accumulator acc;
  for (std::size_t y = 0; y + k <= h; ++y) {
    for (std::size_t x = 0; x + k <= w; ++x) {
      const double mu_a = box(sa, y, x) / n, mu_b = box(sb, y, x) / n;
      const double var_a = box(saa, y, x) / n - mu_a * mu_a;
      const double var_b = box(sbb, y, x) / n - mu_b * mu_b;
      const double cov = box(sab, y, x) / n - mu_a * mu_b;
      acc.add(((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)));
    }
  }
  return acc.value() / static_cast<double>((h - k + 1) * (w - k + 1));
}

// ---------------------------------------------------------------------------
// Fréchet distance between Gaussian fits of two feature sets.

struct FidOptions {
  double jitter = kFidJitter;
  std::vector<std::string>* warnings = nullptr;
};

namespace detail {

inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  if (x.rows() < 2) return Eigen::MatrixXd::Zero(x.cols(), x.cols());
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

/// Tr((Σ₁Σ₂)^{1/2}) through the symmetric form Σ₁^{1/2} Σ₂ Σ₁^{1/2}. Returns
/// false when the product has clearly negative eigenvalues.
inline bool trace_sqrt_product(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, double& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1);
  if (e1.info() != Eigen::Success) return false;
  const Eigen::VectorXd roots = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt1 = e1.eigenvectors() * roots.asDiagonal() * e1.eigenvectors().transpose();
  const Eigen::MatrixXd m = sqrt1 * s2 * sqrt1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2((m + m.transpose()) / 2.0, Eigen::EigenvaluesOnly);
  if (e2.info() != Eigen::Success) return false;
  const Eigen::VectorXd ev = e2.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (!ev.allFinite() || ev.minCoeff() < -1e-8 * scale) return false;
  out = ev.cwiseMax(0.0).cwiseSqrt().sum();
  return true;
}

}  // namespace detail

/// ‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2}); rows are samples. Retries with
/// a diagonal jitter when the covariance product is numerically indefinite.
inline double fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake, const FidOptions& opt = {}) {
  if (real.cols() != fake.cols() || real.rows() == 0 || fake.rows() == 0) {
    throw Error(ErrorKind::ShapeMismatch, "fid feature matrices must be non-empty with equal width");
  }
  const auto d = real.cols();
  if (opt.warnings && (real.rows() < d + 1 || fake.rows() < d + 1)) {
    opt.warnings->push_back("fid: fewer samples than dimension + 1; covariance is rank deficient");
  }
  const Eigen::RowVectorXd mu1 = real.colwise().mean(), mu2 = fake.colwise().mean();
  Eigen::MatrixXd s1 = detail::covariance(real, mu1), s2 = detail::covariance(fake, mu2);
  double tr_sqrt = 0.0;
  if (!detail::trace_sqrt_product(s1, s2, tr_sqrt)) {
    s1 += opt.jitter * Eigen::MatrixXd::Identity(d, d);
    s2 += opt.jitter * Eigen::MatrixXd::Identity(d, d);
    if (opt.warnings) opt.warnings->push_back("fid: added diagonal jitter to covariances");
    if (!detail::trace_sqrt_product(s1, s2, tr_sqrt)) {
      throw Error(ErrorKind::DegenerateCovariance, "matrix square root failed after jitter");
    }
  }
  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  if (!std::isfinite(value)) throw Error(ErrorKind::DegenerateCovariance, "non-finite FID");
  return std::max(0.0, value);
}

/// Rows of comma- or whitespace-separated numbers; a first line that does not
/// parse as numbers is treated as a header.
inline Eigen::MatrixXd load_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    std::vector<double> row;
    double v = 0;
    while (is >> v) row.push_back(v);
    const bool parsed = (is >> std::ws).eof();
    if (row.empty() && line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!parsed || row.empty()) {
      if (line_no == 1) continue;
      throw LineError(ErrorKind::MalformedRecord, line_no, "non-numeric feature row");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw LineError(ErrorKind::MalformedRecord, line_no, "feature row width differs");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::MalformedRecord, "no feature rows in " + path.string());
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Embedders behind FID and the perceptual distance.

class FeatureEmbedder {
 public:
  virtual ~FeatureEmbedder() = default;
  virtual std::string identifier() const = 0;
  virtual std::size_t dimension() const = 0;
  /// B×1×H×W images in [0, 1] → B×dimension features.
  virtual Eigen::MatrixXd embed(const Tensor<double>& batch) const = 0;
};

/// Fixed, seeded random convolution stack (three stride-2 4×4 convs with
/// leaky ReLU); the feature vector concatenates the global average of every
/// layer's channels. Stand-in for a pretrained network.
class RandomConvEmbedder final : public FeatureEmbedder {
 public:
  explicit RandomConvEmbedder(std::uint64_t seed = 0, std::array<std::size_t, 3> widths = {8, 16, 32})
      : seed_(seed) {
    std::mt19937_64 rng(seed);
    std::size_t in = 1;
    for (std::size_t w : widths) {
      auto p = nn::ConvParams<double>::conv({in, w, 4, 2, 1});
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in * 16)));
      for (auto& v : p.weight.values()) v = normal(rng);
      layers_.push_back(std::move(p));
      dimension_ += w;
      in = w;
    }
  }

  std::string identifier() const override { return "random-conv-v1-seed" + std::to_string(seed_); }
  std::size_t dimension() const override { return dimension_; }

  Eigen::MatrixXd embed(const Tensor<double>& batch) const override {
    require_rank4(batch, "embed");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.dim(0)), static_cast<Eigen::Index>(dimension_));
    Tensor<double> h = batch;
    Eigen::Index col = 0;
    for (const auto& layer : layers_) {
      h = nn::leaky_relu(nn::conv2d_forward(layer, h));
      const Tensor<double> pooled = nn::global_avg_pool(h);
      const std::size_t c = pooled.dim(1);
      for (std::size_t i = 0; i < pooled.dim(0); ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          out(static_cast<Eigen::Index>(i), col + static_cast<Eigen::Index>(j)) = pooled[i * c + j];
        }
      }
      col += static_cast<Eigen::Index>(c);
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::vector<nn::ConvParams<double>> layers_;
  std::size_t dimension_ = 0;
};

/// ‖u/‖u‖ − v/‖v‖‖ / 2 per row, in [0, 1]; zero vectors normalize to zero.
inline Eigen::VectorXd normalized_distances(const Eigen::MatrixXd& fa, const Eigen::MatrixXd& fb) {
  Eigen::VectorXd out(fa.rows());
  for (Eigen::Index i = 0; i < fa.rows(); ++i) {
    Eigen::RowVectorXd u = fa.row(i), v = fb.row(i);
    if (u.norm() > 0) u /= u.norm();
    if (v.norm() > 0) v /= v.norm();
    out(i) = (u - v).norm() / 2.0;
  }
  return out;
}

/// Distance between unit-normalized embeddings of two single images (or the
/// mean over two equally sized batches).
inline double perceptual_distance(const FeatureEmbedder& embedder, const Tensor<double>& a, const Tensor<double>& b) {
  require_same_shape(a, b, "perceptual_distance");
  auto as_batch = [](const Tensor<double>& t) {
    Tensor<double> c = t;
    if (c.rank() == 2) c.reshape({1, 1, t.dim(0), t.dim(1)});
    if (c.rank() == 3) c.reshape({1, t.dim(0), t.dim(1), t.dim(2)});
    return c;
  };
  const Eigen::VectorXd d = normalized_distances(embedder.embed(as_batch(a)), embedder.embed(as_batch(b)));
  return d.mean();
}

// ---------------------------------------------------------------------------

struct MetricReport {
  double fid = 0.0;
  double perceptual = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::size_t n_pairs = 0;
  std::string embedder_id;
  nlohmann::json config = nlohmann::json::object();

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"fid", r.fid},          {"perceptual", r.perceptual}, {"psnr_db", r.psnr_db}, {"ssim", r.ssim},
          {"n_pairs", r.n_pairs},  {"embedder_id", r.embedder_id}, {"config", r.config}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.fid = j.at("fid").get<double>();
  r.perceptual = j.at("perceptual").get<double>();
  r.psnr_db = j.at("psnr_db").get<double>();
  r.ssim = j.at("ssim").get<double>();
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  r.embedder_id = j.at("embedder_id").get<std::string>();
  if (j.contains("config")) r.config = j.at("config");
  return r;
}

inline void save_report(const std::filesystem::path& path, const MetricReport& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << to_json(r).dump(2) << '\n';
}

inline MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  return report_from_json(nlohmann::json::parse(in));
}

/// Source glyphs with their ground-truth targets, aligned by index.
struct PairedSet {
  std::vector<char32_t> codepoints;
  std::vector<Tensor<float>> sources;  // 1×H×W in [-1, 1]
  std::vector<Tensor<float>> truths;
};

/// Pairs for `codepoints` that have both a source and a target glyph.
inline PairedSet paired_set(const GlyphDataset& data, const std::vector<char32_t>& codepoints) {
  PairedSet p;
  for (char32_t cp : codepoints) {
    const auto s = data.source.find(cp);
    const auto t = data.target.find(cp);
    if (s == data.source.end() || t == data.target.end()) continue;
    p.codepoints.push_back(cp);
    p.sources.push_back(s->second);
    p.truths.push_back(t->second);
  }
  return p;
}

/// Runs `translate` over all sources in chunks of `chunk` and returns the
/// outputs as 1×H×W tensors.
template <typename Translate>
std::vector<Tensor<float>> translate_all(Translate&& translate, const std::vector<Tensor<float>>& sources,
                                         std::size_t chunk = 16) {
  std::vector<Tensor<float>> out;
  for (std::size_t begin = 0; begin < sources.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, sources.size());
    const Tensor<float> batch = stack<float>(std::span(sources).subspan(begin, end - begin));
    const Tensor<float> y = translate(batch);
    for (std::size_t i = 0; i < end - begin; ++i) {
      Tensor<float> one = y.slice(i, i + 1);
      one.reshape({1, y.dim(2), y.dim(3)});
      out.push_back(std::move(one));
    }
  }
  return out;
}

/// Compares generated glyphs against paired truths: FID between the two
/// sets, PSNR / SSIM / perceptual distance averaged over pairs.
inline MetricReport evaluate_images(const std::vector<Tensor<float>>& generated, const std::vector<Tensor<float>>& truths,
                                    const FeatureEmbedder& embedder, std::vector<std::string>* warnings = nullptr) {
  if (generated.empty() || generated.size() != truths.size()) {
    throw Error(ErrorKind::NoPairedTestData, "need equally many generated and ground-truth glyphs");
  }
  const std::size_t n = generated.size();
  const std::size_t h = truths.front().dim(1), w = truths.front().dim(2);
  Tensor<double> gen_batch({n, 1, h, w}), truth_batch({n, 1, h, w});
  detail::Accumulator psnr_acc, ssim_acc, perc_acc;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<double> g = to_unit_interval(generated[i]), t = to_unit_interval(truths[i]);
    require_same_shape(g, t, "evaluate");
    psnr_acc.add(psnr(g, t));
    ssim_acc.add(ssim(g, t));
    std::copy(g.data(), g.data() + g.size(), gen_batch.data() + i * h * w);
    std::copy(t.data(), t.data() + t.size(), truth_batch.data() + i * h * w);
  }
  const Eigen::MatrixXd fg = embedder.embed(gen_batch), ft = embedder.embed(truth_batch);
  const Eigen::VectorXd dist = normalized_distances(fg, ft);
  for (Eigen::Index i = 0; i < dist.size(); ++i) perc_acc.add(dist(i));

  MetricReport r;
  r.n_pairs = n;
  r.psnr_db = psnr_acc.value() / static_cast<double>(n);
  r.ssim = ssim_acc.value() / static_cast<double>(n);
  r.perceptual = perc_acc.value() / static_cast<double>(n);
  r.fid = fid(ft, fg, {kFidJitter, warnings});
  r.embedder_id = embedder.identifier();
  return r;
}

/// Generates G(x) for every test source in inference mode and scores it.
inline MetricReport evaluate(const GeneratorParams<float>& generator, const PairedSet& test,
                             const FeatureEmbedder& embedder, std::vector<Tensor<float>>* generated_out = nullptr,
                             std::vector<std::string>* warnings = nullptr) {
  if (test.sources.empty() || test.sources.size() != test.truths.size()) {
    throw Error(ErrorKind::NoPairedTestData, "test set has no ground-truth pairs");
  }
  auto generated = translate_all([&](const Tensor<float>& b) { return generator_forward(generator, b); }, test.sources);
  MetricReport r = evaluate_images(generated, test.truths, embedder, warnings);
  if (generated_out) *generated_out = std::move(generated);
  return r;
}

}  // namespace strokegan
