#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>

#include "strokegan/metrics.hpp"
#include "strokegan/synthetic.hpp"

using namespace strokegan;

namespace {

Tensor<double> constant(std::size_t h, std::size_t w, double v) { return Tensor<double>({1, h, w}, v); }

Tensor<double> random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> t({1, h, w});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Direct per-window double loop with population statistics.
double ssim_oracle(const Tensor<double>& a, const Tensor<double>& b, std::size_t k = 8) {
  const std::size_t h = a.dim(1), w = a.dim(2);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  for (std::size_t y = 0; y + k <= h; ++y) {
    for (std::size_t x = 0; x + k <= w; ++x) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          ma += a[(y + i) * w + x + j];
          mb += b[(y + i) * w + x + j];
        }
      ma /= k * k;
      mb /= k * k;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= k * k;
      vb /= k * k;
      cov /= k * k;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / static_cast<double>((h - k + 1) * (w - k + 1));
}

// Closed form through the general (non-symmetric) eigendecomposition of Σ₁Σ₂:
// Tr((Σ₁Σ₂)^{1/2}) = Σ sqrt(λᵢ).
double fid_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::VectorXd m1 = x.colwise().mean().transpose(), m2 = y.colwise().mean().transpose();
  auto cov = [](const Eigen::MatrixXd& z, const Eigen::VectorXd& m) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(z.cols(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const Eigen::VectorXd d = z.row(i).transpose() - m;
      s += d * d.transpose();
    }
    return Eigen::MatrixXd(s / static_cast<double>(z.rows() - 1));
  };
  const Eigen::MatrixXd s1 = cov(x, m1), s2 = cov(y, m2);
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(es.eigenvalues()(i)).real();
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2 * tr;
}

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double shift = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng) * (1.0 + 0.2 * j) + shift;
  return m;
}

}  // namespace

TEST(Psnr, ClosedForms) {
  const auto a = random_image(16, 16, 1);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_NEAR(psnr(constant(8, 8, 0), constant(8, 8, 1)), 0.0, 1e-12);
  Tensor<double> b = a;
  for (auto& v : b.values()) v += 1.0 / 255.0;
  EXPECT_NEAR(psnr(a, b), 48.1308, 1e-4);
  EXPECT_NEAR(psnr(a, b), 20 * std::log10(255.0), 1e-9);
  const auto c = random_image(16, 16, 2);
  EXPECT_EQ(psnr(a, c), psnr(c, a));
  EXPECT_THROW(psnr(a, constant(8, 8, 0)), Error);
}

TEST(Ssim, ClosedForms) {
  const auto a = random_image(32, 32, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(constant(16, 16, 0), constant(16, 16, 1)), c1 / (1 + c1), 1e-12);
  EXPECT_NEAR(ssim(constant(16, 16, 0), constant(16, 16, 1)), 9.999e-5, 1e-8);
}

TEST(Ssim, MatchesWindowOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = random_image(32, 32, 10 + s), b = random_image(32, 32, 20 + s);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
  // Structured pair: a blurred copy.
  const auto a = random_image(24, 40, 7);
  Tensor<double> b = a;
  for (std::size_t i = 1; i < b.size(); ++i) b[i] = 0.5 * (a[i] + a[i - 1]);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
}

TEST(Ssim, Errors) {
  try {
    ssim(constant(7, 16, 0), constant(7, 16, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ImageTooSmall);
  }
  EXPECT_THROW(ssim(constant(8, 8, 0), constant(8, 9, 0)), Error);
}

TEST(Fid, IdenticalSetsAreZero) {
  const auto x = gaussian(200, 5, 1);
  EXPECT_LE(fid(x, x), 1e-6);
}

TEST(Fid, PointMasses) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(10, 2), b(10, 2);
  b.col(0).setConstant(3);
  b.col(1).setConstant(4);
  EXPECT_NEAR(fid(a, b), 25.0, 1e-9);
}

TEST(Fid, MatchesGeneralEigenOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto x = gaussian(300, 6, 100 + s), y = gaussian(250, 6, 200 + s, 0.3);
    EXPECT_NEAR(fid(x, y), fid_oracle(x, y), 1e-4);
  }
}

TEST(Fid, PermutationInvariant) {
  const auto x = gaussian(120, 4, 5), y = gaussian(120, 4, 6, 1.0);
  std::vector<int> order(120);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(1));
  Eigen::MatrixXd px(120, 4), py(120, 4);
  for (int i = 0; i < 120; ++i) {
    px.row(i) = x.row(order[i]);
    py.row(i) = y.row(order[i]);
  }
  EXPECT_NEAR(fid(px, py), fid(x, y), 1e-9);
}

TEST(Fid, WarnsWhenUnderSampled) {
  std::vector<std::string> warnings;
  const auto x = gaussian(4, 8, 1), y = gaussian(4, 8, 2);
  const double v = fid(x, y, {kFidJitter, &warnings});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(Fid, FeatureFile) {
  const auto path = std::filesystem::temp_directory_path() / "strokegan_features.csv";
  std::ofstream(path) << "f0,f1\n1,2\n3,4\n\n5,6\n";
  const Eigen::MatrixXd m = load_feature_matrix(path);
  ASSERT_EQ(m.rows(), 3);
  EXPECT_EQ(m(2, 1), 6.0);
  std::ofstream(path) << "1,2\n3\n";
  EXPECT_THROW(load_feature_matrix(path), Error);
}

TEST(Perceptual, Properties) {
  const RandomConvEmbedder e(3), e2(3), other(4);
  EXPECT_EQ(e.dimension(), 56u);
  EXPECT_EQ(e.identifier(), "random-conv-v1-seed3");
  const auto a = random_image(32, 32, 1), b = random_image(32, 32, 2);
  EXPECT_EQ(perceptual_distance(e, a, a), 0.0);
  EXPECT_NEAR(perceptual_distance(e, a, b), perceptual_distance(e, b, a), 1e-7);
  EXPECT_EQ(perceptual_distance(e, a, b), perceptual_distance(e2, a, b));
  EXPECT_NE(perceptual_distance(e, a, b), perceptual_distance(other, a, b));
  const double d = perceptual_distance(e, a, constant(32, 32, 1.0));
  EXPECT_GT(d, 0.0);
  EXPECT_LE(d, 1.0);
}

TEST(Report, JsonRoundTrip) {
  MetricReport r{1.0 / 3.0, 0.123456789012345, 27.5, 0.87654321, 40, "random-conv-v1-seed0", {{"seed", 7}}};
  const auto path = std::filesystem::temp_directory_path() / "strokegan_report.json";
  save_report(path, r);
  EXPECT_EQ(load_report(path), r);
}

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto pair = make_synthetic_font_pair(40, 9, 32);
    for (std::size_t i = 0; i < 40; ++i) {
      test_.codepoints.push_back(pair.source[i].codepoint);
      test_.sources.push_back(pair.source[i].pixels);
      test_.truths.push_back(pair.target[i].pixels);
    }
  }
  PairedSet test_;
  RandomConvEmbedder embedder_{0};
};

TEST_F(EvaluateTest, PerfectModel) {
  auto truth_transform = [](const Tensor<float>& batch) {
    Tensor<float> out(batch.shape());
    const std::size_t px = batch.dim(2) * batch.dim(3);
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
      Tensor<float> one({1, batch.dim(2), batch.dim(3)});
      std::copy(batch.data() + i * px, batch.data() + (i + 1) * px, one.data());
      const Tensor<float> t = synthetic_target_transform(one);
      std::copy(t.data(), t.data() + px, out.data() + i * px);
    }
    return out;
  };
  const auto generated = translate_all(truth_transform, test_.sources, 7);
  const MetricReport r = evaluate_images(generated, test_.truths, embedder_);
  EXPECT_EQ(r.psnr_db, kPsnrCapDb);
  EXPECT_EQ(r.ssim, 1.0);
  EXPECT_LE(r.fid, 1e-6);
  EXPECT_EQ(r.perceptual, 0.0);
  EXPECT_EQ(r.n_pairs, 40u);
}

TEST_F(EvaluateTest, UntrainedGeneratorAndPermutation) {
  const auto m = init_params<float>(1, {4, 4});
  const MetricReport r = evaluate(m.generator, test_, embedder_);
  EXPECT_EQ(r.n_pairs, 40u);
  EXPECT_LT(r.ssim, 1.0);
  EXPECT_LT(r.psnr_db, kPsnrCapDb);
  EXPECT_EQ(r.embedder_id, embedder_.identifier());

  PairedSet shuffled;
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  for (std::size_t i : order) {
    shuffled.codepoints.push_back(test_.codepoints[i]);
    shuffled.sources.push_back(test_.sources[i]);
    shuffled.truths.push_back(test_.truths[i]);
  }
  const MetricReport s = evaluate(m.generator, shuffled, embedder_);
  EXPECT_NEAR(s.fid, r.fid, 1e-6);
  EXPECT_NEAR(s.ssim, r.ssim, 1e-6);
  EXPECT_NEAR(s.psnr_db, r.psnr_db, 1e-6);
  EXPECT_NEAR(s.perceptual, r.perceptual, 1e-6);
}

TEST_F(EvaluateTest, NoPairedTestData) {
  const auto m = init_params<float>(1, {4, 4});
  try {
    evaluate(m.generator, PairedSet{}, embedder_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoPairedTestData);
  }
}
