#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ewt/segmentation.hpp"
#include "helpers.hpp"

using namespace ewt;
using ewt::testing::max_abs_diff;
using ewt::testing::random_image;

namespace {

CoefficientSet single_band(const Image& band) {
  CoefficientSet c;
  c.labels = {0};
  c.bands = {band};
  return c;
}

FeatureStack stack_from_points(const std::vector<std::vector<double>>& pts) {
  FeatureStack fs;
  fs.width = static_cast<int>(pts.size());
  fs.height = 1;
  fs.features.assign(pts.front().size(), Image(fs.width, 1));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t d = 0; d < pts[i].size(); ++d) fs.features[d][i] = pts[i][d];
  return fs;
}

}  // namespace

TEST(CartoonTexture, SumIsExactWhereRepresentable) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Image f = random_image(48, 40, seed);
    for (double& v : f) v = 1000.0 * v - 300.0;
    const Image smooth = gaussian_smooth(f, 2.5);
    const CartoonTexture ct = cartoon_texture(f, 2.5);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double fi = f[i], si = smooth[i];
      const bool representable = std::abs(fi) >= std::abs(si) || (si / 2 <= fi && fi <= 2 * si) ||
                                 (2 * si <= fi && fi <= si / 2);
      if (representable) {
        ASSERT_EQ(ct.cartoon[i] + ct.texture[i], fi) << i;
      } else {
        const double m = std::max(std::abs(ct.cartoon[i]), std::abs(ct.texture[i]));
        ASSERT_LE(std::abs(ct.cartoon[i] + ct.texture[i] - fi), std::nextafter(m, INFINITY) - m);
      }
      ASSERT_EQ(ct.texture[i], fi - si);
    }
  }
}

TEST(CartoonTexture, NonNegativeImageIsExact) {
  const Image f = ewt::testing::texture_mosaic(64, 3).image;
  const CartoonTexture ct = cartoon_texture(f);
  for (std::size_t i = 0; i < f.size(); ++i) ASSERT_EQ(ct.cartoon[i] + ct.texture[i], f[i]);
}

TEST(CartoonTexture, ConstantHasNoTexture) {
  const CartoonTexture ct = cartoon_texture(Image(20, 20, 0.7));
  for (double v : ct.texture) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(cartoon_texture(Image(20, 20), 0.0), InvalidArgument);
}

TEST(CartoonTexture, HighFrequencyGratingIsTexture) {
  // Period 4 px against sigma 3. Away from the borders the separable filter
  // scales the grating by its discrete transfer H(pi/2) per axis.
  const Image g = ewt::testing::grating(64, 64, 16, 0, 0.5, 0.5);
  const std::vector<double> taps = gaussian_taps(3.0);
  const int r = static_cast<int>(taps.size() / 2);
  double h = 0.0;
  for (int k = -r; k <= r; ++k) h += taps[static_cast<std::size_t>(k + r)] * std::cos(std::numbers::pi / 2 * k);
  EXPECT_LT(std::abs(h), 1e-3);
  const CartoonTexture ct = cartoon_texture(g, 3.0);
  for (int y = 0; y < 64; ++y)
    for (int x = r; x < 64 - r; ++x) {
      const double wave = g(x, y) - 0.5;
      EXPECT_NEAR(ct.cartoon(x, y), 0.5 + h * wave, 1e-12);
      EXPECT_NEAR(ct.texture(x, y), (1.0 - h) * wave, 1e-12);
    }
}

TEST(LocalEnergy, ConstantAndImpulse) {
  const FeatureStack c = local_energy(single_band(Image(30, 30, -0.25)));
  for (double v : c.features[0]) EXPECT_NEAR(v, 0.25, 1e-15);
  Image impulse(41, 41);
  impulse(20, 20) = 1.0;
  const FeatureStack fi = local_energy(single_band(impulse), 19);
  EXPECT_NEAR(fi.features[0](20, 20), 1.0 / 361.0, 1e-15);
  EXPECT_NEAR(fi.features[0](29, 11), 1.0 / 361.0, 1e-15);
  EXPECT_EQ(fi.features[0](30, 20), 0.0);
  EXPECT_EQ(*std::max_element(fi.features[0].begin(), fi.features[0].end()), fi.features[0](20, 20));
}

TEST(LocalEnergy, SignFlipInvariant) {
  const Image b = ewt::testing::grating(32, 32, 3.3, 1.2);
  Image neg = b;
  for (double& v : neg) v = -v;
  EXPECT_EQ(local_energy(single_band(b), 7).features[0], local_energy(single_band(neg), 7).features[0]);
}

TEST(LocalEnergy, TranslationEquivariantAwayFromBorders) {
  const Image b = random_image(64, 64, 7);
  const int tx = 5, ty = 3, w = 9;
  Image shifted(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) shifted(x, y) = b((x - tx + 64) % 64, (y - ty + 64) % 64);
  const Image fa = local_energy(single_band(b), w).features[0];
  const Image fb = local_energy(single_band(shifted), w).features[0];
  for (int y = w; y < 64 - w - ty; ++y)
    for (int x = w; x < 64 - w - tx; ++x) EXPECT_NEAR(fb(x + tx, y + ty), fa(x, y), 1e-14);
}

TEST(LocalEnergy, FeaturesNonNegative) {
  CoefficientSet c;
  c.labels = {0, 1};
  c.bands = {random_image(16, 16, 1), random_image(16, 16, 2)};
  for (Image& b : c.bands)
    for (double& v : b) v -= 0.5;
  const FeatureStack fs = local_energy(c, 3);
  EXPECT_EQ(fs.dimension(), 2u);
  for (const Image& f : fs.features)
    for (double v : f) EXPECT_GE(v, 0.0);
  EXPECT_THROW(local_energy(c, 4), InvalidArgument);
}

TEST(KMeansL1, SeparatedClouds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 60; ++i) {
    const double base = i % 2 == 0 ? 0.0 : 50.0;  // diameter <= 2, gap 48
    pts.push_back({base + u(rng), base + u(rng)});
  }
  const Segmentation s = kmeans_l1(stack_from_points(pts), 2, 11);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_GE(s.labels[i], 1);
    EXPECT_LE(s.labels[i], 2);
    EXPECT_EQ(s.labels[i] == s.labels[0], i % 2 == 0);
  }
  EXPECT_EQ(s.cluster_sizes[0] + s.cluster_sizes[1], 60u);
}

TEST(KMeansL1, DistinctCountGivesZeroCost) {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({static_cast<double>(i % 3), 2.0 * (i % 3)});
  EXPECT_EQ(kmeans_l1(stack_from_points(pts), 3, 1).cost, 0.0);
  EXPECT_THROW(kmeans_l1(stack_from_points(pts), 4, 1), InvalidArgument);
}

TEST(KMeansL1, PermutationInvariantCost) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40; ++i) pts.push_back({8.0 * c + g(rng), 8.0 * (c % 2) + g(rng), g(rng)});
  const Segmentation a = kmeans_l1(stack_from_points(pts), 3, 9);
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<double>> shuffled;
  for (std::size_t i : order) shuffled.push_back(pts[i]);
  const Segmentation b = kmeans_l1(stack_from_points(shuffled), 3, 9);
  EXPECT_NEAR(a.cost, b.cost, 1e-9 * a.cost);
  // Same partition up to relabeling.
  std::vector<int> map(4, 0);
  for (std::size_t j = 0; j < order.size(); ++j) {
    int& m = map[static_cast<std::size_t>(b.labels[j])];
    const int la = a.labels[order[j]];
    if (m == 0) m = la;
    EXPECT_EQ(m, la);
  }
}

TEST(KMeansL1, CostNonIncreasing) {
  const Image img = random_image(40, 40, 8);
  FeatureStack fs;
  fs.width = fs.height = 40;
  fs.features = {img, random_image(40, 40, 9)};
  for (int k : {2, 4, 7}) {
    const Segmentation s = kmeans_l1(fs, k, 123);
    ASSERT_FALSE(s.cost_history.empty());
    for (std::size_t i = 1; i < s.cost_history.size(); ++i)
      EXPECT_LE(s.cost_history[i], s.cost_history[i - 1] * (1 + 1e-12));
    EXPECT_DOUBLE_EQ(s.cost_history.back(), s.cost);
  }
}

TEST(Segment, TwoGratingComposite) {
  const auto m = ewt::testing::texture_mosaic(128, 2);
  SegmentConfig cfg;
  cfg.k = 2;
  cfg.demons.levels = 5;
  const SegmentResult r = segment(m.image, cfg);
  EXPECT_GE(ewt::testing::best_permutation_accuracy(r.segmentation.labels, m.truth, 2), 0.95);
  for (const Image& f : r.features.features)
    for (double v : f) ASSERT_TRUE(v >= 0.0 && std::isfinite(v));
}

TEST(Segment, ThreeTextureMosaic) {
  const auto m = ewt::testing::texture_mosaic(128, 3);
  SegmentConfig cfg;
  cfg.k = 3;
  cfg.demons.levels = 5;
  const SegmentResult r = segment(m.image, cfg);
  EXPECT_GE(ewt::testing::best_permutation_accuracy(r.segmentation.labels, m.truth, 3), 0.90);
}

TEST(Segment, SingleCluster) {
  SegmentConfig cfg;
  cfg.k = 1;
  const SegmentResult r = segment(random_image(32, 32, 1), cfg);
  for (int l : r.segmentation.labels) EXPECT_EQ(l, 1);
}

TEST(Segment, DeterministicAcrossThreadCounts) {
  const auto m = ewt::testing::texture_mosaic(64, 2);
  SegmentConfig cfg;
  cfg.demons.levels = 4;
  set_thread_count(1);
  const SegmentResult a = segment(m.image, cfg);
  set_thread_count(4);
  const SegmentResult b = segment(m.image, cfg);
  set_thread_count(0);
  EXPECT_EQ(a.segmentation.labels, b.segmentation.labels);
  EXPECT_EQ(a.segmentation.cost, b.segmentation.cost);
}
