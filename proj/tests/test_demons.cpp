#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ewt/analysis.hpp"
#include "ewt/demons.hpp"
#include "ewt/transform.hpp"
#include "helpers.hpp"

using namespace ewt;
using ewt::testing::disk;

namespace {

Image smoothed_disk(int n, double cx, double cy, double r) { return gaussian_smooth(disk(n, n, cx, cy, r), 1.0); }

DisplacementField smooth_random_field(int w, int h, double max_norm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  DisplacementField f(w, h);
  for (Vec2& v : f) v = {g(rng), g(rng)};
  f = gaussian_smooth(f, 4.0);
  double m = 0.0;
  for (const Vec2& v : f) m = std::max(m, norm(v));
  for (Vec2& v : f) v *= max_norm / m;
  return f;
}

}  // namespace

TEST(Params, DefaultsAndValidation) {
  const DemonsParams p;
  EXPECT_EQ(p.sigma_x, 5.0);
  EXPECT_EQ(p.sigma_i, 1.0);
  EXPECT_EQ(p.sigma_f, 1.0);
  EXPECT_EQ(p.epsilon, 1e-3);
  EXPECT_EQ(p.max_iterations, 500);
  DemonsParams bad = p;
  bad.sigma_d = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = p;
  bad.levels = 0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_EQ(parse_variant("diffeomorphic"), DemonsVariant::Diffeomorphic);
  EXPECT_EQ(to_string(DemonsVariant::Thirion), "thirion");
  EXPECT_THROW(parse_variant("symmetric"), InvalidArgument);
}

TEST(Indicator, FullGridSinglePixelAndEmpty) {
  const Image full = indicator(LabelMap(16, 16, 3), 3);
  for (double v : full) EXPECT_NEAR(v, 1.0, 1e-12);
  LabelMap one(16, 16);
  one(8, 8) = 1;
  const Image imp = indicator(one, 1);
  EXPECT_LT(imp(8, 8), 1.0);
  EXPECT_GT(imp(8, 8), 0.0);
  EXPECT_EQ(imp(8, 8), *std::max_element(imp.begin(), imp.end()));
  EXPECT_THROW(indicator(one, 2), InvalidArgument);
}

TEST(Indicator, KernelSupportIsCenteredPlateau) {
  const Image lam = indicator(KernelKind::Disk, 64, 64);
  EXPECT_NEAR(lam(32, 32), 1.0, 1e-12);
  EXPECT_EQ(lam(2, 2), 0.0);
  const LabelMap mask = support_mask(KernelKind::Square, 64, 64);
  const double r = 0.35 * 32;
  EXPECT_EQ(mask(32 + static_cast<int>(r), 32), 1);
  EXPECT_EQ(mask(32 + static_cast<int>(r) + 1, 32), 0);
}

TEST(InitAffine, IdentityForMatchingRegion) {
  const LabelMap lam = support_mask(KernelKind::Disk, 64, 64);
  const AffineMap m = init_affine(lam, 1, KernelKind::Disk);
  EXPECT_TRUE(m.is_identity());
}

TEST(InitAffine, TranslatedCopyIsPureTranslation) {
  const LabelMap lam = support_mask(KernelKind::Disk, 64, 64);
  LabelMap shifted(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (x >= 5 && y + 3 < 64) shifted(x, y) = lam(x - 5, y + 3);
  const AffineMap m = init_affine(shifted, 1, KernelKind::Disk);
  EXPECT_DOUBLE_EQ(m.a11, 1.0);
  EXPECT_DOUBLE_EQ(m.a22, 1.0);
  EXPECT_EQ(m.a12, 0.0);
  EXPECT_NEAR(m.t.x, -5.0, 1e-12);
  EXPECT_NEAR(m.t.y, 3.0, 1e-12);
}

TEST(InitAffine, AreaRatioFourGivesScaleFactorTwo) {
  // A region four times the area of Lambda is shrunk by a factor 2.
  const LabelMap lam = support_mask(KernelKind::Square, 64, 64);
  const auto area = static_cast<int>(std::count(lam.begin(), lam.end(), 1));
  LabelMap region(64, 64);
  int placed = 0;
  for (std::size_t i = 0; i < region.size() && placed < 4 * area; ++i, ++placed) region[i] = 7;
  ASSERT_EQ(placed, 4 * area);
  const AffineMap m = init_affine(region, 7, KernelKind::Square);
  EXPECT_DOUBLE_EQ(m.a11, 0.5);
  EXPECT_DOUBLE_EQ(m.a22, 0.5);
  EXPECT_DOUBLE_EQ(m.determinant(), 0.25);
}

TEST(InitAffine, DegenerateRegionThrows) {
  LabelMap region(32, 32);
  region(3, 3) = 1;
  region(3, 4) = 1;
  EXPECT_THROW(init_affine(region, 1, KernelKind::Disk), InvalidArgument);
}

TEST(AffineMap, FieldAndScale) {
  AffineMap m;
  m.a11 = 2.0;
  m.a22 = 0.5;
  m.t = {4.0, -2.0};
  const DisplacementField d = m.to_field(8, 8);
  EXPECT_EQ(d(3, 2), (Vec2{2.0 * 3 + 4 - 3, 0.5 * 2 - 2 - 2}));
  EXPECT_EQ(m.at_scale(4).t, (Vec2{1.0, -0.5}));
}

TEST(Force, ZeroWhenMatchedOrFlat) {
  const Image a = ewt::testing::random_image(16, 16, 1);
  for (const Vec2& u : demons_force(a, a, DisplacementField(16, 16), {})) EXPECT_EQ(u, (Vec2{0, 0}));
  // Flat moving image: no gradient, no force even though D != 0.
  for (const Vec2& u : demons_force(Image(16, 16, 1.0), Image(16, 16, 0.2), DisplacementField(16, 16), {}))
    EXPECT_EQ(u, (Vec2{0, 0}));
}

TEST(Force, HandEvaluatedExample) {
  Image moving(16, 16), fixed(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      moving(x, y) = x;
      fixed(x, y) = x + 1.0;
    }
  const DisplacementField u = demons_force(fixed, moving, DisplacementField(16, 16), {});
  // D = 1, g = (1, 0): u = g / (1 + 1/25).
  EXPECT_NEAR(u(7, 7).x, 25.0 / 26.0, 1e-15);
  EXPECT_EQ(u(7, 7).y, 0.0);
}

TEST(Force, StepBound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(0.5, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    DemonsParams p;
    p.sigma_i = s(rng);
    const Image f = ewt::testing::random_image(24, 24, 100 + trial);
    const Image m = ewt::testing::random_image(24, 24, 200 + trial);
    const DisplacementField u = demons_force(f, m, smooth_random_field(24, 24, 3.0, trial), p);
    for (const Vec2& v : u) EXPECT_LE(norm(v), p.sigma_x / (2.0 * p.sigma_i) + 1e-9);
  }
}

TEST(ExpField, ZeroAndConstant) {
  for (const Vec2& v : exp_field(DisplacementField(16, 16))) EXPECT_EQ(v, (Vec2{0, 0}));
  const Vec2 c{2.75, -1.5};
  for (const Vec2& v : exp_field(DisplacementField(16, 16, c))) EXPECT_EQ(v, c);
}

TEST(ExpField, SmallFieldIsNearlyItself) {
  const DisplacementField u = smooth_random_field(32, 32, 0.1, 3);
  const DisplacementField e = exp_field(u);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_LE(norm(e[i] - u[i]), 1e-3);
}

TEST(ExpField, IsDiffeomorphic) {
  const DisplacementField e = exp_field(smooth_random_field(48, 48, 2.0, 4));
  const Image det = jacobian_det(e);
  // jacobian_det takes |det|; recompute the signed value on interior pixels.
  for (int y = 1; y < 47; ++y)
    for (int x = 1; x < 47; ++x) {
      const Vec2 gx = (Vec2{x + 1.0, double(y)} + e(x + 1, y) - (Vec2{x - 1.0, double(y)} + e(x - 1, y))) / 2.0;
      const Vec2 gy = (Vec2{double(x), y + 1.0} + e(x, y + 1) - (Vec2{double(x), y - 1.0} + e(x, y - 1))) / 2.0;
      EXPECT_GT(gx.x * gy.y - gx.y * gy.x, 0.0);
    }
  EXPECT_GT(*std::min_element(det.begin(), det.end()), 0.0);
}

TEST(Register, AlreadyRegisteredReturnsInitial) {
  const Image a = smoothed_disk(32, 16, 16, 6);
  const MappingEstimate e = demons_register(a, a, {}, DisplacementField(32, 32));
  EXPECT_EQ(e.rmse, 0.0);
  EXPECT_EQ(e.iterations, 0);
  for (const Vec2& v : e.field) EXPECT_EQ(v, (Vec2{0, 0}));
}

TEST(Register, ZeroIterationCapReturnsInitial) {
  DemonsParams p;
  p.max_iterations = 0;
  const DisplacementField init(32, 32, Vec2{0.5, 0.25});
  const MappingEstimate e = demons_register(smoothed_disk(32, 16, 16, 6), smoothed_disk(32, 18, 16, 6), p, init);
  EXPECT_EQ(e.field, init);
}

TEST(Register, SmallTranslationAllVariants) {
  const Image fixed = smoothed_disk(64, 32, 32, 12);
  const Image moving = smoothed_disk(64, 35, 32, 12);
  for (DemonsVariant v : {DemonsVariant::Additive, DemonsVariant::Diffeomorphic}) {
    DemonsParams p;
    p.variant = v;
    const MappingEstimate e = demons_register(fixed, moving, p, DisplacementField(64, 64));
    EXPECT_LT(e.rmse, 0.02) << to_string(v);
    EXPECT_LE(e.iterations, p.max_iterations);
    EXPECT_NEAR(e.rmse, rmse_mapping(fixed, moving, e.field), 1e-15);
    // Monotone trend after the first ten iterations, 5% tolerance.
    for (std::size_t k = 11; k < e.energy_history.size(); ++k) {
      const double prior = *std::min_element(e.energy_history.begin(), e.energy_history.begin() + static_cast<std::ptrdiff_t>(k));
      EXPECT_LE(e.energy_history[k], 1.05 * prior) << to_string(v) << " k=" << k;
    }
  }
}

TEST(Multires, AlreadyRegisteredGivesZeroField) {
  const Image a = smoothed_disk(32, 16, 16, 6);
  const MappingEstimate e = multires_register(a, a, {});
  for (const Vec2& v : e.field) EXPECT_EQ(v, (Vec2{0, 0}));
}

TEST(Multires, LevelFieldScaling) {
  const Vec2 c{1.25, -0.5};
  const DisplacementField coarse(16, 16, c);
  for (int k : {1, 2, 3}) {
    const int f = 1 << k;
    const DisplacementField full = field_from_level(coarse, f, 16 * f, 16 * f);
    for (const Vec2& v : full) EXPECT_EQ(v, static_cast<double>(f) * c);
    for (const Vec2& v : field_to_level(full, f)) {
      EXPECT_NEAR(v.x, c.x, 1e-12);
      EXPECT_NEAR(v.y, c.y, 1e-12);
    }
  }
}

TEST(Multires, LevelHelpers) {
  EXPECT_EQ(usable_levels(256, 256, 7), 6);  // 256 >> 6 = 4 px would be too small
  EXPECT_EQ(usable_levels(256, 256, 3), 3);
  EXPECT_EQ(usable_levels(8, 8, 4), 1);
  EXPECT_EQ(thirion_iterations(0, 7), 16);
  EXPECT_EQ(thirion_iterations(3, 7), 128);
  EXPECT_EQ(thirion_iterations(6, 7), 256);
}

TEST(Multires, LargeTranslationNeedsPyramid) {
  // Disks 20 px apart that do not overlap: the force is local, so a single
  // level cannot bring them together while a 4-level pyramid can.
  const Image fixed = smoothed_disk(256, 128, 128, 8);
  const Image moving = smoothed_disk(256, 148, 128, 8);
  const MappingEstimate one = multires_register(fixed, moving, {});
  DemonsParams pyramid;
  pyramid.levels = 4;
  const MappingEstimate four = multires_register(fixed, moving, pyramid);
  EXPECT_LT(four.rmse, 0.05);
  EXPECT_GT(one.rmse, 10.0 * four.rmse);
  EXPECT_NEAR(four.field(128, 128).x, 20.0, 1.0);
  EXPECT_LE(four.iterations, pyramid.max_iterations * pyramid.levels);
}

TEST(SelectParams, GridShape) {
  EXPECT_EQ(pyramid_depth(256, 256), 7);
  EXPECT_EQ(pyramid_depth(257, 300), 8);
  EXPECT_EQ(pyramid_depth(128, 200), 6);
  const auto grid = parameter_grid({}, 256, 256);
  ASSERT_EQ(grid.size(), 42u);
  EXPECT_DOUBLE_EQ(grid.front().sigma_d, 0.30);
  EXPECT_EQ(grid.front().levels, 6);
  EXPECT_EQ(grid[1].levels, 7);
  EXPECT_DOUBLE_EQ(grid.back().sigma_d, 0.50);
}

TEST(SelectParams, TiesGoToFirstCandidate) {
  const Image a = smoothed_disk(32, 16, 16, 6);
  const DemonsParams p = select_params(a, a, {});
  EXPECT_DOUBLE_EQ(p.sigma_d, 0.30);
  EXPECT_EQ(p.levels, pyramid_depth(32, 32) - 1);
}

TEST(EstimateMappings, DeterministicAcrossThreadCounts) {
  const Partition part = make_partition(toy_image(64, 64), PartitionMethod::Voronoi);
  DemonsParams p;
  p.levels = 3;
  set_thread_count(1);
  const auto a = estimate_mappings(part, KernelKind::Disk, p);
  set_thread_count(4);
  const auto b = estimate_mappings(part, KernelKind::Disk, p);
  set_thread_count(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, static_cast<int>(i));
    EXPECT_EQ(a[i].estimate.field, b[i].estimate.field);
    EXPECT_GE(a[i].estimate.rmse, 0.0);
  }
}
