#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "rccf/gradcheck.hpp"
#include "rccf/targets.hpp"
#include "test_util.hpp"

using namespace rccf;

namespace {

// Independent oracle: IoU between the original box and its displaced variant
// as a pure geometric computation, bisected for the displacement where the
// overlap drops to `o`.
double iou_case(int which, double w, double h, double r) {
  Box a{0, 0, w, h};
  Box b;
  switch (which) {
    case 0: b = {r, r, w, h}; break;          // corner moves inward
    case 1: b = {-r, -r, w, h}; break;        // corner moves outward
    default: b = {r, r, w + r, h + r}; break; // whole box shifts
  }
  return iou(a, b);
}

double bisect_radius(int which, double w, double h, double o) {
  double lo = 0.0, hi = which == 1 ? 4.0 * (w + h) : std::min(w, h);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (iou_case(which, w, h, mid) >= o)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double oracle_radius(double w, double h, double o) {
  return std::min({bisect_radius(0, w, h, o), bisect_radius(1, w, h, o), bisect_radius(2, w, h, o)});
}

}  // namespace

TEST(GaussianRadius, AgreesWithBisectionOracle) {
  EXPECT_NEAR(gaussian_radius(10.0, 10.0, 0.7), oracle_radius(10.0, 10.0, 0.7), 1e-6);
  Rng rng(21);
  for (int i = 0; i < 30; ++i) {
    const double w = rng.uniform(0.5, 40.0);
    const double h = rng.uniform(0.5, 40.0);
    const double o = rng.uniform(0.3, 0.9);
    EXPECT_NEAR(gaussian_radius(w, h, o), oracle_radius(w, h, o), 1e-6)
        << "w=" << w << " h=" << h << " o=" << o;
  }
}

TEST(GaussianSigma, MonotoneInBoxSize) {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    const double w = rng.uniform(0.2, 30.0);
    const double h = rng.uniform(0.2, 30.0);
    EXPECT_GE(gaussian_sigma(2 * w, 2 * h), gaussian_sigma(w, h));
  }
}

TEST(GaussianSigma, TinyBoxClampsToFloor) {
  EXPECT_DOUBLE_EQ(gaussian_sigma(0.5, 0.5), 0.5);
  EXPECT_THROW(gaussian_sigma(0.0, 1.0), std::invalid_argument);
}

TEST(MakeTargets, FloorArithmeticExample) {
  GroundTruthBox box{101.0, 49.0, 20.0, 20.0};
  TargetBundle t = make_targets(box, 4, 32, 32);
  EXPECT_EQ(t.cell_x, 25);
  EXPECT_EQ(t.cell_y, 12);
  EXPECT_DOUBLE_EQ(t.off_x, 0.25);
  EXPECT_DOUBLE_EQ(t.off_y, 0.25);
  EXPECT_DOUBLE_EQ(t.size_w, 5.0);
  EXPECT_DOUBLE_EQ(t.size_h, 5.0);
  EXPECT_DOUBLE_EQ(t.heatmap.at(12, 25), 1.0);
}

TEST(MakeTargets, CenterOnCellCornerHasZeroOffset) {
  GroundTruthBox box{48.0, 16.0, 10.0, 10.0};
  TargetBundle t = make_targets(box, 4, 16, 16);
  EXPECT_DOUBLE_EQ(t.off_x, 0.0);
  EXPECT_DOUBLE_EQ(t.off_y, 0.0);
}

TEST(MakeTargets, GaussianValueAtOneSigma) {
  // tiny box with sigma_min = 2 pins sigma exactly, so the cell two steps
  // from the center along an axis sits at distance sigma
  GroundTruthBox box{33.0, 33.0, 1.0, 1.0};
  TargetBundle t = make_targets(box, 4, 16, 16, 0.7, 2.0);
  ASSERT_DOUBLE_EQ(t.sigma, 2.0);
  EXPECT_NEAR(t.heatmap.at(t.cell_y, t.cell_x + 2), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(t.heatmap.at(t.cell_y + 2, t.cell_x), std::exp(-0.5), 1e-12);
}

TEST(MakeTargets, DecaysMonotonicallyAndOffsetsInRange) {
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    GroundTruthBox box{rng.uniform(4.0, 60.0), rng.uniform(4.0, 60.0), rng.uniform(2.0, 24.0),
                       rng.uniform(2.0, 24.0)};
    TargetBundle t = make_targets(box, 4, 16, 16);
    EXPECT_GE(t.off_x, 0.0);
    EXPECT_LT(t.off_x, 1.0);
    EXPECT_GE(t.off_y, 0.0);
    EXPECT_LT(t.off_y, 1.0);
    EXPECT_DOUBLE_EQ(t.heatmap.at(t.cell_y, t.cell_x), 1.0);
    for (int step = 1; t.cell_x + step < 16; ++step)
      EXPECT_LE(t.heatmap.at(t.cell_y, t.cell_x + step),
                t.heatmap.at(t.cell_y, t.cell_x + step - 1));
  }
  EXPECT_THROW(make_targets({200.0, 5.0, 4.0, 4.0}, 4, 16, 16), std::invalid_argument);
}

TEST(FocalLoss, ClosedFormSinglePixel) {
  Tensor target = Tensor::full({1, 1}, 1.0);
  Tensor pred = Tensor::full({1, 1}, 0.5);
  EXPECT_NEAR(focal_loss(pred, target).value(), 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(focal_loss(pred, target).value(), 0.1733, 1e-4);

  Tensor tail = Tensor::full({1, 1}, 0.5);
  EXPECT_NEAR(focal_loss(pred, tail).value(), std::pow(0.5, 4) * 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(focal_loss(pred, tail).value(), 0.01083, 1e-4);
}

TEST(FocalLoss, PerfectPredictionLimit) {
  GroundTruthBox box{31.0, 33.0, 12.0, 16.0};
  TargetBundle t = make_targets(box, 4, 16, 16);
  Tensor ideal(t.heatmap.shape());
  for (int i = 0; i < ideal.size(); ++i)
    ideal.v(i) = t.heatmap.v(i) == 1.0 ? 1.0 - 1e-9 : std::min(t.heatmap.v(i), 1e-9);
  EXPECT_LT(focal_loss(ideal, t.heatmap).value(), 1e-4);
  EXPECT_THROW(focal_loss(Tensor({4, 4}), t.heatmap), std::invalid_argument);
}

TEST(FocalLoss, MassAwayFromCenterNeverHelps) {
  GroundTruthBox box{31.0, 33.0, 12.0, 16.0};
  TargetBundle t = make_targets(box, 4, 16, 16);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10; ++k) {
    const double lam = k / 10.0;
    Tensor blend(t.heatmap.shape());
    for (int i = 0; i < blend.size(); ++i) blend.v(i) = lam * t.heatmap.v(i) + (1.0 - lam) * 0.5;
    const double loss = focal_loss(blend, t.heatmap).value();
    EXPECT_LE(loss, prev + 1e-12) << "lambda=" << lam;
    prev = loss;
  }
}

TEST(FocalLoss, GradientMatchesFiniteDifferences) {
  Rng rng(25);
  GroundTruthBox box{17.0, 21.0, 10.0, 8.0};
  TargetBundle t = make_targets(box, 4, 8, 8);
  Tensor pred(t.heatmap.shape());
  for (int i = 0; i < pred.size(); ++i) pred.v(i) = rng.uniform(0.05, 0.95);
  const double err = finite_difference_check(
      [&](const Tensor& p) { return focal_loss(p, t.heatmap); }, pred);
  EXPECT_LT(err, 1e-4);
}

TEST(RegressionLosses, ExactAndOffByOne) {
  GroundTruthBox box{31.0, 22.0, 12.0, 16.0};
  TargetBundle t = make_targets(box, 4, 16, 16);
  Tensor w = Tensor::full({16, 16}, t.size_w);
  Tensor h = Tensor::full({16, 16}, t.size_h);
  Tensor dx = Tensor::full({16, 16}, t.off_x);
  Tensor dy = Tensor::full({16, 16}, t.off_y);
  auto [ls, lo] = regression_losses(w, h, dx, dy, t);
  EXPECT_DOUBLE_EQ(ls.value(), 0.0);
  EXPECT_DOUBLE_EQ(lo.value(), 0.0);

  Tensor w_off = Tensor::full({16, 16}, t.size_w);
  w_off.at(t.cell_y, t.cell_x) += 1.0;
  auto [ls2, lo2] = regression_losses(w_off, h, dx, dy, t);
  EXPECT_DOUBLE_EQ(ls2.value(), 1.0);
  EXPECT_DOUBLE_EQ(lo2.value(), 0.0);

  // perturbing any non-center cell changes nothing
  Tensor w_noise = Tensor::full({16, 16}, t.size_w);
  for (int i = 0; i < w_noise.size(); ++i)
    if (i != t.flat_center(16)) w_noise.v(i) += 100.0;
  auto [ls3, lo3] = regression_losses(w_noise, h, dx, dy, t);
  EXPECT_DOUBLE_EQ(ls3.value(), 0.0);
  EXPECT_DOUBLE_EQ(lo3.value(), 0.0);
}

TEST(RegressionLosses, GradientSupportedOnlyAtCenter) {
  Rng rng(26);
  GroundTruthBox box{31.0, 22.0, 12.0, 16.0};
  TargetBundle t = make_targets(box, 4, 16, 16);
  Tensor w = rccf_test::random_tensor({16, 16}, rng, 0.0, 6.0, true);
  Tensor h = rccf_test::random_tensor({16, 16}, rng, 0.0, 6.0, true);
  Tensor dx = rccf_test::random_tensor({16, 16}, rng, 0.0, 1.0, true);
  Tensor dy = rccf_test::random_tensor({16, 16}, rng, 0.0, 1.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    auto [ls, lo] = regression_losses(w, h, dx, dy, t);
    tape.backward(total_loss(Tensor::scalar(0.0), ls, lo));
  }
  const int c = t.flat_center(16);
  for (Tensor* m : {&w, &h, &dx, &dy})
    for (int i = 0; i < m->size(); ++i) {
      if (i == c)
        EXPECT_NE(m->grad()[i], 0.0);
      else
        EXPECT_EQ(m->grad()[i], 0.0);
    }
}

TEST(TotalLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(
      total_loss(Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(0.0)).value(), 0.0);
  EXPECT_DOUBLE_EQ(
      total_loss(Tensor::scalar(1.0), Tensor::scalar(1.0), Tensor::scalar(1.0)).value(), 2.1);
  EXPECT_NEAR(
      total_loss(Tensor::scalar(0.1733), Tensor::scalar(0.5), Tensor::scalar(0.25)).value(),
      0.4733, 1e-12);
}
