#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rohcrl/mlp.hpp"

using namespace rohcrl;
using namespace rohcrl::nn;

namespace {

// Straight-line forward pass over plain loops, no Eigen expressions.
std::vector<double> naive_forward(const MlpParams& p, std::vector<double> a) {
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    std::vector<double> z(static_cast<std::size_t>(l.weight.rows()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      double s = l.bias(r);
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) s += l.weight(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = (k + 1 < p.layers.size()) ? std::max(0.0, s) : s;
    }
    a = std::move(z);
  }
  return a;
}

std::vector<double> random_vector(int n, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = standard_normal(rng);
  return x;
}

double loss_at(const MlpParams& p, const std::vector<double>& x, int a, double y) {
  const double q = naive_forward(p, x)[static_cast<std::size_t>(a)];
  return (q - y) * (q - y);
}

}  // namespace

TEST(Mlp, InitShapes) {
  Rng rng(1);
  const MlpParams p = init({{8, 4, 6}}, rng);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].weight.rows(), 4);
  EXPECT_EQ(p.layers[0].weight.cols(), 8);
  EXPECT_EQ(p.layers[1].weight.rows(), 6);
  EXPECT_EQ(p.layers[1].weight.cols(), 4);
  EXPECT_EQ(p.layers[0].bias.size(), 4);
  EXPECT_EQ(p.layers[1].bias.size(), 6);
  EXPECT_TRUE(p.layers[0].bias.isZero());
  EXPECT_EQ(p.parameter_count(), 8u * 4 + 4 + 4 * 6 + 6);
}

TEST(Mlp, InitDeterministicAndBounded) {
  Rng a(5), b(5);
  const MlpConfig cfg = MlpConfig::q_network(30, 20, 2);
  const MlpParams pa = init(cfg, a), pb = init(cfg, b);
  for (std::size_t i = 0; i < pa.layers.size(); ++i) {
    EXPECT_EQ(pa.layers[i].weight, pb.layers[i].weight);
    const double limit = std::sqrt(6.0 / static_cast<double>(pa.layers[i].weight.rows() + pa.layers[i].weight.cols()));
    EXPECT_LE(pa.layers[i].weight.cwiseAbs().maxCoeff(), limit);
  }
}

TEST(Mlp, InitMeanWithinThreeSigma) {
  Rng rng(8);
  const MlpParams p = init(MlpConfig::q_network(200, 300, 1), rng);
  for (const auto& l : p.layers) {
    const double n = static_cast<double>(l.weight.size());
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    const double sigma = limit / std::sqrt(3.0);
    EXPECT_LE(std::abs(l.weight.mean()), 3.0 * sigma / std::sqrt(n));
  }
}

TEST(Mlp, ConfigValidation) {
  EXPECT_THROW((MlpConfig{{5}}.validate()), std::invalid_argument);
  EXPECT_THROW((MlpConfig{{5, 0, 6}}.validate()), std::invalid_argument);
  EXPECT_THROW((MlpConfig{{5, 4, 5}}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((MlpConfig{{5, 6}}.validate()));
}

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  Rng rng(2);
  const MlpParams p = zeros_like(init({{7, 5, 6}}, rng));
  const Eigen::VectorXd q = forward(p, random_vector(7, rng));
  EXPECT_TRUE(q.isZero());
}

TEST(Mlp, SingleLinearLayerSelectsInputs) {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Zero(6, 8), Eigen::VectorXd::Zero(6)});
  for (int i = 0; i < 6; ++i) p.layers[0].weight(i, i + 2) = 1.0;
  const std::vector<double> x{9, 9, 1, -2, 3, -4, 5, -6};
  const Eigen::VectorXd q = forward(p, x);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(q(i), x[static_cast<std::size_t>(i + 2)]);
}

TEST(Mlp, ForwardMatchesNaiveImplementation) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpParams p = init(MlpConfig::q_network(12, 9, 1 + trial % 3), rng);
    const std::vector<double> x = random_vector(12, rng);
    const Eigen::VectorXd q = forward(p, x);
    const std::vector<double> ref = naive_forward(p, x);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(q(i), ref[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_EQ(q, forward(p, x));
  }
  EXPECT_THROW(forward(init({{3, 6}}, rng), std::vector<double>(4)), std::invalid_argument);
}

TEST(Mlp, LossZeroWhenTargetMet) {
  Rng rng(4);
  const MlpParams p = init(MlpConfig::q_network(5, 4, 2), rng);
  const std::vector<double> x = random_vector(5, rng);
  const double y = forward(p, x)(3);
  const LossAndGrad lg = td_loss_grad(p, x, 3, y);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& l : lg.grad.layers) {
    EXPECT_TRUE(l.weight.isZero());
    EXPECT_TRUE(l.bias.isZero());
  }
}

TEST(Mlp, LossScalesQuadratically) {
  Rng rng(6);
  const MlpParams p = init(MlpConfig::q_network(5, 4, 1), rng);
  const std::vector<double> x = random_vector(5, rng);
  const double q = forward(p, x)(1);
  const double l1 = td_loss_grad(p, x, 1, q - 0.3).loss;
  const double l3 = td_loss_grad(p, x, 1, q - 0.9).loss;
  EXPECT_NEAR(l3, 9.0 * l1, 1e-12);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> width(1, 16), depth(0, 3);
    MlpConfig cfg{{width(rng)}};
    const int hidden = depth(rng);
    for (int i = 0; i < hidden; ++i) cfg.widths.push_back(width(rng));
    cfg.widths.push_back(6);
    MlpParams p = init(cfg, rng);
    for (auto& l : p.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * standard_normal(rng);
    const std::vector<double> x = random_vector(cfg.widths.front(), rng);
    const int a = std::uniform_int_distribution<int>(0, 5)(rng);
    const double y = standard_normal(rng);
    const LossAndGrad lg = td_loss_grad(p, x, a, y);

    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss_at(p, x, a, y);
      param = saved - h;
      const double down = loss_at(p, x, a, y);
      param = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      worst = std::max(worst, rel);
    };
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      auto& l = p.layers[k];
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) check(l.weight(r, c), lg.grad.layers[k].weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) check(l.bias(r), lg.grad.layers[k].bias(r));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, BatchGradientIsMeanOfSampleGradients) {
  Rng rng(12);
  const MlpParams p = init(MlpConfig::q_network(6, 5, 2), rng);
  const int n = 4;
  Eigen::MatrixXd x(6, n);
  std::vector<int> acts{0, 3, 5, 3};
  std::vector<double> ys;
  std::vector<std::vector<double>> cols;
  for (int j = 0; j < n; ++j) {
    cols.push_back(random_vector(6, rng));
    x.col(j) = Eigen::Map<const Eigen::VectorXd>(cols.back().data(), 6);
    ys.push_back(standard_normal(rng));
  }
  const LossAndGrad batch = batch_loss_grad(p, x, acts, ys);
  Gradients sum = zeros_like(p);
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    const LossAndGrad one = td_loss_grad(p, cols[static_cast<std::size_t>(j)], acts[static_cast<std::size_t>(j)], ys[static_cast<std::size_t>(j)]);
    loss += one.loss / n;
    for (std::size_t k = 0; k < sum.layers.size(); ++k) {
      sum.layers[k].weight += one.grad.layers[k].weight / n;
      sum.layers[k].bias += one.grad.layers[k].bias / n;
    }
  }
  EXPECT_NEAR(batch.loss, loss, 1e-12);
  for (std::size_t k = 0; k < sum.layers.size(); ++k) {
    EXPECT_LT((batch.grad.layers[k].weight - sum.layers[k].weight).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((batch.grad.layers[k].bias - sum.layers[k].bias).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mlp, SgdScalarHandCalculus) {
  // One weight, no hidden layer, input 1 on the single feature: Q_a = theta.
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Zero(6, 1), Eigen::VectorXd::Zero(6)});
  p.layers[0].weight(2, 0) = 0.7;
  const std::vector<double> x{1.0};
  const double y = 0.2, eta = 0.1;
  const LossAndGrad lg = td_loss_grad(p, x, 2, y);
  sgd_step(p, lg.grad, eta);
  // Both the weight and the bias move by -2 eta (theta - y).
  EXPECT_NEAR(p.layers[0].weight(2, 0), 0.7 - 2 * eta * (0.7 - y), 1e-15);
  EXPECT_NEAR(p.layers[0].bias(2), -2 * eta * (0.7 - y), 1e-15);
}

TEST(Mlp, ZeroRateAndCopyIndependence) {
  Rng rng(13);
  MlpParams p = init(MlpConfig::q_network(4, 3, 1), rng);
  const MlpParams before = copy_params(p);
  const LossAndGrad lg = td_loss_grad(p, random_vector(4, rng), 0, 5.0);
  sgd_step(p, lg.grad, 0.0);
  for (std::size_t k = 0; k < p.layers.size(); ++k) EXPECT_EQ(p.layers[k].weight, before.layers[k].weight);
  MlpParams copy = copy_params(p);
  copy.layers[0].weight(0, 0) += 1.0;
  EXPECT_NE(copy.layers[0].weight(0, 0), p.layers[0].weight(0, 0));
  EXPECT_THROW(sgd_step(p, zeros_like(init({{5, 6}}, rng)), 0.1), std::invalid_argument);
}

TEST(Mlp, FixedBatchTrainingMostlyDecreasesLoss) {
  Rng rng(14);
  MlpParams p = init(MlpConfig::q_network(10, 32, 2), rng);
  const int n = 32;
  Eigen::MatrixXd x(10, n);
  std::vector<int> acts;
  std::vector<double> ys;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < 10; ++i) x(i, j) = standard_normal(rng) / std::sqrt(10.0);
    acts.push_back(j % 6);
    ys.push_back(standard_normal(rng));
  }
  double prev = batch_loss_grad(p, x, acts, ys).loss;
  int decreases = 0;
  for (int step = 0; step < 500; ++step) {
    const LossAndGrad lg = batch_loss_grad(p, x, acts, ys);
    sgd_step(p, lg.grad, 1e-3);
    const double now = batch_loss_grad(p, x, acts, ys).loss;
    decreases += now < prev ? 1 : 0;
    prev = now;
  }
  EXPECT_GE(decreases, 475);
}

TEST(Mlp, SerializationRoundTripIsExact) {
  Rng rng(15);
  MlpParams p = init(MlpConfig::q_network(9, 7, 3), rng);
  for (auto& l : p.layers) l.bias.setRandom();
  std::stringstream ss;
  save(ss, p);
  const MlpParams back = load(ss);
  ASSERT_EQ(back.config().widths, p.config().widths);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    EXPECT_EQ(back.layers[k].weight, p.layers[k].weight);
    EXPECT_EQ(back.layers[k].bias, p.layers[k].bias);
  }
  std::istringstream bad("rohcrl-mlp 2\n");
  EXPECT_THROW(load(bad), std::runtime_error);
  std::istringstream truncated("rohcrl-mlp 1\n1\n2 6\n0.5\n");
  EXPECT_THROW(load(truncated), std::runtime_error);
}
