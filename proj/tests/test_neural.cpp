#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace distress;
using namespace distress::testing;

namespace {

MlpConfig toy_config(double l1 = 0.0, double dropout = 0.0) {
  MlpConfig c;
  c.input_dim = 6;
  c.hidden_layers = {4};
  c.l1 = l1;
  c.dropout_p = dropout;
  c.seed = 21;
  return c;
}

Batch toy_batch(std::size_t n = 7, std::uint64_t seed = 4) {
  Rng rng(seed);
  Batch b;
  b.inputs.resize(6, static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < b.inputs.cols(); ++c)
    for (Eigen::Index r = 0; r < 6; ++r) b.inputs(r, c) = normal(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % 2));
  return b;
}

MlpModel zero_model(const MlpConfig& c) {
  auto m = MlpModel::init(c);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  return m;
}

// Two Gaussian blobs, separable along the first axis.
void blobs(std::size_t n, Eigen::MatrixXd& x, std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  x.resize(6, static_cast<Eigen::Index>(n));
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    for (Eigen::Index r = 0; r < 6; ++r) x(r, static_cast<Eigen::Index>(i)) = normal(rng, 0.0, 0.3);
    x(0, static_cast<Eigen::Index>(i)) += label ? 2.0 : -2.0;
    y.push_back(label);
  }
}

}  // namespace

TEST(Forward, ZeroModelIsUniform) {
  const auto m = zero_model(toy_config());
  const auto p = forward(m, Eigen::VectorXd::Random(6), Mode::infer);
  EXPECT_EQ(p(0), 0.5);
  EXPECT_EQ(p(1), 0.5);
  EXPECT_NEAR(loss(m, toy_batch()), std::numbers::ln2, 1e-15);
  EXPECT_THROW(forward(m, Eigen::VectorXd::Zero(5), Mode::infer), ValidationError);
}

TEST(Forward, SoftmaxSumsToOne) {
  auto m = MlpModel::init(toy_config());
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Random(6) * (1 + i * 20.0);
    const auto p = forward(m, x, Mode::infer);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Forward, DropoutZeroTrainEqualsInfer) {
  const auto m = MlpModel::init(toy_config(0.0, 0.0));
  Rng rng(3);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  EXPECT_EQ(forward(m, x, Mode::train, &rng), forward(m, x, Mode::infer));
  const auto d = MlpModel::init(toy_config(0.0, 0.5));
  EXPECT_THROW(forward(d, x, Mode::train), ValidationError);
}

TEST(Loss, PerfectPredictionAndL1) {
  auto m = zero_model(toy_config());
  m.layers.back().bias << -50.0, 50.0;
  Batch b = toy_batch();
  std::fill(b.labels.begin(), b.labels.end(), 1);
  EXPECT_NEAR(loss(m, b), 0.0, 1e-20);

  auto a = MlpModel::init(toy_config(0.0));
  auto l = a;
  l.config.l1 = 1e-3;
  const Batch t = toy_batch();
  EXPECT_GT(loss(l, t), loss(a, t));
  EXPECT_NEAR(loss(l, t) - loss(a, t), 1e-3 * a.weight_l1(), 1e-15);
}

TEST(Gradients, MatchFiniteDifferences) {
  for (double l1 : {0.0, 1e-2}) {
    auto m = MlpModel::init(toy_config(l1));
    for (auto& layer : m.layers) layer.bias.setConstant(0.1);
    const Batch b = toy_batch();
    const auto g = gradients(m, b, nullptr);
    const double eps = 1e-5;
    double diff = 0, na = 0, nn = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = loss(m, b);
        param = saved - eps;
        const double down = loss(m, b);
        param = saved;
        const double numeric = (up - down) / (2 * eps);
        diff += (numeric - analytic) * (numeric - analytic);
        na += analytic * analytic;
        nn += numeric * numeric;
      };
      for (Eigen::Index i = 0; i < m.layers[l].weights.size(); ++i)
        probe(m.layers[l].weights.data()[i], g.grads[l].weights.data()[i]);
      for (Eigen::Index i = 0; i < m.layers[l].bias.size(); ++i)
        probe(m.layers[l].bias.data()[i], g.grads[l].bias.data()[i]);
    }
    EXPECT_LT(std::sqrt(diff) / (std::sqrt(na) + std::sqrt(nn)), 1e-5) << "l1 " << l1;
  }
}

TEST(Gradients, ZeroInputGivesPureL1Term) {
  auto m = MlpModel::init(toy_config(0.3));
  m.layers[0].weights(0, 0) = 0.0;
  Batch b = toy_batch();
  b.inputs.setZero();
  const auto g = gradients(m, b, nullptr);
  const Eigen::MatrixXd expected =
      0.3 * m.layers[0].weights.unaryExpr([](double w) { return double((w > 0) - (w < 0)); });
  EXPECT_EQ(g.grads[0].weights, expected);
  EXPECT_EQ(g.grads[0].weights(0, 0), 0.0);  // sign(0) = 0
}

TEST(Gradients, BiasHasNoL1) {
  auto a = MlpModel::init(toy_config(0.0));
  auto b = a;
  b.config.l1 = 0.5;
  const Batch batch = toy_batch();
  const auto ga = gradients(a, batch, nullptr);
  const auto gb = gradients(b, batch, nullptr);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(ga.grads[l].bias, gb.grads[l].bias);
  EXPECT_NE(ga.grads[0].weights, gb.grads[0].weights);
}

TEST(Nesterov, QuadraticTrace) {
  double theta = 1.0, v = 0.0;
  auto grad = [](double t) { return t; };
  nesterov_update(theta, v, 0.1, 0.9, grad);
  EXPECT_NEAR(theta, 0.9, 1e-12);
  EXPECT_NEAR(v, -0.1, 1e-12);
  nesterov_update(theta, v, 0.1, 0.9, grad);
  EXPECT_NEAR(theta, 0.729, 1e-12);
  EXPECT_NEAR(v, -0.171, 1e-12);
}

TEST(Nesterov, QuadraticConverges) {
  // The trace is a damped oscillation: |theta_t| is not monotone, but it
  // sits under a geometric envelope and reaches zero.
  double theta = 1.0, v = 0.0;
  double peak_early = 0, peak_late = 0;
  for (int t = 1; t <= 50; ++t) {
    nesterov_update(theta, v, 0.1, 0.9, [](double x) { return x; });
    if (t <= 25) peak_early = std::max(peak_early, std::abs(theta));
    if (t > 25) peak_late = std::max(peak_late, std::abs(theta));
  }
  EXPECT_LT(peak_late, peak_early);
  EXPECT_LT(std::abs(theta), 0.05);
}

TEST(Nesterov, StepMatchesRecurrence) {
  auto m = MlpModel::init(toy_config(1e-3));
  const Batch b = toy_batch();
  const double lr = 0.05;
  const auto theta0 = m.layers;
  const auto g0 = gradients(m, b, nullptr);
  nesterov_step(m, b, lr, nullptr);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_TRUE(m.layers[l].weights.isApprox(theta0[l].weights - lr * g0.grads[l].weights, 1e-14));
    EXPECT_TRUE(m.velocity[l].weights.isApprox(-lr * g0.grads[l].weights, 1e-14));
  }
  // Second step: gradient at the lookahead point.
  auto look = m;
  for (std::size_t l = 0; l < look.layers.size(); ++l) {
    look.layers[l].weights += 0.9 * m.velocity[l].weights;
    look.layers[l].bias += 0.9 * m.velocity[l].bias;
  }
  const auto g1 = gradients(look, b, nullptr);
  const auto theta1 = m.layers;
  const auto v1 = m.velocity;
  nesterov_step(m, b, lr, nullptr);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const Eigen::MatrixXd v2 = 0.9 * v1[l].weights - lr * g1.grads[l].weights;
    EXPECT_TRUE(m.layers[l].weights.isApprox(theta1[l].weights + v2, 1e-14));
  }
}

TEST(Nesterov, ZeroMomentumIsSgd) {
  auto cfg = toy_config();
  cfg.momentum = 0.0;
  auto m = MlpModel::init(cfg);
  const Batch b = toy_batch();
  const auto g = gradients(m, b, nullptr);
  const auto before = m.layers;
  nesterov_step(m, b, 0.1, nullptr);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_EQ(m.layers[l].weights, (before[l].weights - 0.1 * g.grads[l].weights).eval());
    EXPECT_EQ(m.layers[l].bias, (before[l].bias - 0.1 * g.grads[l].bias).eval());
  }
}

TEST(Train, SeparableBlobs) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(400, x, y, 8);
  auto cfg = toy_config(1e-5, 0.5);
  cfg.lr = 0.01;
  const auto r = train(MlpModel::init(cfg), x, y, nullptr);
  const auto p = predict_proba(r.best, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += (p(static_cast<Eigen::Index>(i)) >= 0.5) == (y[i] == 1);
  EXPECT_GE(correct / 400.0, 0.99);
  EXPECT_EQ(r.curve.size(), 100u);
  EXPECT_EQ(r.best_epoch, 100u);  // no hook: last epoch
}

TEST(Train, SnapshotIsArgmaxAndDeterministic) {
  Eigen::MatrixXd x, xv;
  std::vector<int> y, yv;
  blobs(120, x, y, 2);
  blobs(60, xv, yv, 3);
  xv.row(0) *= 0.15;  // harder validation set
  auto cfg = toy_config(1e-4, 0.5);
  cfg.epochs = 30;
  auto hook = [&](const MlpModel& m) {
    const auto p = predict_proba(m, xv);
    double acc = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) acc += (p(static_cast<Eigen::Index>(i)) >= 0.5) == (yv[i] == 1);
    return acc / static_cast<double>(yv.size());
  };
  const auto r = train(MlpModel::init(cfg), x, y, hook);
  ASSERT_GE(r.best_epoch, 1u);
  EXPECT_GE(r.best_score, r.curve.back().val_usefulness);
  for (const auto& pt : r.curve) EXPECT_LE(pt.val_usefulness, r.best_score);
  EXPECT_EQ(r.curve[r.best_epoch - 1].val_usefulness, r.best_score);
  EXPECT_EQ(hook(r.best), r.best_score);

  const auto again = train(MlpModel::init(cfg), x, y, hook);
  ASSERT_EQ(again.curve.size(), r.curve.size());
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    EXPECT_EQ(again.curve[i].train_loss, r.curve[i].train_loss);
    EXPECT_EQ(again.curve[i].val_usefulness, r.curve[i].val_usefulness);
  }
  EXPECT_EQ(again.best.layers[0].weights, r.best.layers[0].weights);
}

TEST(Train, NanScoresKeepLastEpoch) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(40, x, y, 5);
  auto cfg = toy_config();
  cfg.epochs = 4;
  const auto r = train(MlpModel::init(cfg), x, y, [](const MlpModel&) { return std::nan(""); });
  EXPECT_EQ(r.best_epoch, 4u);
  EXPECT_THROW(train(MlpModel::init(cfg), Eigen::MatrixXd(6, 0), std::vector<int>{}, nullptr), ValidationError);
}

TEST(Train, L1ShrinksWeightsOnZeroInputs) {
  auto cfg = toy_config(0.05);
  cfg.lr = 0.01;
  cfg.epochs = 400;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(6, 64);
  std::vector<int> y(64);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const auto init = MlpModel::init(cfg);
  const auto r = train(init, x, y, nullptr);
  EXPECT_LT(r.best.layers[0].weights.cwiseAbs().sum(), 0.1 * init.layers[0].weights.cwiseAbs().sum());
}

TEST(Predict, OrderIndependentAndBounded) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(30, x, y, 6);
  const auto m = MlpModel::init(toy_config());
  std::vector<SampleKey> keys;
  for (int i = 0; i < 30; ++i) keys.push_back({"s" + std::to_string(i), "b", {2010, 1}, y[static_cast<std::size_t>(i)]});
  const auto p = predict(m, x, keys);
  ASSERT_EQ(p.size(), 30u);
  Eigen::MatrixXd rev = x.rowwise().reverse();
  std::vector<SampleKey> rkeys(keys.rbegin(), keys.rend());
  const auto q = predict(m, rev, rkeys);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(p[i].p_distress, q[29 - i].p_distress);
    EXPECT_EQ(p[i].sentence_id, q[29 - i].sentence_id);
    EXPECT_GE(p[i].p_distress, 0.0);
    EXPECT_LE(p[i].p_distress, 1.0);
  }
}

TEST(Checkpoint, RoundTripAndCurve) {
  auto m = MlpModel::init(toy_config(1e-3, 0.5));
  Rng rng(1);
  nesterov_step(m, toy_batch(), 0.1, &rng);
  const auto dir = scratch_dir("neural");
  save_checkpoint(m, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");
  ASSERT_EQ(back.layers.size(), m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].weights, m.layers[l].weights);
    EXPECT_EQ(back.layers[l].bias, m.layers[l].bias);
    EXPECT_EQ(back.velocity[l].weights, m.velocity[l].weights);
  }
  EXPECT_EQ(back.config.dropout_p, 0.5);
  write_training_curve(dir / "curve.csv", std::vector<TrainingCurvePoint>{{1, 0.5, 0.25}});
  EXPECT_EQ(io::read_text(dir / "curve.csv"), "epoch,train_loss,val_usefulness\n1,0.5,0.25\n");
}

TEST(Config, Defaults) {
  const MlpConfig c;
  EXPECT_EQ(c.hidden_layers, (std::vector<std::size_t>{50}));
  EXPECT_EQ(c.lr, 5e-4);
  EXPECT_EQ(c.l1, 1e-5);
  EXPECT_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.input_dim, 612u);
  MlpConfig bad;
  bad.dropout_p = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
}
