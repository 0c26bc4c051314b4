#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include "doctest.h"

#include "opnet/adam.hpp"
#include "opnet/errors.hpp"
#include "opnet/model_io.hpp"
#include "opnet/nn.hpp"
#include "opnet/rng.hpp"
#include "opnet/scaler.hpp"
#include "opnet/train.hpp"

using namespace opnet;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index m, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-scale, scale);
  return x;
}

DenseNet single_layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation act) {
  return DenseNet({DenseLayer{std::move(w), std::move(b), act}});
}

}  // namespace

TEST_CASE("forward examples") {
  const DenseNet id = single_layer(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), Activation::Identity);
  const Eigen::Vector3d x(1.5, -2.0, 0.25);
  CHECK(id.forward(x) == x);

  const DenseNet t = single_layer(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Activation::Tanh);
  CHECK(t.forward(Eigen::VectorXd::Zero(1))(0) == 0.0);

  // hand evaluation: h = tanh(W1 x + b1), out = W2 h + b2
  Eigen::Matrix2d w1, w2;
  w1 << 1.0, -1.0, 0.5, 2.0;
  w2 << 2.0, 0.0, -1.0, 1.0;
  const DenseNet two({DenseLayer{w1, Eigen::Vector2d(0.0, -1.0), Activation::Tanh},
                      DenseLayer{w2, Eigen::Vector2d(0.5, 0.0), Activation::Identity}});
  const Eigen::VectorXd out = two.forward(Eigen::Vector2d(1.0, 0.5));
  const double h0 = std::tanh(0.5);
  const double h1 = std::tanh(0.5 + 1.0 - 1.0);
  CHECK(out(0) == doctest::Approx(2.0 * h0 + 0.5).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(-h0 + h1).epsilon(1e-15));

  CHECK_THROWS_AS(two.forward(Eigen::Vector3d::Zero()), Error);

  const DenseNet relu = single_layer(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero(), Activation::Relu);
  CHECK(relu.forward(Eigen::Vector2d(-1.0, 2.0)) == Eigen::Vector2d(0.0, 2.0));
  const DenseNet ex = single_layer(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), Activation::Exp);
  CHECK(ex.forward(Eigen::VectorXd::Ones(1))(0) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("malformed networks are rejected") {
  CHECK_THROWS_AS(DenseNet(std::vector<DenseLayer>{}), Error);
  CHECK_THROWS_AS(DenseNet({DenseLayer{Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Zero(2), Activation::Tanh},
                            DenseLayer{Eigen::MatrixXd::Ones(1, 3), Eigen::VectorXd::Zero(1), Activation::Tanh}}),
                  Error);
}

TEST_CASE("parameter counts") {
  Rng rng(1);
  const NetSpec three32{{32, 32, 32}};
  // TC1 vanilla: two variables, each 2->32x3->2 branch, 1->32x3->2 trunk, one bias
  const std::size_t tc1 = 2 * (param_count(2, 2, three32) + param_count(1, 2, three32) + 1);
  CHECK(tc1 == 9034);
  // TC2 vanilla p = 8: 1->32x3->8 on both sides plus bias
  CHECK(param_count(1, 8, three32) * 2 + 1 == 4881);
  const DenseNet net = DenseNet::glorot(3, 4, NetSpec{{5, 6}}, rng);
  CHECK(net.param_count() == (3 * 5 + 5) + (5 * 6 + 6) + (6 * 4 + 4));
  CHECK(net.param_count() == param_count(3, 4, NetSpec{{5, 6}}));
  CHECK(static_cast<std::size_t>(net.parameters().size()) == net.param_count());
  CHECK(DenseNet::glorot(2, 3, NetSpec{{}}, rng).param_count() == 9);
}

TEST_CASE("glorot initialization bounds") {
  Rng rng(4);
  const DenseNet net = DenseNet::glorot(10, 6, NetSpec{{20}}, rng);
  CHECK(net.layer(0).weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 30.0));
  CHECK(net.layer(1).weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 26.0));
  CHECK(net.layer(0).bias.isZero());
  Rng again(4);
  CHECK(DenseNet::glorot(10, 6, NetSpec{{20}}, again) == net);
}

TEST_CASE("gradient examples") {
  Rng rng(8);
  const DenseNet net = DenseNet::glorot(3, 2, NetSpec{{4, 4}}, rng);
  const Eigen::MatrixXd x = random_matrix(3, 6, rng);
  const MseGradient zero = mse_gradient(net, x, net.forward_batch(x));
  CHECK(zero.loss == 0.0);
  CHECK(zero.grad.cwiseAbs().maxCoeff() < 1e-12);

  // single linear neuron: d/d(w, b) (wx + b - y)^2 = 2 (wx + b - y) [x, 1]
  const double w = 0.7, b = -0.2, xv = 1.3, yv = 0.4;
  const DenseNet lin = single_layer(Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Constant(1, b),
                                    Activation::Identity);
  const MseGradient g = mse_gradient(lin, Eigen::MatrixXd::Constant(1, 1, xv), Eigen::MatrixXd::Constant(1, 1, yv));
  const double r = w * xv + b - yv;
  CHECK(g.loss == doctest::Approx(r * r));
  CHECK(g.grad(0) == doctest::Approx(2.0 * r * xv).epsilon(1e-14));
  CHECK(g.grad(1) == doctest::Approx(2.0 * r).epsilon(1e-14));
}

TEST_CASE("gradient matches central differences on random architectures") {
  Rng rng(77);
  const Activation acts[] = {Activation::Tanh, Activation::Identity, Activation::Exp};
  for (int trial = 0; trial < 20; ++trial) {
    const int depth = 1 + static_cast<int>(rng.below(4));
    NetSpec spec;
    for (int l = 0; l + 1 < depth; ++l) spec.hidden.push_back(1 + static_cast<int>(rng.below(16)));
    // stacked exponentials overflow, so Exp appears in at most one hidden layer
    spec.activation = acts[rng.below(depth <= 2 ? 3 : 2)];
    spec.output_activation = acts[rng.below(3)];
    const int in = 1 + static_cast<int>(rng.below(5));
    const int out = 1 + static_cast<int>(rng.below(4));
    DenseNet net = DenseNet::glorot(in, out, spec, rng);
    Eigen::VectorXd theta = net.parameters();
    // move biases off zero so every parameter is exercised
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += rng.uniform(-0.1, 0.1);
    net.set_parameters(theta);
    const Eigen::MatrixXd x = random_matrix(in, 7, rng);
    const Eigen::MatrixXd y = random_matrix(out, 7, rng);
    const MseGradient g = mse_gradient(net, x, y);
    const double h = 1e-6;
    int bad = 0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(i) += h;
      tm(i) -= h;
      net.set_parameters(tp);
      const double lp = mse(net, x, y);
      net.set_parameters(tm);
      const double lm = mse(net, x, y);
      const double fd = (lp - lm) / (2.0 * h);
      if (std::abs(g.grad(i)) > 1e-8) {
        const double rel = std::abs(fd - g.grad(i)) / std::abs(g.grad(i));
        if (rel >= 1e-5) {
          ++bad;
          MESSAGE("trial " << trial << " param " << i << " grad " << g.grad(i) << " fd " << fd);
        }
      }
    }
    net.set_parameters(theta);
    CHECK(bad == 0);
  }
}

TEST_CASE("non-finite activations raise NumericalFailure") {
  const DenseNet ex =
      single_layer(Eigen::MatrixXd::Constant(1, 1, 1000.0), Eigen::VectorXd::Zero(1), Activation::Exp);
  CHECK_THROWS_AS(mse_gradient(ex, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)), NumericalFailure);
}

TEST_CASE("adam examples") {
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const Eigen::VectorXd before = p;
  AdamState s = AdamState::fresh(5);
  adam_step(p, Eigen::VectorXd::Zero(5), s);
  CHECK(p == before);
  CHECK(s.step == 1);

  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState one = AdamState::fresh(1, cfg);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  adam_step(q, Eigen::VectorXd::Ones(1), one);
  CHECK(q(0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(q(0) == doctest::Approx(-0.099999999).epsilon(1e-8));
}

TEST_CASE("adam matches the closed-form update") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    AdamConfig cfg{rng.uniform(1e-4, 1e-1), rng.uniform(0.5, 0.99), rng.uniform(0.9, 0.9999), 1e-8};
    AdamState s = AdamState::fresh(1, cfg);
    s.m(0) = rng.uniform(-1.0, 1.0);
    s.v(0) = rng.uniform(0.0, 2.0);
    s.step = rng.below(50);
    const double g = rng.uniform(-3.0, 3.0);
    const double theta = rng.uniform(-5.0, 5.0);
    const double m = cfg.beta1 * s.m(0) + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * s.v(0) + (1.0 - cfg.beta2) * g * g;
    const double t = static_cast<double>(s.step + 1);
    const double mh = m / (1.0 - std::pow(cfg.beta1, t));
    const double vh = v / (1.0 - std::pow(cfg.beta2, t));
    const double expected = theta - cfg.lr * mh / (std::sqrt(vh) + cfg.epsilon);
    Eigen::VectorXd p = Eigen::VectorXd::Constant(1, theta);
    const std::uint64_t step = s.step;
    adam_step(p, Eigen::VectorXd::Constant(1, g), s);
    CHECK(std::abs(p(0) - expected) < 1e-12);
    CHECK(std::abs(s.m(0) - m) < 1e-15);
    CHECK(std::abs(s.v(0) - v) < 1e-15);
    CHECK(s.step == step + 1);
  }
}

TEST_CASE("training") {
  SUBCASE("y = 2x with one linear neuron") {
    Rng rng(6);
    DenseNet net = DenseNet::glorot(1, 1, NetSpec{{}, Activation::Tanh, Activation::Identity}, rng);
    RegressionData data{Eigen::RowVectorXd::LinSpaced(100, -1.0, 1.0), {}};
    data.targets = 2.0 * data.inputs;
    TrainConfig cfg;
    cfg.epochs = 600;
    cfg.batch_size = 20;
    cfg.lr_schedule = {{0, 2e-2}, {400, 2e-3}};
    const TrainResult res = train(net, data, cfg);
    CHECK(mse(net, data.inputs, data.targets) < 1e-8);
    CHECK(res.history.train.size() == 600);
  }
  SUBCASE("zero epochs leave the net unchanged") {
    Rng rng(6);
    DenseNet net = DenseNet::glorot(2, 1, NetSpec{{4}}, rng);
    const DenseNet before = net;
    TrainConfig cfg;
    cfg.epochs = 0;
    train(net, RegressionData{Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(1, 3)}, cfg);
    CHECK(net == before);
  }
  SUBCASE("seeded runs are identical") {
    auto run = [] {
      Rng rng(12);
      DenseNet net = DenseNet::glorot(1, 1, NetSpec{{8}}, rng);
      RegressionData data{Eigen::RowVectorXd::LinSpaced(64, -2.0, 2.0), {}};
      data.targets = data.inputs.array().sin().matrix();
      TrainConfig cfg;
      cfg.epochs = 30;
      cfg.batch_size = 16;
      cfg.seed = 99;
      cfg.validation_fraction = 0.25;
      const TrainResult res = train(net, data, cfg);
      return std::pair{net, res.history};
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second.train == b.second.train);
    CHECK(a.second.validation == b.second.validation);
    CHECK(a.second.validation.size() == 30);
  }
  SUBCASE("sin(x) smoke fit") {
    Rng rng(21);
    DenseNet net = DenseNet::glorot(1, 1, NetSpec{{20}}, rng);
    RegressionData data{Eigen::RowVectorXd::LinSpaced(500, -M_PI, M_PI), {}};
    data.targets = data.inputs.array().sin().matrix();
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 50;
    cfg.lr_schedule = {{0, 1e-2}};
    train(net, data, cfg);
    CHECK(mse(net, data.inputs, data.targets) < 1e-3);
  }
  SUBCASE("divergence is reported with its epoch") {
    DenseNet net =
        single_layer(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::Exp);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 1;
    RegressionData data{Eigen::MatrixXd::Constant(1, 1, 800.0), Eigen::MatrixXd::Zero(1, 1)};
    try {
      train(net, data, cfg);
      FAIL("expected divergence");
    } catch (const DivergedAtEpoch& e) {
      CHECK(e.epoch() == 0);
    }
  }
  SUBCASE("bad schedules are rejected") {
    TrainConfig cfg;
    cfg.lr_schedule = {{0, 1e-3}, {0, 1e-4}};
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}

TEST_CASE("min-max scaling") {
  Eigen::MatrixXd d(2, 2);
  d << 0, 10, 7, 7;
  MinMaxScaler s;
  const Eigen::MatrixXd t = minmax_fit_transform(d, s);
  CHECK(t(0, 0) == 0.0);
  CHECK(t(0, 1) == 1.0);
  CHECK(t(1, 0) == 0.5);
  CHECK(t(1, 1) == 0.5);

  Rng rng(3);
  const Eigen::MatrixXd x = random_matrix(4, 50, rng, 100.0);
  MinMaxScaler fit;
  const Eigen::MatrixXd xt = minmax_fit_transform(x, fit);
  CHECK(xt.minCoeff() >= 0.0);
  CHECK(xt.maxCoeff() <= 1.0 + 1e-15);
  CHECK((minmax_inverse(xt, fit) - x).cwiseAbs().maxCoeff() < 1e-12 * 100.0);

  const MinMaxScaler iso = MinMaxScaler::fit(x.topRows(2), -1.0, 1.0, true);
  CHECK(iso.gain()(0) == iso.gain()(1));
  const MinMaxScaler id = MinMaxScaler::identity(3);
  CHECK(id.transform(x.topRows(3)) == x.topRows(3));
}

TEST_CASE("network files round-trip bit-faithfully") {
  Rng rng(17);
  const DenseNet net = DenseNet::glorot(3, 2, NetSpec{{7, 5}, Activation::Tanh, Activation::Exp}, rng);
  std::stringstream ss;
  write_net(ss, net);
  TextReader reader(ss);
  const DenseNet back = read_net(reader);
  CHECK(back == net);

  const auto path = std::filesystem::temp_directory_path() / "opnet_test_net.txt";
  save_net(path.string(), net);
  CHECK(load_net(path.string()) == net);
  std::filesystem::remove(path);

  std::stringstream bad("densenet 1 3x2:tanh\nW 1 2 3\n");
  TextReader r2(bad);
  CHECK_THROWS_AS(read_net(r2), ParseError);
}
