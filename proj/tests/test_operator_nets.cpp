#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include "doctest.h"

#include "opnet/cases.hpp"
#include "opnet/deeponet.hpp"
#include "opnet/errors.hpp"
#include "opnet/flex_deeponet.hpp"
#include "opnet/operator_model.hpp"
#include "opnet/rng.hpp"
#include "opnet/svd_deeponet.hpp"

using namespace opnet;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index m, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
  return x;
}

DenseNet constant_net(Eigen::Index in, const Eigen::VectorXd& value) {
  return DenseNet({DenseLayer{Eigen::MatrixXd::Zero(value.size(), in), value, Activation::Identity}});
}

// Small separable grid: value(t, u) = g(t) h(u).
GridData separable_grid(Eigen::Index points, Eigen::Index scenarios, Rng& rng) {
  GridData d;
  d.variables = {"f"};
  d.y = Eigen::RowVectorXd::LinSpaced(points, 0.0, 1.0);
  d.u = random_matrix(1, scenarios, rng, 1.0, 2.0);
  Eigen::MatrixXd v(points, scenarios);
  for (Eigen::Index i = 0; i < points; ++i) {
    for (Eigen::Index j = 0; j < scenarios; ++j) v(i, j) = std::sin(2.0 * d.y(0, i)) * d.u(0, j);
  }
  d.values = {v};
  return d;
}

// Copies `vanilla` into a flex model whose Pre-Net is the identity frame and
// whose centering output reproduces b0.
FlexDeepONet flex_from_vanilla(const VanillaDeepONet& vanilla, const PreNetSpec& prenet_spec, Rng& rng) {
  const Eigen::Index u_dim = vanilla.scaling().u.features();
  const Eigen::Index y_dim = vanilla.scaling().y.features();
  PreNet prenet = PreNet::init(prenet_spec, u_dim, y_dim, vanilla.variables().size(), rng);
  std::vector<FlexHead> heads;
  std::vector<MinMaxScaler> targets;
  for (const auto& h : vanilla.heads()) {
    std::vector<DenseLayer> layers = h.branch.layers();
    DenseLayer& last = layers.back();
    Eigen::MatrixXd w(last.weight.rows() + 1, last.weight.cols());
    w << last.weight, Eigen::RowVectorXd::Zero(last.weight.cols());
    Eigen::VectorXd b(last.bias.size() + 1);
    b << last.bias, h.bias;
    last.weight = w;
    last.bias = b;
    heads.push_back(FlexHead{DenseNet(layers), h.trunk});
    targets.push_back(MinMaxScaler::identity(1));
  }
  return FlexDeepONet(vanilla.variables(), vanilla.scaling(), std::move(prenet), std::move(heads), targets);
}

}  // namespace

TEST_CASE("vanilla forward examples") {
  const OperatorHead head{constant_net(1, Eigen::VectorXd::Constant(1, 2.0)),
                          constant_net(1, Eigen::VectorXd::Constant(1, 3.0)), 1.0};
  const VanillaDeepONet m({"z"}, InputScaling::identity(1, 1), {head});
  CHECK(m.forward(Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 0.7))(0) == 7.0);

  const OperatorHead zero_trunk{constant_net(2, Eigen::Vector2d(4.0, -1.0)), constant_net(1, Eigen::Vector2d::Zero()),
                                -2.5};
  const VanillaDeepONet z({"z"}, InputScaling::identity(2, 1), {zero_trunk});
  Rng rng(1);
  const Eigen::MatrixXd u = random_matrix(2, 5, rng);
  const Eigen::MatrixXd y = random_matrix(1, 5, rng);
  CHECK((z.predict(u, y).array() == -2.5).all());
  CHECK_THROWS_AS(z.forward(Eigen::Vector3d::Zero(), Eigen::VectorXd::Zero(1)), Error);
}

TEST_CASE("vanilla predict_grid agrees with pointwise predict") {
  Rng rng(2);
  InputScaling sc = InputScaling::fit(random_matrix(2, 10, rng), random_matrix(1, 10, rng));
  const VanillaDeepONet m = VanillaDeepONet::init({"x", "v"}, 2, 1, VanillaSpec{3, {{8}}, {{8}}}, sc, 4);
  const Eigen::MatrixXd u = random_matrix(2, 4, rng);
  const Eigen::MatrixXd y = random_matrix(1, 6, rng);
  const Eigen::MatrixXd grid = m.predict_grid(1, u, y);
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK(std::abs(grid(i, j) - m.forward(u.col(j), y.col(i))(1)) < 1e-13);
    }
  }
  CHECK(m.param_count() == 2 * (param_count(2, 3, NetSpec{{8}}) + param_count(1, 3, NetSpec{{8}}) + 1));
}

TEST_CASE("vanilla fit learns a constant operator") {
  GridData d;
  d.variables = {"c"};
  d.u = Eigen::RowVectorXd::LinSpaced(6, 0.0, 1.0);
  d.y = Eigen::RowVectorXd::LinSpaced(20, 0.0, 5.0);
  d.values = {Eigen::MatrixXd::Constant(20, 6, 5.0)};
  TrainConfig cfg;
  cfg.epochs = 1500;
  cfg.batch_size = 3;
  cfg.lr_schedule = {{0, 2e-3}};
  const auto fit = vanilla_fit(d, VanillaSpec{2, {{8}}, {{8}}}, cfg);
  CHECK((fit.model.predict_grid(0, d.u, d.y).array() - 5.0).abs().maxCoeff() < 1e-3);

  const auto again = vanilla_fit(d, VanillaSpec{2, {{8}}, {{8}}}, cfg);
  CHECK(again.model.heads()[0].branch == fit.model.heads()[0].branch);
  CHECK(again.model.heads()[0].trunk == fit.model.heads()[0].trunk);

  const auto pts = vanilla_fit(d.flatten(), VanillaSpec{2, {{8}}, {{8}}}, cfg);
  CHECK((pts.model.predict_grid(0, d.u, d.y).array() - 5.0).abs().maxCoeff() < 1e-3);
}

TEST_CASE("POD-DeepONet keeps its trunk frozen and fits separable data") {
  Rng rng(5);
  const GridData d = separable_grid(40, 25, rng);
  TrainConfig trunk_cfg;
  trunk_cfg.epochs = 40000;
  trunk_cfg.batch_size = 10;
  trunk_cfg.lr_schedule = {{0, 1e-2}, {15000, 2e-3}, {30000, 3e-4}};
  TrainConfig branch_cfg;
  branch_cfg.epochs = 10000;
  branch_cfg.batch_size = 5;
  branch_cfg.lr_schedule = {{0, 5e-3}, {5000, 1e-3}, {8000, 2e-4}};
  const PodSpec spec{1, {{16}}, {{16}}};
  auto stage = pod_fit_trunks(d, spec, trunk_cfg);
  const Eigen::VectorXd trunk_before = stage.model.heads()[0].trunk.parameters();
  const Eigen::VectorXd branch_before = stage.model.heads()[0].branch.parameters();
  const auto branch_runs = fit_branches(stage.model, d, branch_cfg);
  MESSAGE("trunk loss " << stage.runs[0].history.train.back() << " branch loss " << branch_runs[0].history.train.back());
  CHECK(stage.model.heads()[0].trunk.parameters() == trunk_before);
  CHECK(stage.model.heads()[0].branch.parameters() != branch_before);

  Rng test_rng(6);
  const GridData test = separable_grid(40, 10, test_rng);
  const Eigen::MatrixXd pred = stage.model.predict_grid(0, test.u, test.y);
  const double rmse = std::sqrt((pred - test.values[0]).squaredNorm() / static_cast<double>(pred.size()));
  MESSAGE("separable POD test RMSE " << rmse);
  CHECK(rmse < 1e-3);

  PodSpec too_big = spec;
  too_big.r = 41;
  CHECK_THROWS_AS(pod_fit_trunks(d, too_big, trunk_cfg), Error);
}

TEST_CASE("POD-DeepONet on snapshot matrices requires a grid") {
  Rng rng(7);
  Eigen::MatrixXd values = random_matrix(5, 4, rng);
  const SnapshotMatrix time_agg(values, Aggregation::TimeAggregated, Eigen::RowVectorXd::LinSpaced(5, 0, 1).transpose(),
                                Eigen::RowVectorXd::LinSpaced(4, 0, 1).transpose());
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(pod_deeponet_fit(time_agg, 1, PodSpec{}, cfg, cfg), Error);
}

TEST_CASE("SVD composition reproduces the reconstruction") {
  Eigen::VectorXd phi(2);
  phi << 0.5, -2.0;
  Eigen::VectorXd out(4);
  out << 3.0, 1.0, 0.0, 1.0;
  CHECK(svd_compose(phi, out) == doctest::Approx(phi.dot(out.head(2))));
  out << 0.0, 0.0, 4.25, 3.0;
  CHECK(svd_compose(phi, out) == 4.25);
  CHECK_THROWS_AS(svd_compose(phi, Eigen::VectorXd::Zero(3)), Error);

  Tc1Options opt;
  opt.scenarios = 30;
  opt.times = 120;
  const GridData d = tc1_scenarios(opt, 9).to_grid();
  for (const auto& groups : {std::vector<std::vector<std::size_t>>{}, std::vector<std::vector<std::size_t>>{{0, 1}}}) {
    for (int r : {2, 5}) {
      SvdSpec spec;
      spec.r = r;
      spec.shared_groups = groups;
      for (const auto& t : svd_targets(d, spec)) {
        const Eigen::MatrixXd rec =
            reconstruct(t.phi, principal_directions(t.decomposition), t.preprocessing);
        const Eigen::Index s = d.scenarios();
        for (std::size_t k = 0; k < t.variables.size(); ++k) {
          const Eigen::MatrixXd composed = svd_compose_grid(t.phi, t.b[k]);
          const Eigen::MatrixXd ref = rec.middleCols(static_cast<Eigen::Index>(k) * s, s);
          CHECK((composed - ref).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + ref.cwiseAbs().maxCoeff()));
          if (r == 5 && groups.empty()) {
            CHECK(relative_error(d.values[t.variables[k]], composed) < 1e-6);
          }
        }
      }
    }
  }
}

TEST_CASE("SVD-DeepONet assembly") {
  Rng rng(10);
  const GridData d = separable_grid(30, 20, rng);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 10;
  SvdSpec spec;
  spec.r = 1;
  spec.trunk = {{8}};
  spec.branch = {{8}};
  const auto fit = svd_deeponet_fit(d, spec, cfg, cfg);
  const SvdDeepONet& m = fit.model;
  const Eigen::MatrixXd grid = m.predict_grid(0, d.u, d.y);
  for (Eigen::Index j = 0; j < d.scenarios(); j += 7) {
    for (Eigen::Index i = 0; i < d.points(); i += 5) {
      CHECK(std::abs(grid(i, j) - m.forward(d.u.col(j), d.y.col(i))(0)) < 1e-12);
    }
  }
  CHECK(m.branches()[0].net.output_dim() == 3);
  CHECK(m.param_count() == param_count(1, 1, spec.trunk) + param_count(1, 3, spec.branch));
  const auto again = svd_deeponet_fit(d, spec, cfg, cfg);
  CHECK(again.model.predict_grid(0, d.u, d.y) == grid);
}

TEST_CASE("prenet_transform examples") {
  Frame id;
  id.shift = Eigen::Vector2d::Zero();
  const Eigen::Vector2d y(0.3, -1.2);
  CHECK(prenet_transform(id, y) == y);

  Frame quarter;
  quarter.angle = M_PI / 2.0;
  quarter.shift = Eigen::Vector2d::Zero();
  const Eigen::VectorXd q = prenet_transform(quarter, Eigen::Vector2d(1.0, 0.0));
  CHECK(std::abs(q(0)) < 1e-15);
  CHECK(q(1) == doctest::Approx(1.0));

  Frame one;
  one.scale = 2.0;
  one.shift = Eigen::VectorXd::Constant(1, -3.0);
  CHECK(prenet_transform(one, Eigen::VectorXd::Constant(1, 5.0))(0) == 7.0);

  CHECK_THROWS_AS(rotation_matrix(0.1, 3), Error);
  CHECK(rotation_matrix(1.3, 1) == Eigen::MatrixXd::Identity(1, 1));
}

TEST_CASE("rotation matrices are orthogonal") {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::MatrixXd r = rotation_matrix(rng.uniform(-10.0, 10.0), 2);
    CHECK((r.transpose() * r - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("flex with an identity Pre-Net reduces to vanilla") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index u_dim = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Eigen::Index y_dim = 1 + static_cast<Eigen::Index>(rng.below(2));
    const int p = 1 + static_cast<int>(rng.below(4));
    const InputScaling sc = InputScaling::fit(random_matrix(u_dim, 20, rng, -3, 3), random_matrix(y_dim, 20, rng, 0, 9));
    VanillaDeepONet v = VanillaDeepONet::init({"a", "b"}, u_dim, y_dim, VanillaSpec{p, {{6, 5}}, {{7}}}, sc, trial);
    v.head(0).bias = 0.37;
    v.head(1).bias = -1.5;
    PreNetSpec pre;
    pre.stretch = true;
    pre.rotate = y_dim == 2;
    pre.shift = true;
    pre.separate_nets = trial % 2 == 0;
    const FlexDeepONet f = flex_from_vanilla(v, pre, rng);
    const Eigen::MatrixXd u = random_matrix(u_dim, 50, rng, -3, 3);
    const Eigen::MatrixXd y = random_matrix(y_dim, 50, rng, 0, 9);
    const Eigen::MatrixXd a = v.predict(u, y);
    const Eigen::MatrixXd b = f.predict(u, y);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + a.cwiseAbs().maxCoeff()));

    const AlignmentReport rep = alignment_diagnostics(f, u.leftCols(5), y.leftCols(3), 1);
    for (const auto& row : rep.rows) {
      CHECK(row.frame.scale == 1.0);
      CHECK(row.frame.angle == 0.0);
      CHECK(row.frame.shift.isZero());
    }
  }
}

TEST_CASE("flex gradient matches central differences") {
  struct Case {
    const char* name;
    Eigen::Index u_dim, y_dim;
    std::size_t nvar;
    PreNetSpec pre;
  };
  PreNetSpec full;
  full.stretch = full.rotate = full.shift = true;
  full.net = {{5}};
  PreNetSpec joint = full;
  joint.separate_nets = false;
  PreNetSpec shift1;
  shift1.net = {{}};
  PreNetSpec stretch_shared;
  stretch_shared.stretch = true;
  stretch_shared.shift = false;
  stretch_shared.separate_nets = false;
  stretch_shared.per_variable_stretch = true;
  stretch_shared.net = {{4}};
  const Case cases[] = {{"stretch+rotate+shift, separate nets", 1, 2, 1, full},
                        {"stretch+rotate+shift, one net", 2, 2, 2, joint},
                        {"shift only, linear", 1, 1, 1, shift1},
                        {"shared stretch-only Pre-Net", 3, 1, 3, stretch_shared}};
  Rng rng(15);
  for (const auto& c : cases) {
    CAPTURE(c.name);
    FlexSpec spec;
    spec.p = 2;
    spec.branch = {{4}};
    spec.trunk = {{5}, Activation::Tanh, Activation::Exp};
    spec.prenet = c.pre;
    std::vector<std::string> vars;
    for (std::size_t v = 0; v < c.nvar; ++v) vars.push_back("v" + std::to_string(v));
    FlexDeepONet m = FlexDeepONet::init(vars, c.u_dim, c.y_dim, spec, InputScaling::identity(c.u_dim, c.y_dim),
                                        std::vector<MinMaxScaler>(c.nvar, MinMaxScaler::identity(1)), 3);
    Eigen::VectorXd theta = m.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += rng.uniform(-0.3, 0.3);
    m.set_parameters(theta);
    CHECK(static_cast<std::size_t>(theta.size()) == m.param_count());
    const Eigen::MatrixXd us = random_matrix(c.u_dim, 9, rng);
    const Eigen::MatrixXd ys = random_matrix(c.y_dim, 9, rng);
    const Eigen::MatrixXd targets = random_matrix(static_cast<Eigen::Index>(c.nvar), 9, rng);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    const double loss = m.loss_and_grad(us, ys, targets, &grad);
    CHECK(loss == doctest::Approx(m.loss_and_grad(us, ys, targets, nullptr)));
    const double h = 1e-6;
    int bad = 0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(i) += h;
      tm(i) -= h;
      m.set_parameters(tp);
      const double lp = m.loss_and_grad(us, ys, targets, nullptr);
      m.set_parameters(tm);
      const double lm = m.loss_and_grad(us, ys, targets, nullptr);
      const double fd = (lp - lm) / (2.0 * h);
      if (std::abs(grad(i)) > 1e-8 && std::abs(fd - grad(i)) / std::abs(grad(i)) >= 1e-5) {
        ++bad;
        MESSAGE("param " << i << " grad " << grad(i) << " fd " << fd);
      }
    }
    m.set_parameters(theta);
    CHECK(bad == 0);
  }
}

TEST_CASE("shared stretch-only Pre-Net applies one stretch per variable") {
  PreNetSpec pre;
  pre.stretch = true;
  pre.shift = false;
  pre.separate_nets = false;
  pre.per_variable_stretch = true;
  Rng rng(16);
  PreNet net = PreNet::init(pre, 2, 1, 3, rng);
  CHECK(net.layout().stretches == 3);
  CHECK(net.layout().shifts == 0);
  CHECK(net.nets().size() == 1);
  auto& last = net.nets()[0].layer(net.nets()[0].depth() - 1);
  last.bias << std::log(2.0), 0.0, std::log(0.5);
  const Eigen::VectorXd raw = net.raw(Eigen::Vector2d(0.1, 0.2)).col(0);
  CHECK(net.frame(raw, 0, 1).scale == doctest::Approx(2.0));
  CHECK(net.frame(raw, 1, 1).scale == doctest::Approx(1.0));
  CHECK(net.frame(raw, 2, 1).scale == doctest::Approx(0.5));
}

TEST_CASE("flex fit is deterministic and learns the shifted tanh") {
  Tc2Options opt;
  opt.scenarios = 20;
  opt.times = 100;
  const PointData d = tc2_scenarios(opt, 3).to_points();
  FlexSpec spec;
  spec.p = 1;
  spec.branch = {{}};
  spec.trunk = {{4}};
  spec.prenet.net = {{}};
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 64;
  cfg.lr_schedule = {{0, 1e-2}};
  const auto a = flex_fit(d, spec, cfg);
  const auto b = flex_fit(d, spec, cfg);
  CHECK(a.model.parameters() == b.model.parameters());
  CHECK(a.runs[0].history.train.back() < a.runs[0].history.train.front());
}

TEST_CASE("curve spread") {
  Eigen::MatrixXd t(3, 2), v(3, 2);
  t << 0, 0, 1, 1, 2, 2;
  v << 0, 0, 1, 1, 2, 2;
  CHECK(curve_spread(t, v) == doctest::Approx(0.0));
  v.col(1).array() += 2.0;
  CHECK(curve_spread(t, v) == doctest::Approx(1.0));
}

TEST_CASE("model files round-trip for every variant") {
  Rng rng(20);
  const InputScaling sc = InputScaling::fit(random_matrix(2, 10, rng), random_matrix(2, 10, rng));
  const Eigen::MatrixXd u = random_matrix(2, 30, rng);
  const Eigen::MatrixXd y = random_matrix(2, 30, rng);

  auto round_trip = [&](const OperatorModel& m) {
    std::stringstream ss;
    write_model(ss, m);
    const OperatorModel back = read_model(ss);
    CHECK(back.variant == m.variant);
    CHECK(back.case_id == m.case_id);
    CHECK(back.variables() == m.variables());
    CHECK(back.p() == m.p());
    CHECK(back.param_count() == m.param_count());
    CHECK(back.predict(u, y) == m.predict(u, y));
    std::stringstream again;
    write_model(again, back);
    std::stringstream first;
    write_model(first, m);
    CHECK(again.str() == first.str());
  };

  round_trip({Variant::Vanilla, "tc9",
              VanillaDeepONet::init({"a", "b"}, 2, 2, VanillaSpec{3, {{4}}, {{5}}}, sc, 1)});
  round_trip({Variant::Pod, "", VanillaDeepONet::init({"a"}, 2, 2, VanillaSpec{2, {{4}}, {{5}}}, sc, 2)});

  FlexSpec fs;
  fs.prenet.stretch = fs.prenet.rotate = true;
  fs.branch = {{3}};
  fs.trunk = {{3}, Activation::Tanh, Activation::Exp};
  FlexDeepONet flex = FlexDeepONet::init({"z"}, 2, 2, fs, sc, {MinMaxScaler::fit(random_matrix(1, 5, rng), -1, 1)}, 3);
  Eigen::VectorXd th = flex.parameters();
  for (Eigen::Index i = 0; i < th.size(); ++i) th(i) += rng.uniform(-0.2, 0.2);
  flex.set_parameters(th);
  round_trip({Variant::Flex, "tc4", flex});

  GridData g;
  g.variables = {"x", "v"};
  g.u = random_matrix(2, 8, rng);
  g.y = random_matrix(2, 12, rng);
  g.values = {random_matrix(12, 8, rng), random_matrix(12, 8, rng)};
  TrainConfig cfg;
  cfg.epochs = 2;
  SvdSpec ss;
  ss.r = 2;
  ss.trunk = {{4}};
  ss.branch = {{4}};
  round_trip({Variant::Svd, "tc1", svd_deeponet_fit(g, ss, cfg, cfg).model});
  ss.shared_groups = {{0, 1}};
  round_trip({Variant::Svd, "tc1", svd_deeponet_fit(g, ss, cfg, cfg).model});

  std::stringstream broken("opnet-model 1\nvariant vanilla\ncase tc1\nvariables 1 x\np nope\n");
  CHECK_THROWS_AS(read_model(broken), ParseError);
  std::stringstream wrong("opnet-model 7\n");
  CHECK_THROWS_AS(read_model(wrong), Error);
}
