#include "fmsolve/analysis.hpp"
#include "fmsolve/cfm.hpp"

#include <cmath>
#include <cstring>

#include <doctest.h>

using namespace fmsolve;
using namespace fmsolve::cfm;

namespace {

TrainConfig small_config(data::DatasetKind kind, int epochs) {
  TrainConfig c;
  c.dataset.kind = kind;
  c.dataset.n = 512;
  c.epochs = epochs;
  c.batch_size = 64;
  c.mlp.hidden = 32;
  c.mlp.n_blocks = 2;
  c.mlp.time_embed_dim = 16;
  c.seed = 5;
  return c;
}

FlowModel zero_model(int dim) {
  nn::MlpConfig cfg;
  cfg.data_dim = dim;
  cfg.hidden = 8;
  cfg.n_blocks = 1;
  cfg.time_embed_dim = 4;
  Rng rng(0);
  FlowModel m{nn::init_params(cfg, rng), Standardizer::identity(dim)};
  return m;
}

}  // namespace

TEST_CASE("batch identities") {
  Rng rng(1);
  const PointBatch x1 = gaussian_sample(rng, 300, 2) * 3.0;
  const CfmBatch b = make_batch(x1, rng);
  CHECK(b.x1 == x1);
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    CHECK(b.t(i) >= 0.0);
    CHECK(b.t(i) <= 1.0);
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(b.x_t(i, j) == (1.0 - b.t(i)) * b.x0(i, j) + b.t(i) * b.x1(i, j));
      CHECK(b.u_t(i, j) == b.x1(i, j) - b.x0(i, j));
      CHECK(std::abs(b.u_t(i, j) + b.x0(i, j) - b.x1(i, j)) <= 1e-15 * (1 + std::abs(b.x1(i, j))));
    }
  }
  const PointBatch ds = gaussian_sample(rng, 50, 2);
  const CfmBatch c = make_batch(ds, rng, 17);
  CHECK(c.x1.rows() == 17);
  CHECK(c.t.size() == 17);
  for (Eigen::Index i = 0; i < 17; ++i) {
    bool found = false;
    for (Eigen::Index k = 0; k < ds.rows() && !found; ++k) {
      found = c.x1.row(i) == ds.row(k);
    }
    CHECK(found);
  }
  CHECK_THROWS_AS(make_batch(ds, rng, 0), ConfigError);
}

TEST_CASE("standardizer round trip") {
  Rng rng(2);
  PointBatch x = gaussian_sample(rng, 1000, 3);
  x.col(0) = x.col(0) * 4.0 + Eigen::VectorXd::Constant(1000, 2.0);
  x.col(2).setConstant(7.0);
  const Standardizer s = Standardizer::fit(x);
  const PointBatch z = s.apply(x);
  CHECK(std::abs(z.col(0).mean()) < 1e-12);
  CHECK(std::abs(std::sqrt(z.col(0).squaredNorm() / 1000.0) - 1.0) < 1e-12);
  CHECK(s.scale(2) == 1.0);
  CHECK((s.invert(z) - x).cwiseAbs().maxCoeff() < 1e-12);
  const Standardizer id = Standardizer::identity(3);
  CHECK(id.apply(x) == x);
}

TEST_CASE("train config validation") {
  TrainConfig c = small_config(data::DatasetKind::moons, 1);
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train(c), ConfigError);
  c = small_config(data::DatasetKind::moons, 1);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(data::DatasetKind::moons, 1);
  c.mlp.data_dim = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const TrainConfig c = small_config(data::DatasetKind::moons, 30);
  int calls = 0;
  const TrainResult a = train(c, [&](int, double) { ++calls; });
  const TrainResult b = train(c);
  CHECK(calls == 30);
  REQUIRE(a.loss_curve.size() == 30);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.model.params.w_out == b.model.params.w_out);
  CHECK(a.loss_curve.back() < a.loss_curve.front());
  CHECK(a.model.norm.mean.size() == 2);

  TrainConfig other = c;
  other.seed = 6;
  CHECK(train(other).loss_curve != a.loss_curve);
}

TEST_CASE("solver spec") {
  CHECK(SolverSpec::fixed(ode::Method::rk4, 20).label() == "rk4-20");
  CHECK(SolverSpec::adaptive(1e-5, 1e-5).label() == "dopri5");
  CHECK(SolverSpec::adaptive(1e-5, 1e-5).is_adaptive());
  CHECK_THROWS_AS(SolverSpec::fixed(ode::Method::euler, 0).validate(), ConfigError);
  CHECK_THROWS_AS(SolverSpec::adaptive(0.0, 1e-5).validate(), ConfigError);
}

TEST_CASE("sampling NFE follows the stage count") {
  const FlowModel m = zero_model(2);
  Rng rng(3);
  CHECK(sample(m, SolverSpec::fixed(ode::Method::euler, 200), 2000, rng).trace.nfe_total == 200);
  CHECK(sample(m, SolverSpec::fixed(ode::Method::rk4, 20), 2000, rng).trace.nfe_total == 80);
  CHECK(sample(m, SolverSpec::fixed(ode::Method::midpoint, 7), 10, rng).trace.nfe_total == 14);
  CHECK_THROWS_AS(sample(m, SolverSpec::fixed(ode::Method::rk4, 20), 0, rng), ConfigError);
}

TEST_CASE("zero field is the identity flow") {
  FlowModel m = zero_model(2);
  m.norm.mean = Eigen::RowVector2d(1.0, -2.0);
  m.norm.scale = Eigen::RowVector2d(0.5, 3.0);
  Rng a(4);
  Rng b(4);
  const SampleResult s = sample(m, SolverSpec::adaptive(1e-5, 1e-5), 100, a);
  const PointBatch z = gaussian_sample(b, 100, 2);
  CHECK((s.points - m.norm.invert(z)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling is deterministic") {
  const TrainResult r = train(small_config(data::DatasetKind::circles, 3));
  Rng a(8);
  Rng b(8);
  const SampleResult x = sample(r.model, SolverSpec::fixed(ode::Method::midpoint, 10), 64, a);
  const SampleResult y = sample(r.model, SolverSpec::fixed(ode::Method::midpoint, 10), 64, b);
  CHECK(std::memcmp(x.points.data(), y.points.data(), sizeof(double) * x.points.size()) == 0);
}

TEST_CASE("velocity field wraps the network as a flat batch") {
  const TrainResult r = train(small_config(data::DatasetKind::moons, 2));
  ode::VectorFieldHandle f = velocity_field(r.model.params, 3);
  Rng rng(9);
  const PointBatch x = gaussian_sample(rng, 3, 2);
  const StateVector flat = Eigen::Map<const StateVector>(x.data(), 6);
  const StateVector v = f.eval(0.4, flat);
  const PointBatch expected = nn::forward(r.model.params, x, nn::Vector::Constant(3, 0.4));
  CHECK(f.nfe() == 1);
  CHECK((Eigen::Map<const PointBatch>(v.data(), 3, 2) - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(f.eval(0.4, StateVector::Zero(5)), ConfigError);
}

TEST_CASE("gaussian data stays gaussian") {
  // A large dataset and a small learning rate keep the finite-sample and
  // optimizer noise below the two-batch baseline.
  TrainConfig c = small_config(data::DatasetKind::gaussian_nd, 100);
  c.dataset.n = 20000;
  c.dataset.dim = 2;
  c.batch_size = 2000;
  c.lr = 1e-4;
  c.mlp.n_blocks = 1;
  const TrainResult r = train(c);
  Rng rng(10);
  const PointBatch samples =
      sample(r.model, SolverSpec::fixed(ode::Method::rk4, 10), 2000, rng).points;
  const PointBatch g1 = gaussian_sample(rng, 2000, 2);
  const PointBatch g2 = gaussian_sample(rng, 2000, 2);
  Rng p1(11);
  Rng p2(11);
  const double learned = analysis::swd(samples, g1, 200, p1);
  const double baseline = analysis::swd(g2, g1, 200, p2);
  CHECK(learned < 1.5 * baseline);
}
