#include "infograd/tape.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace infograd;
namespace t = infograd::testing;

TEST(Tape, OutputMatchesBatch) {
  const auto c = t::multipath(0.4, -1.2);
  const auto batch = sample_dag(c.spec, c.params, 20, 1);
  const auto tape = Tape::record(c.spec, c.params, batch);
  EXPECT_EQ(tape.output(), batch.y);
}

TEST(Tape, ParamKeys) {
  const auto c = t::multipath();
  const auto tape = Tape::record(c.spec, c.params, sample_dag(c.spec, c.params, 4, 0));
  EXPECT_EQ(tape.param_keys(), (std::vector<std::string>{"eta1", "eta2"}));

  DagSpec bare;
  bare.nodes = {t::input_node("x"), t::node("y", {"x"}, FuncKind::weighted_sum, std::nullopt, 1.0)};
  bare.input_ids = {"x"};
  bare.output_ids = {"y"};
  const ParamStore none;
  const auto tape2 = Tape::record(bare, none, sample_dag(bare, none, 4, 0));
  EXPECT_TRUE(tape2.param_keys().empty());
  EXPECT_TRUE(tape2.vjp(MatrixXd::Ones(1, 4)).per_sample.empty());
}

TEST(Vjp, ScalarChannel) {
  const auto c = t::scalar_channel(0.8);
  const auto batch = forward_sample(c.spec, c.params, MatrixXd::Constant(1, 1, 3.0), 0);
  const auto r = Tape::record(c.spec, c.params, batch).vjp(MatrixXd::Ones(1, 1));
  EXPECT_DOUBLE_EQ(r.per_sample.at("eta")(0, 0), 3.0);
}

TEST(Vjp, MultipathJacobians) {
  const double eta2 = 1.7;
  const auto c = t::multipath(0.3, eta2);
  const auto batch = sample_dag(c.spec, c.params, 50, 4);
  const auto r = Tape::record(c.spec, c.params, batch).vjp(MatrixXd::Ones(1, 50));
  for (Index b = 0; b < 50; ++b) {
    EXPECT_NEAR(r.per_sample.at("eta1")(0, b), eta2 * batch.x(0, b), 1e-14);
    EXPECT_NEAR(r.per_sample.at("eta2")(0, b), batch.value("v1")(0, b), 1e-14);
  }
}

TEST(Vjp, LinearInCotangent) {
  const auto c = t::multipath();
  const auto batch = sample_dag(c.spec, c.params, 30, 2);
  const auto tape = Tape::record(c.spec, c.params, batch);
  const auto zero = tape.vjp(MatrixXd::Zero(1, 30));
  for (const auto& [key, m] : zero.per_sample) EXPECT_TRUE(m.isZero(0.0)) << key;

  const MatrixXd v = MatrixXd::Random(1, 30);
  const auto one = tape.vjp(v);
  const auto three = tape.vjp(3.0 * v);
  for (const auto& [key, m] : one.per_sample) EXPECT_TRUE(three.per_sample.at(key).isApprox(3.0 * m));
}

TEST(Vjp, CotangentShapeChecked) {
  const auto c = t::multipath();
  const auto tape = Tape::record(c.spec, c.params, sample_dag(c.spec, c.params, 5, 0));
  EXPECT_THROW(tape.vjp(MatrixXd::Ones(2, 5)), Error);
  EXPECT_THROW(tape.vjp(MatrixXd::Ones(1, 4)), Error);
}

TEST(FiniteDiff, LinearDagMatchesVjp) {
  const auto c = t::multipath(0.5, -0.9);
  const auto batch = sample_dag(c.spec, c.params, 40, 8);
  const MatrixXd v = MatrixXd::Random(1, 40);
  const auto exact = Tape::record(c.spec, c.params, batch).vjp(v);
  const auto fd = finite_diff_vjp(c.spec, c.params, batch, v, 1e-4);
  for (const auto& [key, m] : exact.per_sample) EXPECT_LT((fd.per_sample.at(key) - m).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FiniteDiff, TanhAtZero) {
  const auto c = t::tanh_channel(0.0);
  const auto batch = forward_sample(c.spec, c.params, MatrixXd::Ones(1, 1), 0);
  const auto fd = finite_diff_vjp(c.spec, c.params, batch, MatrixXd::Ones(1, 1), 1e-5);
  EXPECT_NEAR(fd.per_sample.at("eta")(0, 0), 1.0, 1e-9);
  const auto exact = Tape::record(c.spec, c.params, batch).vjp(MatrixXd::Ones(1, 1));
  EXPECT_DOUBLE_EQ(exact.per_sample.at("eta")(0, 0), 1.0);
}

TEST(Vjp, NonlinearRegistryAgainstFiniteDiff) {
  // x1, x2 -> a = tanh(e1 x1) -> b = affine(a) ; c = sqrt(p) x2 ; m = mlp(b, c) ; y = w1 b + w2 m
  DagConfig c;
  NodeSpec mlp = t::node("m", {"b", "c"}, FuncKind::mlp, "net", 0.3);
  mlp.hidden = {5, 4};
  NodeSpec y = t::node("y", {"b", "m"}, FuncKind::weighted_sum, "w", 0.2);
  c.spec.nodes = {t::input_node("x1"),
                  t::input_node("x2"),
                  t::node("a", {"x1"}, FuncKind::tanh_gain, "e1", 0.1),
                  t::node("b", {"a"}, FuncKind::affine, "aff", 0.0),
                  t::node("c", {"x2"}, FuncKind::sqrt_gain, "p", 0.5),
                  mlp,
                  y};
  c.spec.input_ids = {"x1", "x2"};
  c.spec.output_ids = {"y"};
  c.params.set("e1", 0.7);
  c.params.set("aff", (VectorXd(2) << 1.3, -0.4).finished());
  c.params.set("p", 2.0);
  c.params.set("w", (VectorXd(2) << 0.6, -1.1).finished());
  const Index n = Mlp<double>::param_count_for({2, 5, 4, 1});
  c.params.set("net", 0.5 * VectorXd::Random(n));

  const auto batch = sample_dag(c.spec, c.params, 12, 3);
  const MatrixXd v = MatrixXd::Random(1, 12);
  const auto exact = Tape::record(c.spec, c.params, batch).vjp(v);
  const auto fd = finite_diff_vjp(c.spec, c.params, batch, v, 1e-5);
  ASSERT_EQ(exact.per_sample.size(), 5u);
  for (const auto& [key, m] : exact.per_sample) {
    const MatrixXd& f = fd.per_sample.at(key);
    ASSERT_EQ(f.rows(), m.rows()) << key;
    for (Index i = 0; i < m.size(); ++i) {
      EXPECT_LE(std::abs(f.data()[i] - m.data()[i]), 1e-6 * std::max(1.0, std::abs(m.data()[i]))) << key;
    }
  }
}

TEST(Vjp, MeanAveragesSamples) {
  const auto c = t::scalar_channel();
  const MatrixXd x = (MatrixXd(1, 4) << 1.0, 2.0, 3.0, 6.0).finished();
  const auto batch = forward_sample(c.spec, c.params, x, 0);
  const auto r = Tape::record(c.spec, c.params, batch).vjp(MatrixXd::Ones(1, 4));
  EXPECT_DOUBLE_EQ(r.mean("eta")(0), 3.0);
  EXPECT_DOUBLE_EQ(r.mean().at("eta")(0), 3.0);
}
