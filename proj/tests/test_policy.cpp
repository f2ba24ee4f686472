#include <cmath>
#include <vector>

#include <doctest.h>

#include "efish/errors.hpp"
#include "efish/policy.hpp"
#include "efish/rng.hpp"

using namespace efish;

namespace {

// Fills a sequence batch with reproducible pseudo-random contents.
SequenceBatch random_batch(int T, int D, int B, int H, Rng& rng) {
  SequenceBatch b;
  b.h0 = MatrixXd::Zero(H, B);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < B; ++j) b.h0(i, j) = rng.uniform(-0.5, 0.5);
  for (int t = 0; t < T; ++t) {
    MatrixXd x(D, B), u(2, B), bits(2, B);
    RowVectorXd done = RowVectorXd::Zero(B);
    for (int j = 0; j < B; ++j) {
      for (int i = 0; i < D; ++i) x(i, j) = rng.uniform(-1.0, 1.0);
      for (int i = 0; i < 2; ++i) u(i, j) = rng.uniform(-1.5, 1.5);
      for (int i = 0; i < 2; ++i) bits(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    b.x.push_back(x);
    b.u.push_back(u);
    b.bits.push_back(bits);
    b.done.push_back(done);
  }
  return b;
}

double seq_loss(const PolicyParams& p, const SequenceBatch& batch, const MatrixXd& wl,
                const MatrixXd& wv, const MatrixXd& we) {
  const auto ev = evaluate_sequence(p, batch);
  return (wl.cwiseProduct(ev.logp) + wv.cwiseProduct(ev.value) +
          we.cwiseProduct(ev.entropy))
      .sum();
}

}  // namespace

TEST_CASE("zero parameters: half-life recurrence, neutral heads, zero value") {
  const auto p = PolicyParams::zeros(6, 4);
  MatrixXd x = MatrixXd::Constant(6, 2, 0.7);
  MatrixXd h(4, 2);
  h << 0.8, -0.2, 0.1, 0.4, -0.6, 0.0, 0.3, 1.0;
  const auto out = policy_forward(p, x, h);
  // z = r = sigmoid(0) = 1/2 and the candidate is tanh(0) = 0, so the new
  // hidden state is exactly half the old one.
  CHECK(out.h == 0.5 * h);
  CHECK(out.heads == MatrixXd::Zero(4, 2));
  CHECK(out.value == RowVectorXd::Zero(2));
}

TEST_CASE("gate algebra: saturated update gate writes tanh(bh) exactly") {
  auto p = PolicyParams::zeros(3, 5);
  p.bz.setConstant(100.0);  // sigmoid(100) == 1.0 in double
  p.bh << 0.3, -1.2, 0.0, 2.0, -0.4;
  const VectorXd x = VectorXd::Constant(3, 0.9);
  const VectorXd h = VectorXd::Constant(5, -0.7);
  const VectorXd h2 = gru_step(p, x, h);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(h2[i] - std::tanh(p.bh[i])) <= 1e-15);
}

TEST_CASE("forward pass is pure and bounded") {
  Rng rng(301);
  const auto p = PolicyParams::init(7, 8, rng);
  MatrixXd x(7, 3), h(8, 3);
  for (int i = 0; i < x.size(); ++i) x(i % 7, i / 7) = rng.uniform(-2.0, 2.0);
  for (int i = 0; i < h.size(); ++i) h(i % 8, i / 8) = rng.uniform(-1.0, 1.0);
  const auto a = policy_forward(p, x, h);
  const auto b = policy_forward(p, x, h);
  CHECK(a.heads == b.heads);
  CHECK(a.value == b.value);
  CHECK(a.h == b.h);
  // GRU output is a convex blend of tanh values: |h| stays below 1.
  CHECK(a.h.cwiseAbs().maxCoeff() < 1.0);
  CHECK(a.heads.allFinite());
}

TEST_CASE("forward pass rejects shape mismatches and non-finite input") {
  Rng rng(302);
  const auto p = PolicyParams::init(4, 6, rng);
  CHECK_THROWS_AS(policy_forward(p, MatrixXd::Zero(5, 1), MatrixXd::Zero(6, 1)),
                  ContractError);
  CHECK_THROWS_AS(policy_forward(p, MatrixXd::Zero(4, 2), MatrixXd::Zero(6, 1)),
                  ContractError);
  MatrixXd bad = MatrixXd::Zero(4, 1);
  bad(2, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(policy_forward(p, bad, MatrixXd::Zero(6, 1)), ContractError);
}

TEST_CASE("actor and critic paths are separate") {
  Rng rng(303);
  const auto base = PolicyParams::init(5, 8, rng);
  MatrixXd x(5, 2), h(8, 2);
  for (int i = 0; i < x.size(); ++i) x(i % 5, i / 5) = rng.uniform(-1.0, 1.0);
  h.setZero();
  const auto ref = policy_forward(base, x, h);

  auto critic_bumped = base;
  critic_bumped.Wc1(3, 2) += 0.25;
  const auto c = policy_forward(critic_bumped, x, h);
  CHECK(c.heads == ref.heads);  // bitwise: actor path untouched
  CHECK(c.h == ref.h);
  CHECK(c.value != ref.value);

  auto actor_bumped = base;
  actor_bumped.Wa1(1, 1) += 0.25;
  const auto a = policy_forward(actor_bumped, x, h);
  CHECK(a.value == ref.value);
  CHECK(a.h == ref.h);
  CHECK(a.heads != ref.heads);
}

TEST_CASE("batch columns do not interact") {
  Rng rng(304);
  const auto p = PolicyParams::init(5, 8, rng);
  MatrixXd x(5, 3), h(8, 3);
  for (int i = 0; i < x.size(); ++i) x(i % 5, i / 5) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < h.size(); ++i) h(i % 8, i / 8) = rng.uniform(-1.0, 1.0);
  const auto ref = policy_forward(p, x, h);
  MatrixXd x2 = x;
  x2.col(1).array() += 0.5;  // perturb only the middle column
  const auto out = policy_forward(p, x2, h);
  CHECK(out.h.col(0) == ref.h.col(0));
  CHECK(out.h.col(2) == ref.h.col(2));
  CHECK(out.value[0] == ref.value[0]);
  CHECK(out.value[2] == ref.value[2]);
  CHECK(out.h.col(1) != ref.h.col(1));
}

TEST_CASE("bernoulli head math") {
  CHECK(bernoulli_entropy(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(bernoulli_logprob(0.0, true) == doctest::Approx(-std::log(2.0)));
  CHECK(bernoulli_logprob(0.0, false) == doctest::Approx(-std::log(2.0)));
  // Saturated logit: the taken branch is certain, the other impossible.
  CHECK(bernoulli_logprob(500.0, true) == doctest::Approx(0.0));
  CHECK(bernoulli_logprob(500.0, false) < -400.0);
  CHECK(std::isfinite(bernoulli_logprob(500.0, false)));
  CHECK(bernoulli_entropy(700.0) >= 0.0);  // entropy never goes negative
}

TEST_CASE("closed-form logprob and entropy at the neutral point") {
  Eigen::Vector4d heads = Eigen::Vector4d::Zero();
  VectorXd ls(2);
  ls << -0.5, -0.5;
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  // Two standard-form Gaussians at their means (sigma = e^-0.5), no tanh
  // correction at u = 0, +log 2 for the thrust half-squash, two fair coins.
  const double expected =
      2.0 * (-0.5 * std::log(2.0 * kPi) + 0.5) + std::log(2.0) - 2.0 * std::log(2.0);
  CHECK(heads_logprob(heads, ls, u, false, false) == doctest::Approx(expected));
  const double expected_h = std::log(2.0 * kPi) + 2.0 * std::log(2.0);
  CHECK(heads_entropy(heads, ls) == doctest::Approx(expected_h));
}

TEST_CASE("sampling matches its own logprob and squash algebra") {
  Rng rng(305);
  VectorXd ls(2);
  ls << -0.5, -0.2;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Vector4d heads;
    heads << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-3.0, 3.0),
        rng.uniform(-3.0, 3.0);
    const auto s = sample_actions(heads, ls, rng);
    CHECK(s.cmd.thrust == doctest::Approx(0.5 * (std::tanh(s.u[0]) + 1.0)));
    CHECK(s.cmd.turn == doctest::Approx(std::tanh(s.u[1])));
    CHECK(s.cmd.thrust >= 0.0);
    CHECK(s.cmd.thrust <= 1.0);
    CHECK(std::abs(s.cmd.turn) <= 1.0);
    const double lp = heads_logprob(heads, ls, s.u, s.cmd.eod, s.cmd.bite);
    CHECK(std::abs(lp - s.logprob) <= 1e-10);
  }
}

TEST_CASE("sampled eod frequency tracks the logit") {
  Rng rng(306);
  const double p_target = 0.3;
  Eigen::Vector4d heads;
  heads << 0.0, 0.0, std::log(p_target / (1.0 - p_target)), 0.0;
  VectorXd ls = VectorXd::Constant(2, -0.5);
  int fired = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (sample_actions(heads, ls, rng).cmd.eod) ++fired;
  CHECK(static_cast<double>(fired) / n == doctest::Approx(p_target).epsilon(0.04));
}

TEST_CASE("mode action is the squashed mean with thresholded bits") {
  Eigen::Vector4d heads;
  heads << 0.4, -1.1, 2.0, -2.0;
  const auto cmd = mode_actions(heads);
  CHECK(cmd.thrust == doctest::Approx(0.5 * (std::tanh(0.4) + 1.0)));
  CHECK(cmd.turn == doctest::Approx(std::tanh(-1.1)));
  CHECK(cmd.eod);
  CHECK_FALSE(cmd.bite);
}

TEST_CASE("done flag severs the recurrence inside a sequence") {
  Rng rng(307);
  const int D = 4, H = 6, T = 5, B = 2;
  const auto p = PolicyParams::init(D, H, rng);
  auto batch = random_batch(T, D, B, H, rng);
  batch.done[1](0, 1) = 1.0;  // column 1 resets before step 2
  auto other = batch;
  // Rewrite column 1's pre-reset history; post-reset evaluations must agree.
  for (int t = 0; t <= 1; ++t)
    for (int i = 0; i < D; ++i) other.x[t](i, 1) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < H; ++i) other.h0(i, 1) = rng.uniform(-1.0, 1.0);
  const auto ev_a = evaluate_sequence(p, batch);
  const auto ev_b = evaluate_sequence(p, other);
  for (int t = 2; t < T; ++t) {
    CHECK(ev_a.logp(t, 1) == ev_b.logp(t, 1));
    CHECK(ev_a.value(t, 1) == ev_b.value(t, 1));
    CHECK(ev_a.entropy(t, 1) == ev_b.entropy(t, 1));
  }
  // The untouched column is bitwise identical throughout.
  for (int t = 0; t < T; ++t) CHECK(ev_a.logp(t, 0) == ev_b.logp(t, 0));
  // Pre-reset steps of column 1 genuinely differ (the test has teeth).
  CHECK(ev_a.logp(0, 1) != ev_b.logp(0, 1));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(308);
  const int D = 5, H = 8, T = 5, B = 2;
  auto p = PolicyParams::init(D, H, rng);
  // Wake up the log_std entries so their gradients are exercised off-init.
  p.log_std << -0.4, -0.7;
  auto batch = random_batch(T, D, B, H, rng);
  batch.done[1](0, 1) = 1.0;  // mid-sequence reset on one column
  batch.done[3](0, 0) = 1.0;

  MatrixXd wl(T, B), wv(T, B), we(T, B);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) {
      wl(t, b) = rng.uniform(-1.0, 1.0);
      wv(t, b) = rng.uniform(-1.0, 1.0);
      we(t, b) = rng.uniform(-1.0, 1.0);
    }

  const auto ev = evaluate_sequence(p, batch);
  auto grads = PolicyParams::zeros(D, H);
  backward_sequence(p, batch, ev, wl, wv, we, grads);

  const double eps = 1e-5;
  double max_rel = 0.0;
  int checked = 0;
  auto probes = p.tensors();
  auto answers = grads.tensors();
  REQUIRE(probes.size() == answers.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto probe_at = [&](int idx) -> double& {
      return probes[k].mat ? probes[k].mat->data()[idx] : probes[k].vec->data()[idx];
    };
    const double* analytic =
        answers[k].mat ? answers[k].mat->data() : answers[k].vec->data();
    const int n = probes[k].mat ? static_cast<int>(probes[k].mat->size())
                                : static_cast<int>(probes[k].vec->size());
    for (int idx = 0; idx < n; ++idx) {
      double& theta = probe_at(idx);
      const double saved = theta;
      theta = saved + eps;
      const double lo_hi = seq_loss(p, batch, wl, wv, we);
      theta = saved - eps;
      const double lo_lo = seq_loss(p, batch, wl, wv, we);
      theta = saved;
      const double fd = (lo_hi - lo_lo) / (2.0 * eps);
      const double a = analytic[idx];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      max_rel = std::max(max_rel, rel);
      ++checked;
    }
  }
  CHECK(checked == static_cast<int>(p.num_params()));
  CHECK(max_rel < 1e-4);
}

TEST_CASE("parameter vector algebra: axpy, scale, global_norm") {
  auto a = PolicyParams::zeros(3, 4);
  auto b = PolicyParams::zeros(3, 4);
  a.bz.setConstant(3.0);
  b.bz.setConstant(1.0);
  b.bao.setConstant(2.0);
  axpy(a, b, 2.0);  // a += 2b
  CHECK(a.bz[0] == doctest::Approx(5.0));
  CHECK(a.bao[0] == doctest::Approx(4.0));
  scale(a, 0.5);
  CHECK(a.bz[0] == doctest::Approx(2.5));
  // global_norm is the l2 norm of the concatenation of every tensor.
  auto c = PolicyParams::zeros(3, 4);
  c.bz.setConstant(1.0);   // 4 entries
  c.bc1.setConstant(2.0);  // 4 entries
  CHECK(global_norm(c) == doctest::Approx(std::sqrt(4.0 * 1.0 + 4.0 * 4.0)));
}

TEST_CASE("tensor catalogue covers every parameter exactly once") {
  auto p = PolicyParams::zeros(5, 8);
  std::size_t total = 0;
  for (const auto& t : p.tensors()) {
    REQUIRE((t.mat != nullptr) != (t.vec != nullptr));
    total += t.mat ? static_cast<std::size_t>(t.mat->size())
                   : static_cast<std::size_t>(t.vec->size());
  }
  CHECK(total == p.num_params());
  // 3 GRU input + 3 recurrent + 3 biases, actor 3+3+log_std, critic 3+3.
  CHECK(p.tensors().size() == 22);
}
