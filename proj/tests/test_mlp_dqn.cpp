#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "quadhrl/dqn.hpp"

using namespace quadhrl;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("quadhrl_test_" + name);
}

Eigen::MatrixXd random_obs(std::mt19937_64& rng, int dim, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd o(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) o(i, j) = g(rng);
  return o;
}

}  // namespace

TEST_CASE("parameter count and layout") {
  const MlpShape s{25, 64, 64, 9};
  CHECK(s.num_params() == 25 * 64 + 64 + 64 * 64 + 64 + 64 * 9 + 9);
  MlpParams p(s);
  CHECK(p.flat().size() == s.num_params());
  p.W(0)(1, 2) = 7.0;
  CHECK(p.flat()[1 * 25 + 2] == 7.0);
  p.b(2)[3] = 4.0;
  CHECK(p.flat()[s.num_params() - 9 + 3] == 4.0);
}

TEST_CASE("forward pass matches a loop implementation") {
  std::mt19937_64 rng(1);
  const MlpShape s{7, 11, 5, 3};
  const MlpParams p = MlpParams::init(s, rng);
  const Eigen::MatrixXd obs = random_obs(rng, 7, 20);
  const Eigen::MatrixXd batch = forward_batch(p, obs);
  for (int j = 0; j < 20; ++j) {
    const Eigen::VectorXd ref = oracle::mlp_forward_loops(p.flat(), 7, 11, 5, 3, obs.col(j));
    CHECK((forward(p, obs.col(j)) - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.col(j) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(forward(p, Eigen::VectorXd::Zero(6)), DimensionMismatch);
}

TEST_CASE("init bounds") {
  std::mt19937_64 rng(2);
  const MlpParams p = MlpParams::init(MlpShape{16, 8, 8, 4}, rng);
  CHECK(p.W(0).cwiseAbs().maxCoeff() <= std::sqrt(1.0 / 16));
  CHECK(p.W(1).cwiseAbs().maxCoeff() <= std::sqrt(1.0 / 8));
}

TEST_CASE("TD loss gradient matches central differences") {
  std::mt19937_64 rng(3);
  const MlpShape s{5, 6, 4, 3};
  MlpParams p = MlpParams::init(s, rng);
  const Eigen::MatrixXd obs = random_obs(rng, 5, 8);
  Eigen::VectorXi acts(8);
  Eigen::VectorXd y(8);
  for (int j = 0; j < 8; ++j) {
    acts[j] = j % 3;
    y[j] = 0.3 * j - 1.0;
  }
  Eigen::VectorXd grad;
  const double loss = td_loss_gradient(p, obs, acts, y, grad);
  CHECK(loss == doctest::Approx(td_loss(p, obs, acts, y)));
  for (int k = 0; k < s.num_params(); ++k) {
    const double x0 = p.flat()[k];
    const double fd = oracle::central_difference(
        [&](double x) {
          p.flat()[k] = x;
          return td_loss(p, obs, acts, y);
        },
        x0, 1e-6);
    p.flat()[k] = x0;
    CHECK(std::abs(grad[k] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("Adam first step moves each parameter by the learning rate") {
  AdamState a;
  a.learning_rate = 0.01;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3), g(3);
  g << 2.0, -0.5, 0.0;
  a.step(p, g);
  CHECK(p[0] == doctest::Approx(-0.01));
  CHECK(p[1] == doctest::Approx(0.01));
  CHECK(p[2] == 0.0);
}

TEST_CASE("printed exploration distribution favours the lower Q") {
  const Eigen::Vector2d q(1.0, 2.0);
  const Eigen::VectorXd p = action_probabilities(q, 5.0, Exploration::Paper);
  const double e1 = std::exp(-2.5), e2 = std::exp(-5.0);
  CHECK(p[0] == doctest::Approx(e1 / (e1 + e2)));
  CHECK(p[0] == doctest::Approx(0.924).epsilon(1e-3));
  const Eigen::VectorXd b = action_probabilities(q, 5.0, Exploration::Boltzmann);
  CHECK(b[1] > b[0]);
  CHECK(b.sum() == doctest::Approx(1.0));
  CHECK(action_probabilities(Eigen::Vector2d(0.0, 0.0), 5.0)[0] == doctest::Approx(0.5));
  CHECK(action_probabilities(q, 0.0)[1] == doctest::Approx(0.5));
}

TEST_CASE("sampler frequencies follow the distribution") {
  std::mt19937_64 rng(4);
  Eigen::VectorXd q(4);
  q << 1.0, 2.0, -0.5, 3.0;
  const Eigen::VectorXd p = action_probabilities(q, 2.0);
  std::array<int, 4> counts{};
  const int n = 200000;
  for (int k = 0; k < n; ++k) ++counts[sample_action(q, 2.0, rng)];
  for (int i = 0; i < 4; ++i) CHECK(std::abs(counts[i] / double(n) - p[i]) < 5 * std::sqrt(p[i] / n) + 1e-4);
}

TEST_CASE("greedy ties go to the lowest id") {
  CHECK(greedy_action((Eigen::VectorXd(3) << 1.0, 3.0, 3.0).finished()) == 1);
  CHECK(greedy_action((Eigen::VectorXd(2) << -1.0, -2.0).finished()) == 0);
}

TEST_CASE("TD targets: terminal rows, double-Q selection and min over targets") {
  std::mt19937_64 rng(5);
  const MlpShape s{2, 4, 4, 2};
  MlpParams online = MlpParams::init(s, rng), t1 = MlpParams::init(s, rng), t2 = MlpParams::init(s, rng);
  ReplayBuffer buf(8);
  buf.push({ToyMdp::encode(0), 0, 1.0, ToyMdp::encode(1), false});
  buf.push({ToyMdp::encode(1), 1, 2.0, ToyMdp::encode(0), true});
  const TransitionBatch b = TransitionBatch::gather(buf, {0, 1});
  const Eigen::VectorXd y = td_targets(b, online, t1, t2, 0.9);
  const Eigen::VectorXd next = ToyMdp::encode(1);
  const int a = greedy_action(forward(online, next));
  const double expect = 1.0 + 0.9 * std::min(forward(t1, next)[a], forward(t2, next)[a]);
  CHECK(y[0] == doctest::Approx(expect));
  CHECK(y[1] == doctest::Approx(2.0));
  // Under gamma -> 0 the target is the reward.
  CHECK(td_targets(b, online, t1, t2, 1e-12)[0] == doctest::Approx(1.0));
}

TEST_CASE("Polyak averaging") {
  MlpParams a(MlpShape{1, 1, 1, 1}), b(MlpShape{1, 1, 1, 1});
  a.flat().setConstant(1.0);
  b.flat().setConstant(3.0);
  polyak_update(a, b, 0.75);
  CHECK(a.flat()[0] == doctest::Approx(1.5));
  polyak_update(a, b, 0.0);
  CHECK(a.flat()[0] == 3.0);
  MlpParams c(MlpShape{2, 1, 1, 1});
  CHECK_THROWS_AS(polyak_update(a, c, 0.5), DimensionMismatch);
}

TEST_CASE("replay buffer wraps") {
  ReplayBuffer buf(3);
  for (int k = 0; k < 5; ++k) buf.push({Eigen::VectorXd::Constant(1, k), 0, double(k), Eigen::VectorXd::Zero(1), false});
  CHECK(buf.size() == 3);
  std::set<double> rewards;
  for (std::size_t i = 0; i < 3; ++i) rewards.insert(buf.at(i).reward);
  CHECK(rewards == std::set<double>{2.0, 3.0, 4.0});
  std::mt19937_64 rng(6);
  for (std::size_t i : buf.sample_indices(100, rng)) CHECK(i < 3);
}

TEST_CASE("toy MDP optimum by value iteration") {
  const Eigen::Matrix2d q = ToyMdp::value_iteration(0.9);
  CHECK(q(0, 0) == doctest::Approx(17.2));
  CHECK(q(0, 1) == doctest::Approx(18.0));
  CHECK(q(1, 0) == doctest::Approx(16.2));
  CHECK(q(1, 1) == doctest::Approx(20.0));
}

namespace {

DqnConfig toy_config() {
  DqnConfig c;
  c.gamma = 0.9;
  c.rho = 0.95;
  c.batch_size = 64;
  c.learning_rate = 1e-3;
  c.hidden = 32;
  c.seed = 1;
  c.replay_capacity = 20000;
  return c;
}

}  // namespace

TEST_CASE("double-Q learner recovers the toy optimum") {
  DqnTrainer t(toy_config(), 2, 2);
  ToyMdp env;
  t.train(env, 20000);
  const Eigen::Matrix2d qstar = ToyMdp::value_iteration(0.9);
  for (int s = 0; s < 2; ++s) {
    const Eigen::VectorXd q = forward(t.online(0), ToyMdp::encode(s));
    for (int a = 0; a < 2; ++a) CHECK(std::abs(q[a] - qstar(s, a)) <= 0.01 * qstar(s, a));
    CHECK(greedy_action(q) == 1);
  }
}

TEST_CASE("training is deterministic for a seed") {
  DqnConfig c = toy_config();
  DqnTrainer a(c, 2, 2), b(c, 2, 2);
  ToyMdp e1, e2;
  a.train(e1, 1000);
  b.train(e2, 1000);
  CHECK(a.online(0).flat() == b.online(0).flat());
  CHECK(a.target(1).flat() == b.target(1).flat());
}

TEST_CASE("checkpoint round trip is bit-exact and resumes identically") {
  DqnConfig c = toy_config();
  DqnTrainer a(c, 2, 2);
  ToyMdp env;
  a.train(env, 500);
  const auto path = temp_path("ckpt.bin").string();
  a.save(path, "toy");

  DqnTrainer b(c, 2, 2);
  b.load(path, "toy");
  for (int i = 0; i < 2; ++i) {
    CHECK(a.online(i).flat() == b.online(i).flat());
    CHECK(a.target(i).flat() == b.target(i).flat());
  }
  CHECK(b.samples() == 500);
  CHECK(b.rounds() == a.rounds());

  CheckpointInfo info;
  const MlpParams pol = load_policy(path, "toy", &info);
  CHECK(pol.flat() == a.online(0).flat());
  CHECK(info.samples == 500);
  CHECK_THROWS_AS(load_policy(path, "other"), CheckpointError);

  // Same buffer contents and RNG state give the same next update.
  for (std::size_t i = 0; i < a.replay().size(); ++i) b.replay().push(a.replay().at(i));
  a.update_round();
  b.update_round();
  CHECK(a.online(0).flat() == b.online(0).flat());
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  DqnTrainer a(toy_config(), 2, 2);
  const auto path = temp_path("corrupt.bin").string();
  a.save(path, "toy");
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x10;
  write(flipped);
  CHECK_THROWS_AS(load_policy(path, "toy"), CheckpointError);
  write(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_policy(path, "toy"), CheckpointError);
  write("NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(load_policy(path, "toy"), CheckpointError);
  write(bytes);
  CHECK_NOTHROW(load_policy(path, "toy"));
  DqnConfig other = toy_config();
  other.hidden = 16;
  DqnTrainer c(other, 2, 2);
  CHECK_THROWS_AS(c.load(path, "toy"), CheckpointError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_policy(path, "toy"), CheckpointError);
}

TEST_CASE("config validation names the field") {
  DqnConfig c;
  c.gamma = 1.0;
  try {
    c.validate();
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("dqn.gamma") != std::string::npos);
  }
  CHECK(parse_exploration("boltzmann") == Exploration::Boltzmann);
  CHECK_THROWS_AS(parse_exploration("greedy"), std::invalid_argument);
}

namespace {

class NanEnv final : public Environment {
 public:
  int obs_dim() const override { return 1; }
  int num_actions() const override { return 2; }
  Eigen::VectorXd reset(std::mt19937_64&) override { return Eigen::VectorXd::Zero(1); }
  EnvStep step(int) override { return {Eigen::VectorXd::Zero(1), std::nan(""), false, false}; }
};

}  // namespace

TEST_CASE("non-finite rewards raise a diagnosable error") {
  DqnConfig c = toy_config();
  DqnTrainer t(c, 1, 2);
  NanEnv env;
  try {
    t.train(env, 200);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.dump().find("\"samples\"") != std::string::npos);
  }
}
