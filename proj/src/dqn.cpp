#include "quadhrl/dqn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace quadhrl {

using nlohmann::json;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return data_.size();
}

void ReplayBuffer::clear() {
  std::lock_guard<std::mutex> lock(mutex_);
  data_.clear();
  cursor_ = 0;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  const std::size_t filled = size();
  if (filled == 0) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  std::uniform_int_distribution<std::size_t> u(0, filled - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = u(rng);
  return idx;
}

Exploration parse_exploration(const std::string& s) {
  if (s == "paper") return Exploration::Paper;
  if (s == "boltzmann") return Exploration::Boltzmann;
  throw std::invalid_argument("exploration must be paper or boltzmann, got '" + s + "'");
}

const char* to_string(Exploration e) { return e == Exploration::Paper ? "paper" : "boltzmann"; }

ArgmaxNet parse_argmax_net(const std::string& s) {
  if (s == "online1") return ArgmaxNet::Online1;
  if (s == "min_targets") return ArgmaxNet::MinTargets;
  throw std::invalid_argument("argmax_net must be online1 or min_targets, got '" + s + "'");
}

const char* to_string(ArgmaxNet a) { return a == ArgmaxNet::Online1 ? "online1" : "min_targets"; }

void DqnConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("dqn.gamma must be in (0, 1)");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("dqn.rho must be in [0, 1)");
  if (!(nu >= 0.0)) throw std::invalid_argument("dqn.nu must be >= 0");
  if (batch_size <= 0) throw std::invalid_argument("dqn.batch_size must be positive");
  if (samples_per_update <= 0) throw std::invalid_argument("dqn.samples_per_update must be positive");
  if (updates_per_round <= 0) throw std::invalid_argument("dqn.updates_per_round must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("dqn.learning_rate must be positive");
  if (max_samples < 0) throw std::invalid_argument("dqn.max_samples must be >= 0");
  if (replay_capacity <= 0) throw std::invalid_argument("dqn.replay_capacity must be positive");
  if (hidden <= 0) throw std::invalid_argument("dqn.hidden must be positive");
}

Eigen::VectorXd action_probabilities(const Eigen::VectorXd& q, double nu, Exploration mode) {
  const Eigen::Index n = q.size();
  if (n == 0) throw std::invalid_argument("action_probabilities: empty Q vector");
  const double qmax = q.maxCoeff();
  if (std::abs(qmax) <= 1e-9 || nu == 0.0) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd logits(n);
  if (mode == Exploration::Paper)
    logits = -nu * q / qmax;
  else
    logits = nu * (q.array() - qmax).matrix() / std::abs(qmax);
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd p = logits.array().exp();
  return p / p.sum();
}

int sample_action(const Eigen::VectorXd& q, double nu, std::mt19937_64& rng, Exploration mode) {
  const Eigen::VectorXd p = action_probabilities(q, nu, mode);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (x < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

int greedy_action(const Eigen::VectorXd& q) {
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = static_cast<int>(i);
  return best;
}

TransitionBatch TransitionBatch::gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& idx) {
  TransitionBatch b;
  const auto B = static_cast<Eigen::Index>(idx.size());
  if (B == 0) throw std::invalid_argument("TransitionBatch: empty index list");
  const Eigen::Index d = buffer.at(idx[0]).obs.size();
  b.obs.resize(d, B);
  b.next_obs.resize(d, B);
  b.actions.resize(B);
  b.rewards.resize(B);
  b.terminal.resize(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Transition& t = buffer.at(idx[j]);
    b.obs.col(j) = t.obs;
    b.next_obs.col(j) = t.next_obs;
    b.actions[j] = t.action;
    b.rewards[j] = t.reward;
    b.terminal[j] = t.terminal ? 1.0 : 0.0;
  }
  return b;
}

Eigen::VectorXd td_targets(const TransitionBatch& batch, const MlpParams& online1, const MlpParams& target1,
                           const MlpParams& target2, double gamma, ArgmaxNet argmax_net) {
  const Eigen::Index B = batch.size();
  if (B == 0) throw std::invalid_argument("td_targets: empty batch");
  const Eigen::MatrixXd t1 = forward_batch(target1, batch.next_obs);
  const Eigen::MatrixXd t2 = forward_batch(target2, batch.next_obs);
  const Eigen::MatrixXd tmin = t1.cwiseMin(t2);
  const Eigen::MatrixXd sel = argmax_net == ArgmaxNet::Online1 ? forward_batch(online1, batch.next_obs) : tmin;
  Eigen::VectorXd y(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    if (batch.terminal[j] != 0.0) {
      y[j] = batch.rewards[j];
      continue;
    }
    const int a = greedy_action(sel.col(j));
    y[j] = batch.rewards[j] + gamma * tmin(a, j);
  }
  return y;
}

void polyak_update(MlpParams& target, const MlpParams& online, double rho) {
  if (!(target.shape() == online.shape())) throw DimensionMismatch("polyak_update: shape mismatch");
  target.flat() = rho * target.flat() + (1.0 - rho) * online.flat();
}

Eigen::VectorXd ToyMdp::encode(int state) {
  Eigen::VectorXd o = Eigen::VectorXd::Zero(2);
  o[state] = 1.0;
  return o;
}

Eigen::VectorXd ToyMdp::reset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 1);
  state_ = u(rng);
  t_ = 0;
  return encode(state_);
}

EnvStep ToyMdp::step(int action) {
  if (action < 0 || action > 1) throw std::out_of_range("ToyMdp: action must be 0 or 1");
  EnvStep s;
  if (state_ == 0) {
    s.reward = action == 0 ? 1.0 : 0.0;
    state_ = action == 0 ? 0 : 1;
  } else {
    s.reward = action == 1 ? 2.0 : 0.0;
    state_ = action == 1 ? 1 : 0;
  }
  ++t_;
  s.observation = encode(state_);
  s.done = t_ >= horizon_;
  return s;
}

Eigen::Matrix2d ToyMdp::value_iteration(double gamma, double tol) {
  // reward[s][a], next[s][a]
  const double r[2][2] = {{1.0, 0.0}, {0.0, 2.0}};
  const int nx[2][2] = {{0, 1}, {0, 1}};
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  for (int it = 0; it < 100000; ++it) {
    Eigen::Matrix2d next;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) next(s, a) = r[s][a] + gamma * q.row(nx[s][a]).maxCoeff();
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta < tol) break;
  }
  return q;
}

DqnTrainer::DqnTrainer(const DqnConfig& config, int obs_dim, int num_actions)
    : config_(config), replay_(static_cast<std::size_t>(config.replay_capacity)), rng_(config.seed) {
  config_.validate();
  const MlpShape shape{obs_dim, config.hidden, config.hidden, num_actions};
  for (int i = 0; i < 2; ++i) {
    online_[i] = MlpParams::init(shape, rng_);
    target_[i] = online_[i];
    adam_[i].learning_rate = config.learning_rate;
  }
}

namespace {

std::string diagnostic_dump(const DqnTrainer& t, double loss, long j) {
  json d;
  d["samples"] = t.samples();
  d["rounds"] = t.rounds();
  d["inner_step"] = j;
  d["loss"] = std::isfinite(loss) ? json(loss) : json(std::to_string(loss));
  for (int i = 0; i < 2; ++i) {
    const auto& p = t.online(i).flat();
    d["online"][i] = {{"finite", p.allFinite()}, {"max_abs", p.allFinite() ? p.cwiseAbs().maxCoeff() : -1.0}};
  }
  d["replay_size"] = t.replay().size();
  return d.dump(2);
}

}  // namespace

double DqnTrainer::update_round() {
  double total = 0.0;
  for (int j = 0; j < config_.updates_per_round; ++j) {
    const auto idx = replay_.sample_indices(static_cast<std::size_t>(config_.batch_size), rng_);
    const TransitionBatch batch = TransitionBatch::gather(replay_, idx);
    const Eigen::VectorXd y =
        td_targets(batch, online_[0], target_[0], target_[1], config_.gamma, config_.argmax_net);
    double loss = 0.0;
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd grad;
      loss += td_loss_gradient(online_[i], batch.obs, batch.actions, y, grad);
      if (!grad.allFinite() || !std::isfinite(loss))
        throw TrainingDiverged("non-finite loss or gradient during update", diagnostic_dump(*this, loss, j));
      adam_[i].step(online_[i].flat(), grad);
    }
    if (j % 2 == 1) {
      polyak_update(target_[0], online_[0], config_.rho);
      polyak_update(target_[1], online_[1], config_.rho);
    }
    ++update_index_;
    total += loss;
  }
  return total / config_.updates_per_round;
}

void DqnTrainer::train(Environment& env, std::optional<long> max_samples,
                       const std::function<void(const RoundLog&)>& on_round) {
  const long limit = max_samples.value_or(config_.max_samples);
  if (env.obs_dim() != online_[0].shape().input || env.num_actions() != online_[0].shape().output)
    throw DimensionMismatch("DqnTrainer: environment dimensions do not match the networks");

  Eigen::VectorXd obs = env.reset(rng_);
  double episode_return = 0.0;
  RoundLog log;
  log.action_counts.assign(static_cast<std::size_t>(env.num_actions()), 0);
  double return_sum = 0.0;

  while (samples_ < limit) {
    const Eigen::VectorXd q = forward(online_[0], obs);
    const int a = sample_action(q, config_.nu, rng_, config_.exploration);
    EnvStep s = env.step(a);
    replay_.push({obs, a, s.reward, s.observation, s.terminal});
    ++samples_;
    ++log.action_counts[static_cast<std::size_t>(a)];
    episode_return += s.reward;
    if (s.done) {
      return_sum += episode_return;
      ++log.episodes;
      episode_return = 0.0;
      obs = env.reset(rng_);
    } else {
      obs = std::move(s.observation);
    }

    if (samples_ % config_.samples_per_update == 0) {
      log.loss = update_round();
      ++rounds_;
      log.round = rounds_;
      log.samples = samples_;
      log.mean_return = log.episodes > 0 ? return_sum / log.episodes : 0.0;
      if (on_round) on_round(log);
      log.episodes = 0;
      return_sum = 0.0;
      std::fill(log.action_counts.begin(), log.action_counts.end(), 0);
    }
  }
}

// Checkpoint container:
//   8 bytes  "QHRLCKPT"
//   u64      header length (little-endian)
//   header   JSON text
//   payload  doubles, little-endian, in the order listed under "blocks"
namespace {

constexpr char kMagic[8] = {'Q', 'H', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

json shape_json(const MlpShape& s) {
  return {{"input", s.input}, {"hidden1", s.hidden1}, {"hidden2", s.hidden2}, {"output", s.output}};
}

struct RawCheckpoint {
  json header;
  std::vector<double> payload;
};

RawCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  std::uint64_t hlen = 0;
  if (!in.read(reinterpret_cast<char*>(&hlen), 8) || hlen > (1u << 26))
    throw CheckpointError("checkpoint header length is corrupt");
  std::string htext(hlen, '\0');
  if (!in.read(htext.data(), static_cast<std::streamsize>(hlen))) throw CheckpointError("checkpoint header truncated");
  RawCheckpoint raw;
  try {
    raw.header = json::parse(htext);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    if (raw.header.at("format_version").get<int>() != kFormatVersion)
      throw CheckpointError("unsupported checkpoint format version");
    const auto n = raw.header.at("payload_doubles").get<std::uint64_t>();
    raw.payload.resize(n);
    const auto bytes = static_cast<std::streamsize>(n * sizeof(double));
    if (!in.read(reinterpret_cast<char*>(raw.payload.data()), bytes)) throw CheckpointError("checkpoint payload truncated");
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
    const std::string sum = hex64(fnv1a(reinterpret_cast<const char*>(raw.payload.data()), n * sizeof(double)));
    if (sum != raw.header.at("payload_fnv1a").get<std::string>())
      throw CheckpointError("checkpoint payload checksum mismatch");
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is missing fields: ") + e.what());
  }
  return raw;
}

MlpShape read_shape(const json& h) {
  const json& s = h.at("shape");
  MlpShape shape{s.at("input").get<int>(), s.at("hidden1").get<int>(), s.at("hidden2").get<int>(),
                 s.at("output").get<int>()};
  if (shape.input <= 0 || shape.hidden1 <= 0 || shape.hidden2 <= 0 || shape.output <= 0)
    throw CheckpointError("checkpoint has invalid layer shape");
  return shape;
}

void check_layout(const json& h, const std::string& expected) {
  const std::string layout = h.at("obs_layout").get<std::string>();
  if (!expected.empty() && layout != expected)
    throw CheckpointError("checkpoint observation layout '" + layout + "' does not match expected '" + expected + "'");
}

}  // namespace

void DqnTrainer::save(const std::string& path, const std::string& obs_layout, const std::string& config_echo) const {
  const MlpShape shape = online_[0].shape();
  const auto np = static_cast<std::size_t>(shape.num_params());
  std::vector<double> payload;
  payload.reserve(8 * np);
  auto append = [&](const Eigen::VectorXd& v) {
    if (v.size() == 0) {
      payload.insert(payload.end(), np, 0.0);
      return;
    }
    payload.insert(payload.end(), v.data(), v.data() + v.size());
  };
  for (const auto& p : online_) append(p.flat());
  for (const auto& p : target_) append(p.flat());
  for (const auto& a : adam_) {
    append(a.m);
    append(a.v);
  }

  std::ostringstream rng_state;
  rng_state << rng_;
  json h;
  h["format_version"] = kFormatVersion;
  h["shape"] = shape_json(shape);
  h["obs_layout"] = obs_layout;
  h["seed"] = config_.seed;
  h["samples"] = samples_;
  h["rounds"] = rounds_;
  h["update_index"] = update_index_;
  h["rng_state"] = rng_state.str();
  h["adam_steps"] = {adam_[0].step_count, adam_[1].step_count};
  h["blocks"] = {"online1", "online2", "target1", "target2", "adam1_m", "adam1_v", "adam2_m", "adam2_v"};
  h["payload_doubles"] = payload.size();
  h["payload_fnv1a"] = hex64(fnv1a(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(double)));
  try {
    h["config"] = json::parse(config_echo);
  } catch (const json::exception&) {
    h["config"] = config_echo;
  }
  const std::string htext = h.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    const std::uint64_t hlen = htext.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(htext.data(), static_cast<std::streamsize>(hlen));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into place: " + path);
}

void DqnTrainer::load(const std::string& path, const std::string& expected_layout) {
  const RawCheckpoint raw = read_checkpoint(path);
  try {
    check_layout(raw.header, expected_layout);
    const MlpShape shape = read_shape(raw.header);
    if (!(shape == online_[0].shape()))
      throw CheckpointError("checkpoint network shape does not match the configured networks");
    const auto np = static_cast<std::size_t>(shape.num_params());
    if (raw.payload.size() != 8 * np) throw CheckpointError("checkpoint payload size does not match its shape");
    std::size_t off = 0;
    auto take = [&](Eigen::VectorXd& v) {
      v = Eigen::Map<const Eigen::VectorXd>(raw.payload.data() + off, static_cast<Eigen::Index>(np));
      off += np;
    };
    for (auto& p : online_) take(p.flat());
    for (auto& p : target_) take(p.flat());
    for (int i = 0; i < 2; ++i) {
      take(adam_[i].m);
      take(adam_[i].v);
      adam_[i].step_count = raw.header.at("adam_steps").at(i).get<long>();
    }
    samples_ = raw.header.at("samples").get<long>();
    rounds_ = raw.header.at("rounds").get<long>();
    update_index_ = raw.header.at("update_index").get<long>();
    std::istringstream rs(raw.header.at("rng_state").get<std::string>());
    rs >> rng_;
    if (!rs) throw CheckpointError("checkpoint RNG state is corrupt");
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is missing fields: ") + e.what());
  }
  replay_.clear();
}

MlpParams load_policy(const std::string& path, const std::string& expected_layout, CheckpointInfo* info) {
  const RawCheckpoint raw = read_checkpoint(path);
  try {
    check_layout(raw.header, expected_layout);
    const MlpShape shape = read_shape(raw.header);
    const auto np = static_cast<std::size_t>(shape.num_params());
    if (raw.payload.size() != 8 * np) throw CheckpointError("checkpoint payload size does not match its shape");
    MlpParams p(shape);
    p.flat() = Eigen::Map<const Eigen::VectorXd>(raw.payload.data(), static_cast<Eigen::Index>(np));
    if (!p.all_finite()) throw CheckpointError("checkpoint contains non-finite parameters");
    if (info) {
      info->shape = shape;
      info->obs_layout = raw.header.at("obs_layout").get<std::string>();
      info->seed = raw.header.at("seed").get<std::uint64_t>();
      info->samples = raw.header.at("samples").get<long>();
      info->config_echo = raw.header.at("config").dump();
    }
    return p;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is missing fields: ") + e.what());
  }
}

}  // namespace quadhrl
