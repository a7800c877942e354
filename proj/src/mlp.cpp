#include "quadhrl/mlp.hpp"

#include <cmath>

namespace quadhrl {

int MlpShape::num_params() const {
  return hidden1 * input + hidden1 + hidden2 * hidden1 + hidden2 + output * hidden2 + output;
}

MlpParams::MlpParams(const MlpShape& shape) : shape_(shape) {
  if (shape.input <= 0 || shape.hidden1 <= 0 || shape.hidden2 <= 0 || shape.output <= 0)
    throw std::invalid_argument("MlpShape: all layer sizes must be positive");
  flat_ = Eigen::VectorXd::Zero(shape.num_params());
}

MlpParams::Block MlpParams::weight_block(int layer) const {
  const int in[3] = {shape_.input, shape_.hidden1, shape_.hidden2};
  const int out[3] = {shape_.hidden1, shape_.hidden2, shape_.output};
  if (layer < 0 || layer > 2) throw std::out_of_range("MlpParams: layer must be 0, 1 or 2");
  int off = 0;
  for (int l = 0; l < layer; ++l) off += out[l] * in[l] + out[l];
  return {off, out[layer], in[layer]};
}

MlpParams::Block MlpParams::bias_block(int layer) const {
  const Block w = weight_block(layer);
  return {w.offset + w.rows * w.cols, w.rows, 1};
}

MatrixView MlpParams::W(int layer) {
  const Block k = weight_block(layer);
  return MatrixView(flat_.data() + k.offset, k.rows, k.cols);
}

ConstMatrixView MlpParams::W(int layer) const {
  const Block k = weight_block(layer);
  return ConstMatrixView(flat_.data() + k.offset, k.rows, k.cols);
}

VectorView MlpParams::b(int layer) {
  const Block k = bias_block(layer);
  return VectorView(flat_.data() + k.offset, k.rows);
}

ConstVectorView MlpParams::b(int layer) const {
  const Block k = bias_block(layer);
  return ConstVectorView(flat_.data() + k.offset, k.rows);
}

MlpParams MlpParams::init(const MlpShape& shape, std::mt19937_64& rng) {
  MlpParams p(shape);
  for (int l = 0; l < 3; ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(p.W(l).cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = p.W(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
    auto b = p.b(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
  }
  return p;
}

namespace {

void check_input(const MlpParams& params, Eigen::Index rows) {
  if (rows != params.shape().input)
    throw DimensionMismatch("MLP expects input of size " + std::to_string(params.shape().input) + ", got " +
                            std::to_string(rows));
}

}  // namespace

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& obs) {
  check_input(params, obs.size());
  const Eigen::VectorXd h1 = (params.W(0) * obs + params.b(0)).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (params.W(1) * h1 + params.b(1)).cwiseMax(0.0);
  return params.W(2) * h2 + params.b(2);
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& obs) {
  check_input(params, obs.rows());
  Eigen::MatrixXd h1 = params.W(0) * obs;
  h1.colwise() += params.b(0);
  h1 = h1.cwiseMax(0.0);
  Eigen::MatrixXd h2 = params.W(1) * h1;
  h2.colwise() += params.b(1);
  h2 = h2.cwiseMax(0.0);
  Eigen::MatrixXd q = params.W(2) * h2;
  q.colwise() += params.b(2);
  return q;
}

double td_loss(const MlpParams& params, const Eigen::MatrixXd& obs, const Eigen::VectorXi& actions,
               const Eigen::VectorXd& targets) {
  const Eigen::MatrixXd q = forward_batch(params, obs);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double r = q(actions[j], j) - targets[j];
    loss += r * r;
  }
  return loss / static_cast<double>(q.cols());
}

double td_loss_gradient(const MlpParams& params, const Eigen::MatrixXd& obs, const Eigen::VectorXi& actions,
                        const Eigen::VectorXd& targets, Eigen::VectorXd& grad) {
  check_input(params, obs.rows());
  const Eigen::Index B = obs.cols();
  if (B == 0) throw std::invalid_argument("td_loss_gradient: empty batch");
  if (actions.size() != B || targets.size() != B)
    throw DimensionMismatch("td_loss_gradient: actions/targets must match the batch size");
  const int out = params.shape().output;
  for (Eigen::Index j = 0; j < B; ++j)
    if (actions[j] < 0 || actions[j] >= out) throw std::out_of_range("td_loss_gradient: action id out of range");

  Eigen::MatrixXd h1 = params.W(0) * obs;
  h1.colwise() += params.b(0);
  h1 = h1.cwiseMax(0.0);
  Eigen::MatrixXd h2 = params.W(1) * h1;
  h2.colwise() += params.b(1);
  h2 = h2.cwiseMax(0.0);
  Eigen::MatrixXd q = params.W(2) * h2;
  q.colwise() += params.b(2);

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(out, B);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const double r = q(actions[j], j) - targets[j];
    loss += r * r;
    dq(actions[j], j) = 2.0 * r * inv_b;
  }

  MlpParams g(params.shape());
  g.W(2) = dq * h2.transpose();
  g.b(2) = dq.rowwise().sum();
  Eigen::MatrixXd dh2 = params.W(2).transpose() * dq;
  dh2 = dh2.cwiseProduct((h2.array() > 0.0).cast<double>().matrix());
  g.W(1) = dh2 * h1.transpose();
  g.b(1) = dh2.rowwise().sum();
  Eigen::MatrixXd dh1 = params.W(1).transpose() * dh2;
  dh1 = dh1.cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
  g.W(0) = dh1 * obs.transpose();
  g.b(0) = dh1.rowwise().sum();
  grad = std::move(g.flat());
  return loss * inv_b;
}

void AdamState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
    step_count = 0;
  }
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

}  // namespace quadhrl
