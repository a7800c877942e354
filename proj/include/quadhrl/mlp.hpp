#pragma once

#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace quadhrl {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MlpShape {
  int input = 25;
  int hidden1 = 64;
  int hidden2 = 64;
  int output = 9;

  int num_params() const;
  bool operator==(const MlpShape&) const = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

/// Weights of input -> hidden1 -> hidden2 -> output with ReLU hidden layers.
///
/// All parameters live in one flat vector in the order W1, b1, W2, b2, W3, b3, each
/// weight matrix row-major with shape (fan_out, fan_in).
class MlpParams {
 public:
  MlpParams() : MlpParams(MlpShape{}) {}
  explicit MlpParams(const MlpShape& shape);

  /// Uniform in +-sqrt(1/fan_in) for weights and biases.
  static MlpParams init(const MlpShape& shape, std::mt19937_64& rng);

  const MlpShape& shape() const { return shape_; }
  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }

  MatrixView W(int layer);
  ConstMatrixView W(int layer) const;
  VectorView b(int layer);
  ConstVectorView b(int layer) const;

  bool all_finite() const { return flat_.allFinite(); }

 private:
  struct Block {
    int offset, rows, cols;
  };
  Block weight_block(int layer) const;
  Block bias_block(int layer) const;

  MlpShape shape_;
  Eigen::VectorXd flat_;
};

/// Q-values for one observation.
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& obs);

/// Q-values for a batch; observations are columns, result is output x batch.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& obs);

/// Mean squared TD error (1/B) sum_j (Q(s_j, a_j) - y_j)^2 and its gradient with
/// respect to the flat parameter vector. Observations are columns.
double td_loss_gradient(const MlpParams& params, const Eigen::MatrixXd& obs, const Eigen::VectorXi& actions,
                        const Eigen::VectorXd& targets, Eigen::VectorXd& grad);

double td_loss(const MlpParams& params, const Eigen::MatrixXd& obs, const Eigen::VectorXi& actions,
               const Eigen::VectorXd& targets);

struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step_count = 0;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

}  // namespace quadhrl
