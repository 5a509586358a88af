#ifndef FABCO_NN_H_
#define FABCO_NN_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace fabco::nn {

enum class OutputActivation { kSigmoid, kIdentity };

// Feedforward architecture: ReLU on every hidden layer, configurable head.
struct NetSpec {
  // input, hidden..., output
  std::vector<int> layer_widths;
  OutputActivation output_activation = OutputActivation::kSigmoid;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
  void Validate() const;
  bool operator==(const NetSpec&) const = default;
};

struct NetParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: out x in
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;

  // zero-valued container shaped like `like`
  static NetParams ZerosLike(const NetParams& like);
  int64_t size() const;
  bool AllFinite() const;
  bool operator==(const NetParams& other) const;
};

struct TrainConfig {
  int batch_size = 256;
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 0;
  // when false, samples keep their order: the last records form the
  // validation split and batches are taken in sequence
  bool shuffle = true;

  void Validate() const;
};

class Network {
 public:
  // Seeded uniform init in +-1/sqrt(fan_in) for weights and biases.
  Network(NetSpec spec, std::uint64_t seed);
  Network(NetSpec spec, NetParams params);

  Eigen::VectorXd Forward(const Eigen::VectorXd& input) const;
  // inputs: input_dim x batch
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& inputs) const;

  // Gradient of weight * sum_i |f(input)_i - target_i| w.r.t. all params.
  // The subgradient of |.| at 0 is 0.
  NetParams Backward(const Eigen::VectorXd& input, const Eigen::VectorXd& target,
                     double weight) const;

  // Reverse pass for a batch given dLoss/dOutput (output_dim x batch).
  // Returns the network output and fills `grad`.
  Eigen::MatrixXd ForwardBackward(
      const Eigen::MatrixXd& inputs,
      const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>&
          output_gradient,
      NetParams* grad) const;

  const NetSpec& spec() const { return spec_; }
  const NetParams& params() const { return params_; }
  NetParams& mutable_params() { return params_; }

 private:
  void CheckShapes() const;

  NetSpec spec_;
  NetParams params_;
};

double L1Loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
              double weight);

// Batch objective: returns scale * sum_k w_k * sum_i |f(x_k)_i - y_k_i| and,
// when grad is non-null, its gradient. The trainer passes scale = 1 /
// batch_size so a batch loss is the mean of the weighted per-sample losses.
double WeightedL1Objective(const Network& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets,
                           const Eigen::VectorXd& weights, double scale,
                           NetParams* grad);

using Objective = std::function<double(
    const Network&, const Eigen::MatrixXd&, const Eigen::MatrixXd&,
    const Eigen::VectorXd&, double, NetParams*)>;

class Adam {
 public:
  Adam(const NetParams& like, const TrainConfig& cfg);
  void Step(NetParams& params, const NetParams& grad);

 private:
  NetParams m_;
  NetParams v_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  int64_t t_ = 0;
};

struct Sample {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
  double weight = 1.0;
};

struct TrainResult {
  NetParams params;  // best-validation checkpoint
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
};

// Seeded train/validation split, mini-batch Adam on `objective`, returns the
// epoch with the lowest validation objective. Batch losses are normalized by
// the configured batch size (a short final batch is not re-weighted) and the
// validation loss by the validation count. Throws on empty data or a
// non-finite loss.
TrainResult Train(const NetSpec& spec, const std::vector<Sample>& data,
                  const TrainConfig& cfg,
                  const Objective& objective = WeightedL1Objective);

// Per-dimension affine map y = offset + scale * x.
struct AffineMap {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  static AffineMap Identity(int dim);
  // maps [lo_i, hi_i] onto [0.05, 0.95]
  static AffineMap ToUnitMargin(const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi);
  Eigen::VectorXd Apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd Invert(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd ApplyColumns(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd InvertColumns(const Eigen::MatrixXd& y) const;
  bool operator==(const AffineMap& other) const;
};

// Everything needed to reload a trained model.
struct Checkpoint {
  NetSpec spec;
  NetParams params;
  AffineMap input_map;
  AffineMap output_map;
  double best_val_loss = 0.0;
  // free-form model metadata (kind, variant, ...)
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json CheckpointToJson(const Checkpoint& ckpt);
Checkpoint CheckpointFromJson(const nlohmann::json& j);

std::string ToString(OutputActivation activation);
OutputActivation OutputActivationFromString(const std::string& name);

}  // namespace fabco::nn

#endif  // FABCO_NN_H_
