#include "fabco/nn.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fabco::nn {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd ApplyHead(OutputActivation activation, const MatrixXd& z) {
  if (activation == OutputActivation::kSigmoid) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

}  // namespace

void NetSpec::Validate() const {
  if (layer_widths.size() < 2) {
    throw std::invalid_argument("NetSpec needs at least input and output layers");
  }
  for (int w : layer_widths) {
    if (w < 1) throw std::invalid_argument("NetSpec layer widths must be >= 1");
  }
}

NetParams NetParams::ZerosLike(const NetParams& like) {
  NetParams out;
  out.seed = like.seed;
  for (const MatrixXd& w : like.weights) {
    out.weights.push_back(MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const VectorXd& b : like.biases) {
    out.biases.push_back(VectorXd::Zero(b.size()));
  }
  return out;
}

int64_t NetParams::size() const {
  int64_t n = 0;
  for (const MatrixXd& w : weights) n += w.size();
  for (const VectorXd& b : biases) n += b.size();
  return n;
}

bool NetParams::AllFinite() const {
  for (const MatrixXd& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const VectorXd& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

bool NetParams::operator==(const NetParams& other) const {
  if (weights.size() != other.weights.size() ||
      biases.size() != other.biases.size()) {
    return false;
  }
  for (size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        weights[l] != other.weights[l]) {
      return false;
    }
    if (biases[l].size() != other.biases[l].size() ||
        biases[l] != other.biases[l]) {
      return false;
    }
  }
  return true;
}

void TrainConfig::Validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
}

Network::Network(NetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.Validate();
  std::mt19937_64 rng(seed);
  params_.seed = seed;
  for (int l = 0; l < spec_.num_layers(); ++l) {
    int fan_in = spec_.layer_widths[l];
    int fan_out = spec_.layer_widths[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    MatrixXd w(fan_out, fan_in);
    for (int c = 0; c < fan_in; ++c) {
      for (int r = 0; r < fan_out; ++r) w(r, c) = dist(rng);
    }
    VectorXd b(fan_out);
    for (int r = 0; r < fan_out; ++r) b(r) = dist(rng);
    params_.weights.push_back(std::move(w));
    params_.biases.push_back(std::move(b));
  }
}

Network::Network(NetSpec spec, NetParams params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.Validate();
  CheckShapes();
}

void Network::CheckShapes() const {
  const int layers = spec_.num_layers();
  if (static_cast<int>(params_.weights.size()) != layers ||
      static_cast<int>(params_.biases.size()) != layers) {
    throw std::invalid_argument("NetParams layer count does not match NetSpec");
  }
  for (int l = 0; l < layers; ++l) {
    if (params_.weights[l].rows() != spec_.layer_widths[l + 1] ||
        params_.weights[l].cols() != spec_.layer_widths[l] ||
        params_.biases[l].size() != spec_.layer_widths[l + 1]) {
      throw std::invalid_argument("NetParams shape mismatch at layer " +
                                  std::to_string(l));
    }
  }
}

VectorXd Network::Forward(const VectorXd& input) const {
  if (input.size() != spec_.input_dim()) {
    throw std::invalid_argument("Forward: input has " +
                                std::to_string(input.size()) +
                                " entries, expected " +
                                std::to_string(spec_.input_dim()));
  }
  return ForwardBatch(input);
}

MatrixXd Network::ForwardBatch(const MatrixXd& inputs) const {
  if (inputs.rows() != spec_.input_dim()) {
    throw std::invalid_argument("ForwardBatch: input dimension mismatch");
  }
  const int layers = spec_.num_layers();
  MatrixXd a = inputs;
  for (int l = 0; l < layers; ++l) {
    MatrixXd z = params_.weights[l] * a;
    z.colwise() += params_.biases[l];
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
    } else {
      a = ApplyHead(spec_.output_activation, z);
    }
  }
  return a;
}

MatrixXd Network::ForwardBackward(
    const MatrixXd& inputs,
    const std::function<MatrixXd(const MatrixXd&)>& output_gradient,
    NetParams* grad) const {
  if (inputs.rows() != spec_.input_dim()) {
    throw std::invalid_argument("ForwardBackward: input dimension mismatch");
  }
  const int layers = spec_.num_layers();
  // activations[l] is the input of layer l; pre[l] its pre-activation
  std::vector<MatrixXd> activations(layers + 1);
  std::vector<MatrixXd> pre(layers);
  activations[0] = inputs;
  for (int l = 0; l < layers; ++l) {
    pre[l] = params_.weights[l] * activations[l];
    pre[l].colwise() += params_.biases[l];
    if (l + 1 < layers) {
      activations[l + 1] = pre[l].cwiseMax(0.0);
    } else {
      activations[l + 1] = ApplyHead(spec_.output_activation, pre[l]);
    }
  }
  const MatrixXd& output = activations[layers];
  if (grad == nullptr) return output;

  MatrixXd delta = output_gradient(output);
  if (delta.rows() != output.rows() || delta.cols() != output.cols()) {
    throw std::invalid_argument("output gradient shape mismatch");
  }
  if (spec_.output_activation == OutputActivation::kSigmoid) {
    delta.array() *= output.array() * (1.0 - output.array());
  }
  *grad = NetParams::ZerosLike(params_);
  for (int l = layers - 1; l >= 0; --l) {
    grad->weights[l].noalias() = delta * activations[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixXd upstream = params_.weights[l].transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(upstream, 0.0);
    }
  }
  return output;
}

NetParams Network::Backward(const VectorXd& input, const VectorXd& target,
                            double weight) const {
  if (input.size() != spec_.input_dim() ||
      target.size() != spec_.output_dim()) {
    throw std::invalid_argument("Backward: shape mismatch");
  }
  NetParams grad;
  ForwardBackward(
      input,
      [&](const MatrixXd& out) -> MatrixXd {
        MatrixXd g = (out - target).array().sign().matrix();
        return weight * g;
      },
      &grad);
  return grad;
}

double L1Loss(const VectorXd& pred, const VectorXd& target, double weight) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("L1Loss: length mismatch");
  }
  if (weight < 0.0) throw std::invalid_argument("L1Loss: negative weight");
  return weight * (pred - target).cwiseAbs().sum();
}

double WeightedL1Objective(const Network& net, const MatrixXd& inputs,
                           const MatrixXd& targets, const VectorXd& weights,
                           double scale, NetParams* grad) {
  MatrixXd out = net.ForwardBackward(
      inputs,
      [&](const MatrixXd& pred) -> MatrixXd {
        MatrixXd g = (pred - targets).array().sign().matrix();
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
          g.col(k) *= weights(k) * scale;
        }
        return g;
      },
      grad);
  double total = 0.0;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    total += weights(k) * (out.col(k) - targets.col(k)).cwiseAbs().sum();
  }
  return scale * total;
}

Adam::Adam(const NetParams& like, const TrainConfig& cfg)
    : m_(NetParams::ZerosLike(like)),
      v_(NetParams::ZerosLike(like)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      epsilon_(cfg.epsilon) {}

void Adam::Step(NetParams& params, const NetParams& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  };
  for (size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grad.weights[l], m_.weights[l], v_.weights[l]);
    update(params.biases[l], grad.biases[l], m_.biases[l], v_.biases[l]);
  }
}

TrainResult Train(const NetSpec& spec, const std::vector<Sample>& data,
                  const TrainConfig& cfg, const Objective& objective) {
  spec.Validate();
  cfg.Validate();
  if (data.empty()) throw std::invalid_argument("Train: empty data");
  for (const Sample& s : data) {
    if (s.input.size() != spec.input_dim() ||
        s.target.size() != spec.output_dim()) {
      throw std::invalid_argument("Train: sample shape does not match NetSpec");
    }
    if (s.weight < 0.0) throw std::invalid_argument("Train: negative weight");
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);

  const int n = static_cast<int>(data.size());
  int n_val = 0;
  if (n >= 2) {
    n_val = std::clamp(
        static_cast<int>(std::lround(cfg.validation_fraction * n)), 1, n - 1);
  }
  std::vector<int> train_idx(order.begin(), order.end() - n_val);
  std::vector<int> val_idx(order.end() - n_val, order.end());
  // a single sample validates against itself
  if (val_idx.empty()) val_idx = train_idx;

  auto pack = [&](const std::vector<int>& idx, MatrixXd& x, MatrixXd& y,
                  VectorXd& w) {
    x.resize(spec.input_dim(), idx.size());
    y.resize(spec.output_dim(), idx.size());
    w.resize(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
      x.col(k) = data[idx[k]].input;
      y.col(k) = data[idx[k]].target;
      w(k) = data[idx[k]].weight;
    }
  };
  MatrixXd x_val, y_val;
  VectorXd w_val;
  pack(val_idx, x_val, y_val, w_val);

  Network net(spec, cfg.rng_seed);
  Adam adam(net.params(), cfg);
  TrainResult result;
  result.params = net.params();
  result.best_val_loss = std::numeric_limits<double>::infinity();

  const double batch_scale = 1.0 / static_cast<double>(cfg.batch_size);
  const double val_scale = 1.0 / static_cast<double>(val_idx.size());
  NetParams grad;
  MatrixXd xb, yb;
  VectorXd wb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      size_t end = std::min(train_idx.size(), start + cfg.batch_size);
      std::vector<int> batch(train_idx.begin() + start, train_idx.begin() + end);
      pack(batch, xb, yb, wb);
      double loss = objective(net, xb, yb, wb, batch_scale, &grad);
      if (!std::isfinite(loss) || !grad.AllFinite()) {
        std::ostringstream msg;
        msg << "Train: non-finite loss at epoch " << epoch << ", batch starting "
            << start << " (loss=" << loss << ")";
        throw std::runtime_error(msg.str());
      }
      adam.Step(net.mutable_params(), grad);
      epoch_loss += loss;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);
    double val_loss = objective(net, x_val, y_val, w_val, val_scale, nullptr);
    if (!std::isfinite(val_loss)) {
      throw std::runtime_error("Train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    }
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val_loss);
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.params = net.params();
    }
  }
  return result;
}

AffineMap AffineMap::Identity(int dim) {
  return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

AffineMap AffineMap::ToUnitMargin(const VectorXd& lo, const VectorXd& hi) {
  AffineMap map;
  map.scale = 0.9 * (hi - lo).cwiseInverse();
  map.offset = VectorXd::Constant(lo.size(), 0.05) - lo.cwiseProduct(map.scale);
  return map;
}

VectorXd AffineMap::Apply(const VectorXd& x) const {
  return offset + scale.cwiseProduct(x);
}

VectorXd AffineMap::Invert(const VectorXd& y) const {
  return (y - offset).cwiseQuotient(scale);
}

MatrixXd AffineMap::ApplyColumns(const MatrixXd& x) const {
  MatrixXd y = scale.asDiagonal() * x;
  y.colwise() += offset;
  return y;
}

MatrixXd AffineMap::InvertColumns(const MatrixXd& y) const {
  MatrixXd x = y;
  x.colwise() -= offset;
  return scale.cwiseInverse().asDiagonal() * x;
}

bool AffineMap::operator==(const AffineMap& other) const {
  return offset.size() == other.offset.size() &&
         scale.size() == other.scale.size() && offset == other.offset &&
         scale == other.scale;
}

std::string ToString(OutputActivation activation) {
  return activation == OutputActivation::kSigmoid ? "sigmoid" : "identity";
}

OutputActivation OutputActivationFromString(const std::string& name) {
  if (name == "sigmoid") return OutputActivation::kSigmoid;
  if (name == "identity") return OutputActivation::kIdentity;
  throw std::invalid_argument("unknown output activation: " + name);
}

namespace {

nlohmann::json VectorToJson(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd VectorFromJson(const nlohmann::json& j) {
  std::vector<double> values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), values.size());
}

nlohmann::json AffineToJson(const AffineMap& m) {
  return {{"offset", VectorToJson(m.offset)}, {"scale", VectorToJson(m.scale)}};
}

AffineMap AffineFromJson(const nlohmann::json& j) {
  return {VectorFromJson(j.at("offset")), VectorFromJson(j.at("scale"))};
}

}  // namespace

nlohmann::json CheckpointToJson(const Checkpoint& ckpt) {
  nlohmann::json layers = nlohmann::json::array();
  for (size_t l = 0; l < ckpt.params.weights.size(); ++l) {
    const MatrixXd& w = ckpt.params.weights[l];
    // row-major flattening
    std::vector<double> flat;
    flat.reserve(w.size());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", std::move(flat)},
                      {"bias", VectorToJson(ckpt.params.biases[l])}});
  }
  return {{"spec",
           {{"layer_widths", ckpt.spec.layer_widths},
            {"output_activation", ToString(ckpt.spec.output_activation)}}},
          {"normalization",
           {{"input", AffineToJson(ckpt.input_map)},
            {"output", AffineToJson(ckpt.output_map)}}},
          {"layers", std::move(layers)},
          {"seed", ckpt.params.seed},
          {"best_val_loss", ckpt.best_val_loss},
          {"meta", ckpt.meta}};
}

Checkpoint CheckpointFromJson(const nlohmann::json& j) {
  Checkpoint ckpt;
  const nlohmann::json& spec = j.at("spec");
  ckpt.spec.layer_widths = spec.at("layer_widths").get<std::vector<int>>();
  ckpt.spec.output_activation =
      OutputActivationFromString(spec.at("output_activation").get<std::string>());
  ckpt.input_map = AffineFromJson(j.at("normalization").at("input"));
  ckpt.output_map = AffineFromJson(j.at("normalization").at("output"));
  for (const nlohmann::json& layer : j.at("layers")) {
    const int rows = layer.at("rows").get<int>();
    const int cols = layer.at("cols").get<int>();
    std::vector<double> flat = layer.at("weights").get<std::vector<double>>();
    if (static_cast<int64_t>(flat.size()) != static_cast<int64_t>(rows) * cols) {
      throw std::invalid_argument("checkpoint layer has wrong weight count");
    }
    MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = flat[r * cols + c];
    }
    ckpt.params.weights.push_back(std::move(w));
    ckpt.params.biases.push_back(VectorFromJson(layer.at("bias")));
  }
  ckpt.params.seed = j.at("seed").get<std::uint64_t>();
  ckpt.best_val_loss = j.at("best_val_loss").get<double>();
  if (j.contains("meta")) ckpt.meta = j.at("meta");
  // validates shapes against the spec
  Network check(ckpt.spec, ckpt.params);
  if (ckpt.input_map.offset.size() != ckpt.spec.input_dim() ||
      ckpt.output_map.offset.size() != ckpt.spec.output_dim()) {
    throw std::invalid_argument("checkpoint normalization has wrong dimension");
  }
  return ckpt;
}

}  // namespace fabco::nn
