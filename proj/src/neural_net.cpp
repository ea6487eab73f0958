#include <cmath>
#include <numeric>

#include "cogmark/error.hpp"
#include "cogmark/learners.hpp"
#include "cogmark/rng.hpp"
#include "cogmark/types.hpp"
#include "learner_common.hpp"

namespace cogmark {

namespace nn {

namespace {

Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& in) {
  Eigen::MatrixXd z = in * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

// Row-wise log-softmax.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

}  // namespace

std::vector<DenseLayer> init_layers(int inputs, std::span<const int> hidden, int outputs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> sizes{inputs};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(outputs);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    // He initialisation for ReLU layers, Glorot-style for the softmax layer.
    const double sd = last ? std::sqrt(1.0 / in) : std::sqrt(2.0 / in);
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = rng.normal(0.0, sd);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layers.push_back(std::move(layer));
  }
  return layers;
}

Eigen::MatrixXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    a = affine(layers[l], a);
    if (l + 1 < layers.size()) a = a.cwiseMax(0.0);
  }
  return log_softmax(a).array().exp();
}

double loss_and_gradients(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                          std::span<const int> labels, double l2, Gradients* grads) {
  const std::size_t depth = layers.size();
  const Eigen::Index batch = inputs.rows();
  std::vector<Eigen::MatrixXd> pre(depth);
  std::vector<Eigen::MatrixXd> act(depth + 1);
  act[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = affine(layers[l], act[l]);
    act[l + 1] = l + 1 < depth ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
  }
  const Eigen::MatrixXd logp = log_softmax(act[depth]);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) loss -= logp(i, labels[static_cast<std::size_t>(i)]);
  loss /= static_cast<double>(batch);
  double penalty = 0.0;
  for (const auto& layer : layers) penalty += layer.weights.squaredNorm();
  loss += 0.5 * l2 * penalty;
  if (grads == nullptr) return loss;

  grads->weights.resize(depth);
  grads->biases.resize(depth);
  Eigen::MatrixXd delta = logp.array().exp();
  for (Eigen::Index i = 0; i < batch; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(batch);
  for (std::size_t l = depth; l-- > 0;) {
    grads->weights[l] = delta.transpose() * act[l] + l2 * layers[l].weights;
    grads->biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    delta = (delta * layers[l].weights).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

}  // namespace nn

namespace {

// First-order adaptive-moment optimiser state for one parameter block.
template <typename M>
struct Moments {
  M first;
  M second;
};

template <typename M>
void adam_step(M& param, const M& grad, Moments<M>& mom, double lr, double bias1, double bias2) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  mom.first = kBeta1 * mom.first + (1.0 - kBeta1) * grad;
  mom.second = kBeta2 * mom.second + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (mom.first.array() / bias1) / ((mom.second.array() / bias2).sqrt() + kEps);
}

}  // namespace

TrainedModel fit_neural_net(const Dataset& d, const NeuralNetParams& hp) {
  d.validate();
  if (d.kind != TargetKind::kClassification) {
    throw Error(ErrorCode::kInvalidDataset, "the network learner needs class labels");
  }
  if (hp.hidden_sizes.empty() || hp.batch_size < 1 || hp.epochs < 0 || !(hp.learning_rate > 0.0) || hp.l2 < 0.0) {
    throw Error(ErrorCode::kInvalidHyperparameter, "invalid network hyperparameters");
  }
  const auto data = detail::canonicalize(d);
  const Eigen::Index n = data.x.rows();
  const Eigen::Index dim = data.x.cols();

  NeuralNetState state;
  state.input_mean = data.x.colwise().mean().transpose();
  state.input_scale.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double var = (data.x.col(j).array() - state.input_mean(j)).square().mean();
    state.input_scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  const Eigen::MatrixXd z =
      (data.x.rowwise() - state.input_mean.transpose()).array().rowwise() / state.input_scale.transpose().array();

  state.layers = nn::init_layers(static_cast<int>(dim), hp.hidden_sizes, kNumClasses, derive_seed(hp.seed, 0));
  std::vector<Moments<Eigen::MatrixXd>> wm;
  std::vector<Moments<Eigen::VectorXd>> bm;
  for (const auto& layer : state.layers) {
    wm.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                  Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols())});
    bm.push_back({Eigen::VectorXd::Zero(layer.bias.size()), Eigen::VectorXd::Zero(layer.bias.size())});
  }

  Rng shuffler(derive_seed(hp.seed, 1));
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Gradients grads;
  std::size_t step = 0;
  const std::size_t batch = static_cast<std::size_t>(hp.batch_size);
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      xb.resize(static_cast<Eigen::Index>(end - start), dim);
      yb.clear();
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = z.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(data.labels[order[i]]);
      }
      const double loss = nn::loss_and_gradients(state.layers, xb, yb, hp.l2, &grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kDivergedTraining, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      ++step;
      const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(step));
      for (std::size_t l = 0; l < state.layers.size(); ++l) {
        adam_step(state.layers[l].weights, grads.weights[l], wm[l], hp.learning_rate, bias1, bias2);
        adam_step(state.layers[l].bias, grads.biases[l], bm[l], hp.learning_rate, bias1, bias2);
      }
    }
  }
  return TrainedModel(ModelKind::kNeuralNetClassifier, to_json(hp), std::move(state),
                      detail::make_metadata(d, hp.seed));
}

}  // namespace cogmark
