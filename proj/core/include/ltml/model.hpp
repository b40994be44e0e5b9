#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

namespace ltml {

// One affine layer: y = x * W^T + b for row-vector inputs. W is out x in.
struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// MLP feature extractor (ReLU between layers, linear output at the embedding)
// plus a linear classifier head.
struct ModelBundle {
  std::vector<DenseLayer> extractor;
  DenseLayer classifier;  // k x e

  // Fan-in-scaled uniform weights, zero biases, seeded.
  static ModelBundle init(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                          Eigen::Index embedding_dim, Eigen::Index num_classes,
                          std::uint64_t seed);

  Eigen::Index input_dim() const { return extractor.front().W.cols(); }
  Eigen::Index embedding_dim() const { return classifier.W.cols(); }
  Eigen::Index num_classes() const { return classifier.W.rows(); }
};

// Gradients per parameter tensor, shapes mirroring ModelBundle.
struct GradBundle {
  std::vector<DenseLayer> extractor;
  DenseLayer classifier;

  static GradBundle zeros_like(const ModelBundle& m);
};

// V = f(X) embeddings (batch x e), Z = g(V) logits (batch x k).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward(const ModelBundle& m,
                                                    const Eigen::MatrixXd& X);

// Backpropagates upstream gradients w.r.t. embeddings (dV) and/or logits (dZ)
// to all parameters; contributions sum. With freeze_extractor set, extractor
// gradients come back zero.
GradBundle backward(const ModelBundle& m, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd* dV, const Eigen::MatrixXd* dZ,
                    bool freeze_extractor = false);

struct AdamState {
  std::vector<DenseLayer> m_extractor, v_extractor;
  DenseLayer m_classifier, v_classifier;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const ModelBundle& m);
};

// Standard Adam with bias correction. With skip_extractor set, extractor
// parameters and their moments are left untouched.
void adam_step(AdamState& state, ModelBundle& model, const GradBundle& grads, double lr,
               bool skip_extractor = false);

// Reduce-on-plateau: ten-fold decrease after `patience` epochs without
// improvement, floored at `floor`.
struct LrSchedule {
  double lr = 1e-3;
  double factor = 0.1;
  double floor = 1e-7;
  int patience = 5;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  void step(double val_loss);
};

// Single-file checkpoint: length-prefixed JSON manifest (layer shapes, seed,
// step) followed by parameters as little-endian float32. Round-trips
// bit-exactly at float precision.
void save_checkpoint(const ModelBundle& m, std::uint64_t seed, long step,
                     const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path,
                            std::uint64_t* seed = nullptr, long* step = nullptr);

}  // namespace ltml
