#include "ltml/model.hpp"

#include <cmath>
#include <fstream>

#include "ltml/error.hpp"
#include "ltml/rng.hpp"
#include "json.hpp"

namespace ltml {

using nlohmann::json;

namespace {

DenseLayer init_layer(Eigen::Index out, Eigen::Index in, Rng& rng) {
  DenseLayer l;
  l.W.resize(out, in);
  double limit = std::sqrt(3.0 / static_cast<double>(in));
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) {
      l.W(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

// Forward pass keeping pre-activations for backprop. ReLU sits between
// extractor layers; the embedding output itself is linear.
struct Trace {
  std::vector<Eigen::MatrixXd> inputs;  // input to each extractor layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each extractor layer
  Eigen::MatrixXd V, Z;
};

Trace run_forward(const ModelBundle& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.input_dim()) {
    throw Error("model: input width " + std::to_string(X.cols()) + " != d=" +
                std::to_string(m.input_dim()));
  }
  Trace t;
  Eigen::MatrixXd h = X;
  const std::size_t L = m.extractor.size();
  for (std::size_t l = 0; l < L; ++l) {
    t.inputs.push_back(h);
    Eigen::MatrixXd z = (h * m.extractor[l].W.transpose()).rowwise() +
                        m.extractor[l].b.transpose();
    t.pre.push_back(z);
    h = (l + 1 < L) ? z.cwiseMax(0.0) : z;
  }
  t.V = h;
  t.Z = (h * m.classifier.W.transpose()).rowwise() + m.classifier.b.transpose();
  return t;
}

void check_finite(const Eigen::MatrixXd& g, const char* what) {
  if (!g.allFinite()) throw Error(std::string("model: non-finite gradient in ") + what);
}

}  // namespace

ModelBundle ModelBundle::init(Eigen::Index input_dim,
                              const std::vector<Eigen::Index>& hidden,
                              Eigen::Index embedding_dim, Eigen::Index num_classes,
                              std::uint64_t seed) {
  Rng rng(seed);
  ModelBundle m;
  Eigen::Index in = input_dim;
  for (Eigen::Index h : hidden) {
    m.extractor.push_back(init_layer(h, in, rng));
    in = h;
  }
  m.extractor.push_back(init_layer(embedding_dim, in, rng));
  m.classifier = init_layer(num_classes, embedding_dim, rng);
  return m;
}

GradBundle GradBundle::zeros_like(const ModelBundle& m) {
  GradBundle g;
  for (const auto& l : m.extractor) {
    g.extractor.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                           Eigen::VectorXd::Zero(l.b.size())});
  }
  g.classifier = {Eigen::MatrixXd::Zero(m.classifier.W.rows(), m.classifier.W.cols()),
                  Eigen::VectorXd::Zero(m.classifier.b.size())};
  return g;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward(const ModelBundle& m,
                                                    const Eigen::MatrixXd& X) {
  Trace t = run_forward(m, X);
  return {std::move(t.V), std::move(t.Z)};
}

GradBundle backward(const ModelBundle& m, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd* dV, const Eigen::MatrixXd* dZ,
                    bool freeze_extractor) {
  if (!dV && !dZ) throw Error("model: backward needs dV and/or dZ");
  Trace t = run_forward(m, X);
  GradBundle g = GradBundle::zeros_like(m);

  Eigen::MatrixXd gV = Eigen::MatrixXd::Zero(t.V.rows(), t.V.cols());
  if (dZ) {
    if (dZ->rows() != t.Z.rows() || dZ->cols() != t.Z.cols()) {
      throw Error("model: dZ shape mismatch");
    }
    g.classifier.W = dZ->transpose() * t.V;
    g.classifier.b = dZ->colwise().sum().transpose();
    gV += *dZ * m.classifier.W;
  }
  if (dV) {
    if (dV->rows() != t.V.rows() || dV->cols() != t.V.cols()) {
      throw Error("model: dV shape mismatch");
    }
    gV += *dV;
  }

  if (!freeze_extractor) {
    Eigen::MatrixXd grad = gV;
    for (std::size_t l = m.extractor.size(); l-- > 0;) {
      if (l + 1 < m.extractor.size()) {
        // ReLU mask; subgradient 0 at exactly 0.
        grad = grad.cwiseProduct(
            (t.pre[l].array() > 0.0).cast<double>().matrix());
      }
      g.extractor[l].W = grad.transpose() * t.inputs[l];
      g.extractor[l].b = grad.colwise().sum().transpose();
      if (l > 0) grad = grad * m.extractor[l].W;
    }
  }
  return g;
}

AdamState AdamState::like(const ModelBundle& m) {
  AdamState s;
  auto zeros = GradBundle::zeros_like(m);
  s.m_extractor = zeros.extractor;
  s.v_extractor = zeros.extractor;
  s.m_classifier = zeros.classifier;
  s.v_classifier = zeros.classifier;
  return s;
}

namespace {

void adam_update(Eigen::MatrixXd& p, Eigen::MatrixXd& m1, Eigen::MatrixXd& m2,
                 const Eigen::MatrixXd& g, const AdamState& s, double lr, double bc1,
                 double bc2) {
  m1 = s.beta1 * m1 + (1.0 - s.beta1) * g;
  m2 = s.beta2 * m2 + (1.0 - s.beta2) * g.cwiseProduct(g);
  Eigen::ArrayXXd mhat = m1.array() / bc1;
  Eigen::ArrayXXd vhat = m2.array() / bc2;
  p.array() -= lr * mhat / (vhat.sqrt() + s.eps);
}

void adam_update(Eigen::VectorXd& p, Eigen::VectorXd& m1, Eigen::VectorXd& m2,
                 const Eigen::VectorXd& g, const AdamState& s, double lr, double bc1,
                 double bc2) {
  m1 = s.beta1 * m1 + (1.0 - s.beta1) * g;
  m2 = s.beta2 * m2 + (1.0 - s.beta2) * g.cwiseProduct(g);
  Eigen::ArrayXd mhat = m1.array() / bc1;
  Eigen::ArrayXd vhat = m2.array() / bc2;
  p.array() -= lr * mhat / (vhat.sqrt() + s.eps);
}

}  // namespace

void adam_step(AdamState& state, ModelBundle& model, const GradBundle& grads, double lr,
               bool skip_extractor) {
  for (const auto& l : grads.extractor) check_finite(l.W, "extractor");
  check_finite(grads.classifier.W, "classifier");
  if (!grads.classifier.b.allFinite()) throw Error("model: non-finite gradient in classifier bias");

  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  if (!skip_extractor) {
    for (std::size_t l = 0; l < model.extractor.size(); ++l) {
      adam_update(model.extractor[l].W, state.m_extractor[l].W, state.v_extractor[l].W,
                  grads.extractor[l].W, state, lr, bc1, bc2);
      adam_update(model.extractor[l].b, state.m_extractor[l].b, state.v_extractor[l].b,
                  grads.extractor[l].b, state, lr, bc1, bc2);
    }
  }
  adam_update(model.classifier.W, state.m_classifier.W, state.v_classifier.W,
              grads.classifier.W, state, lr, bc1, bc2);
  adam_update(model.classifier.b, state.m_classifier.b, state.v_classifier.b,
              grads.classifier.b, state, lr, bc1, bc2);
}

void LrSchedule::step(double val_loss) {
  if (!std::isfinite(val_loss)) throw Error("schedule: non-finite validation loss");
  if (val_loss < best_val_loss - 1e-8) {
    best_val_loss = val_loss;
    epochs_since_improvement = 0;
    return;
  }
  epochs_since_improvement += 1;
  if (epochs_since_improvement >= patience) {
    lr = std::max(lr * factor, floor);
    epochs_since_improvement = 0;
  }
}

namespace {

void write_params(std::ofstream& os, const DenseLayer& l) {
  for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) {
      float v = static_cast<float>(l.W(r, c));
      os.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }
  for (Eigen::Index r = 0; r < l.b.size(); ++r) {
    float v = static_cast<float>(l.b[r]);
    os.write(reinterpret_cast<const char*>(&v), sizeof(float));
  }
}

void read_params(std::ifstream& is, DenseLayer& l) {
  auto rd = [&](double& dst) {
    float v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(float))) {
      throw Error("checkpoint: truncated parameter block");
    }
    dst = static_cast<double>(v);
  };
  for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < l.W.cols(); ++c) rd(l.W(r, c));
  }
  for (Eigen::Index r = 0; r < l.b.size(); ++r) rd(l.b[r]);
}

}  // namespace

void save_checkpoint(const ModelBundle& m, std::uint64_t seed, long step,
                     const std::filesystem::path& path) {
  json manifest;
  manifest["seed"] = seed;
  manifest["step"] = step;
  manifest["extractor"] = json::array();
  for (const auto& l : m.extractor) {
    manifest["extractor"].push_back({l.W.rows(), l.W.cols()});
  }
  manifest["classifier"] = {m.classifier.W.rows(), m.classifier.W.cols()};
  std::string mtxt = manifest.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot write " + path.string());
  std::uint64_t len = mtxt.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(mtxt.data(), static_cast<std::streamsize>(mtxt.size()));
  for (const auto& l : m.extractor) write_params(os, l);
  write_params(os, m.classifier);
}

ModelBundle load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed,
                            long* step) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot read " + path.string());
  std::uint64_t len = 0;
  if (!is.read(reinterpret_cast<char*>(&len), sizeof(len))) {
    throw Error("checkpoint: truncated header");
  }
  std::string mtxt(len, '\0');
  if (!is.read(mtxt.data(), static_cast<std::streamsize>(len))) {
    throw Error("checkpoint: truncated manifest");
  }
  json manifest;
  try {
    manifest = json::parse(mtxt);
  } catch (const json::parse_error& e) {
    throw Error("checkpoint: bad manifest: " + std::string(e.what()));
  }
  ModelBundle m;
  for (const auto& shp : manifest.at("extractor")) {
    DenseLayer l;
    l.W.resize(shp[0].get<Eigen::Index>(), shp[1].get<Eigen::Index>());
    l.b.resize(shp[0].get<Eigen::Index>());
    m.extractor.push_back(std::move(l));
  }
  m.classifier.W.resize(manifest.at("classifier")[0].get<Eigen::Index>(),
                        manifest.at("classifier")[1].get<Eigen::Index>());
  m.classifier.b.resize(manifest.at("classifier")[0].get<Eigen::Index>());
  for (auto& l : m.extractor) read_params(is, l);
  read_params(is, m.classifier);
  if (seed) *seed = manifest.at("seed").get<std::uint64_t>();
  if (step) *step = manifest.at("step").get<long>();
  return m;
}

}  // namespace ltml
