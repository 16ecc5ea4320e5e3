#include "amc/modelcore/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "amc/common/error.hpp"

namespace amc::nn {
namespace {

constexpr std::array<std::string_view, kNumFamilies> kFamilyNames = {"mlp_small", "cnn_small",
                                                                     "cnn_wide", "cnn_deep"};

void activate(Sequential& s, Activation a) {
  if (a == Activation::relu)
    s.relu();
  else
    s.tanh();
}

}  // namespace

std::string_view family_name(Family f) { return kFamilyNames.at(static_cast<std::size_t>(f)); }

std::optional<Family> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
    if (kFamilyNames[i] == name) return static_cast<Family>(i);
  return std::nullopt;
}

std::string_view activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  return std::nullopt;
}

Model make_model(const ArchDescriptor& arch, std::uint64_t seed) {
  if (arch.frame_len < 16 || arch.frame_len % 16 != 0)
    throw ConfigError("make_model: frame_len must be a positive multiple of 16");
  if (arch.num_classes < 2) throw ConfigError("make_model: need at least two classes");
  Model m;
  m.arch = arch;
  Sequential s(Shape{2, arch.frame_len});
  const auto act = arch.activation;
  switch (arch.family) {
    case Family::mlp_small:
      s.dense(64);
      activate(s, act);
      s.dense(32);
      activate(s, act);
      break;
    case Family::cnn_small:
      s.conv1d(16, 7);
      activate(s, act);
      s.avgpool(4);
      s.conv1d(16, 5);
      activate(s, act);
      s.avgpool(4);
      s.dense(32);
      activate(s, act);
      break;
    case Family::cnn_wide:
      s.conv1d(32, 9);
      activate(s, act);
      s.avgpool(8);
      s.dense(32);
      activate(s, act);
      break;
    case Family::cnn_deep:
      for (std::size_t ch : {8, 8, 16, 16}) {
        s.conv1d(ch, 3);
        activate(s, act);
        s.avgpool(2);
      }
      s.dense(32);
      activate(s, act);
      break;
  }
  m.split_point = s.layer_count();
  s.dense(arch.num_classes);
  s.init(seed);
  m.net = std::move(s);
  if (m.net.param_count() > kMaxParams) throw ConfigError("make_model: parameter budget exceeded");
  return m;
}

std::vector<double> forward(const Model& m, const Batch& b, Exec exec) {
  return m.net.outputs(b, exec);
}

std::vector<int> predict(const Model& m, const Batch& b, Exec exec) {
  const auto logits = forward(m, b, exec);
  const std::size_t c = m.arch.num_classes;
  std::vector<int> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto first = logits.begin() + static_cast<std::ptrdiff_t>(i * c);
    out[i] = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(c)) - first);
  }
  return out;
}

double accuracy(const Model& m, const Batch& b, Exec exec) {
  if (b.empty()) return 0.0;
  const auto pred = predict(m, b, exec);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == b.y[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

double loss_ce(std::span<const double> logits, std::span<const int> labels, std::size_t classes) {
  if (logits.size() != labels.size() * classes) throw InputShapeError("loss_ce: shape mismatch");
  if (labels.empty()) return 0.0;
  std::vector<double> dz(classes);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total += loss_head(Loss::cross_entropy, logits.subspan(i * classes, classes), labels[i], dz);
  return total / static_cast<double>(labels.size());
}

std::vector<double> input_grad(const Model& m, const Batch& b, Exec exec) {
  std::vector<double> g(b.x.size());
  m.net.input_grads(m.net.params(), b, Loss::cross_entropy, g, exec);
  return g;
}

double param_grad(const Model& m, const Batch& b, std::span<double> grad, Exec exec) {
  return m.net.loss_grad(b, Loss::cross_entropy, grad, exec);
}

std::vector<double> hvp(const Model& m, const Batch& b, std::span<const double> v, Exec exec) {
  std::vector<double> out(m.param_count());
  m.net.hvp(m.net.params(), b, Loss::cross_entropy, v, out, exec);
  return out;
}

std::vector<double> features(const Model& m, const Batch& b, Exec exec) {
  return m.net.outputs_prefix(m.net.params(), m.split_point, b, exec);
}

DomainDiscriminator make_discriminator(std::size_t feature_dim, std::size_t hidden,
                                       std::uint64_t seed) {
  DomainDiscriminator d;
  d.net = Sequential(Shape{feature_dim, 1});
  d.net.dense(hidden).relu().dense(1);
  d.net.init(seed);
  return d;
}

void GradientReversal::backward(std::span<double> g) const {
  for (auto& v : g) v *= -weight;
}

std::vector<double> grl_apply(std::span<const double> g, double lambda) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = -lambda * g[i];
  return out;
}

}  // namespace amc::nn
