#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amc/modelcore/sequential.hpp"

namespace amc::nn {

enum class Family : std::uint8_t { mlp_small = 0, cnn_small, cnn_wide, cnn_deep };
enum class Activation : std::uint8_t { relu = 0, tanh };

inline constexpr std::size_t kNumFamilies = 4;
inline constexpr std::size_t kMaxParams = 200'000;

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);
std::string_view activation_name(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

struct ArchDescriptor {
  Family family = Family::cnn_small;
  Activation activation = Activation::relu;
  std::uint16_t frame_len = 128;
  std::uint16_t num_classes = 7;

  bool operator==(const ArchDescriptor&) const = default;
};

// A classifier f: R^{2 x frame_len} -> R^{num_classes}. The first
// `split_point` layers form the feature extractor G_f; the remaining
// layers (the final linear layer) form the label predictor G_y.
struct Model {
  ArchDescriptor arch;
  Sequential net;
  std::size_t split_point = 0;

  std::size_t param_count() const { return net.param_count(); }
  std::size_t feature_dim() const { return net.shape_after(split_point).size(); }
  std::span<const double> params() const { return net.params(); }
  std::span<double> params() { return net.params(); }
};

// Builds the family's layer stack with split_point at the penultimate layer
// boundary. Parameters are initialized from `seed`.
Model make_model(const ArchDescriptor& arch, std::uint64_t seed);

// Logits (N x C) for a batch.
std::vector<double> forward(const Model& m, const Batch& b, Exec exec = Exec::parallel);
std::vector<int> predict(const Model& m, const Batch& b, Exec exec = Exec::parallel);
double accuracy(const Model& m, const Batch& b, Exec exec = Exec::parallel);

// Mean softmax cross-entropy of logits (N x C) against labels.
double loss_ce(std::span<const double> logits, std::span<const int> labels, std::size_t classes);

// Gradient of frame i's cross-entropy w.r.t. its input, for every frame.
std::vector<double> input_grad(const Model& m, const Batch& b, Exec exec = Exec::parallel);
// Mean parameter gradient; returns the mean loss.
double param_grad(const Model& m, const Batch& b, std::span<double> grad,
                  Exec exec = Exec::parallel);
std::vector<double> hvp(const Model& m, const Batch& b, std::span<const double> v,
                        Exec exec = Exec::parallel);

// G_f outputs (N x feature_dim).
std::vector<double> features(const Model& m, const Batch& b, Exec exec = Exec::parallel);

// Binary source-vs-target classifier on G_f features: a two-layer
// perceptron emitting one logit (1 = target).
struct DomainDiscriminator {
  Sequential net;
  std::size_t input_dim() const { return net.input_shape().size(); }
};

DomainDiscriminator make_discriminator(std::size_t feature_dim, std::size_t hidden,
                                       std::uint64_t seed);

// Identity on the forward path; scales the backward gradient by -weight.
struct GradientReversal {
  double weight = 1.0;

  std::span<const double> forward(std::span<const double> x) const { return x; }
  void backward(std::span<double> g) const;
};

// Returns -lambda * g.
std::vector<double> grl_apply(std::span<const double> g, double lambda);

}  // namespace amc::nn
