#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "amc/common/error.hpp"
#include "amc/modelcore/artifact.hpp"
#include "amc/modelcore/model.hpp"
#include "amc/modelcore/objective.hpp"
#include "amc/modelcore/optimizer.hpp"
#include "test_support.hpp"

using namespace amc;
using namespace amc::nn;
using amc::testing::central_diff;
using amc::testing::random_batch;
using amc::testing::random_vector;
using amc::testing::rel_err;

namespace {

constexpr Family kFamilies[] = {Family::mlp_small, Family::cnn_small, Family::cnn_wide,
                                Family::cnn_deep};

ArchDescriptor small_arch(Family f, Activation a = Activation::tanh) {
  return ArchDescriptor{f, a, 32, 7};
}

void train_steps(Model& m, const Batch& b, int steps) {
  Optimizer opt({OptimizerKind::sgd, 0.05}, m.param_count());
  std::vector<double> g(m.param_count());
  for (int s = 0; s < steps; ++s) {
    param_grad(m, b, g);
    opt.step(m.params(), g);
  }
}

void check_param_grad(const Model& m, const Batch& b) {
  std::vector<double> g(m.param_count());
  param_grad(m, b, g, Exec::serial);
  const std::vector<double> theta(m.params().begin(), m.params().end());
  auto f = [&](std::span<const double> t) { return m.net.loss(t, b, Loss::cross_entropy, Exec::serial); };
  std::mt19937_64 rng(17);
  for (int k = 0; k < 32; ++k) {
    const std::size_t i = rng() % theta.size();
    EXPECT_LE(rel_err(g[i], central_diff(f, theta, i), 1e-5), 1e-3)
        << family_name(m.arch.family) << " param " << i;
  }
}

void check_input_grad(const Model& m, const Batch& b) {
  const auto g = input_grad(m, b, Exec::serial);
  std::mt19937_64 rng(23);
  for (int k = 0; k < 32; ++k) {
    const std::size_t n = rng() % b.size();
    const std::size_t j = rng() % b.dim;
    auto f = [&](std::span<const double> x) {
      Batch one(b.dim, 1);
      std::copy(x.begin(), x.end(), one.x.begin());
      one.y[0] = b.y[n];
      return m.net.loss(one, Loss::cross_entropy, Exec::serial);
    };
    const std::vector<double> x(b.frame(n).begin(), b.frame(n).end());
    EXPECT_LE(rel_err(g[n * b.dim + j], central_diff(f, x, j), 1e-5), 1e-3)
        << family_name(m.arch.family) << " frame " << n << " coord " << j;
  }
}

}  // namespace

TEST(Model, ParamCeilingAndFeatureDim) {
  for (auto fam : kFamilies)
    for (auto act : {Activation::relu, Activation::tanh}) {
      const auto m = make_model({fam, act, 128, 7}, 1);
      EXPECT_LE(m.param_count(), kMaxParams);
      EXPECT_GE(m.feature_dim(), 8u);
      EXPECT_EQ(m.net.output_shape().size(), 7u);
    }
}

TEST(Model, FamiliesAreDistinct) {
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      const auto ma = make_model({kFamilies[a]}, 1);
      const auto mb = make_model({kFamilies[b]}, 1);
      bool differ = ma.net.layer_count() != mb.net.layer_count();
      for (std::size_t i = 0; !differ && i < ma.net.layer_count(); ++i)
        differ = ma.net.layer(i).kind() != mb.net.layer(i).kind() ||
                 ma.net.shape_after(i + 1).size() != mb.net.shape_after(i + 1).size();
      EXPECT_TRUE(differ);
    }
}

TEST(Model, ForwardShapeAndSoftmax) {
  const auto m = make_model({Family::cnn_small}, 3);
  const auto b = random_batch(256, 5, 7, 1);
  const auto logits = forward(m, b);
  ASSERT_EQ(logits.size(), 5u * 7u);
  for (std::size_t i = 0; i < 5; ++i) {
    double mx = -1e300, s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) mx = std::max(mx, logits[i * 7 + c]);
    for (std::size_t c = 0; c < 7; ++c) s += std::exp(logits[i * 7 + c] - mx);
    double sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) sum += std::exp(logits[i * 7 + c] - mx) / s;
    EXPECT_NEAR(sum, 1.0, 1e-6);
    for (std::size_t c = 0; c < 7; ++c) EXPECT_TRUE(std::isfinite(logits[i * 7 + c]));
  }
}

TEST(Model, ShapeMismatch) {
  const auto m = make_model({Family::cnn_small}, 3);
  const auto b = random_batch(200, 2, 7, 1);
  EXPECT_THROW(forward(m, b), InputShapeError);
}

TEST(Model, ZeroFinalLayerUniform) {
  auto m = make_model({Family::mlp_small}, 3);
  const std::size_t off = m.net.param_offset(m.net.layer_count() - 1);
  for (std::size_t i = off; i < m.param_count(); ++i) m.params()[i] = 0.0;
  const auto b = random_batch(256, 3, 7, 2);
  const auto logits = forward(m, b);
  for (double z : logits) EXPECT_EQ(z, 0.0);
  EXPECT_NEAR(loss_ce(logits, b.y, 7), std::log(7.0), 1e-12);
}

TEST(Model, DuplicatedFramesIdentical) {
  const auto m = make_model({Family::cnn_deep}, 4);
  auto b = random_batch(256, 1, 7, 3);
  b.push_back(b.frame(0), b.y[0]);
  const auto logits = forward(m, b);
  for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(logits[c], logits[7 + c]);
  const auto g = input_grad(m, b);
  for (std::size_t j = 0; j < 256; ++j) EXPECT_EQ(g[j], g[256 + j]);
}

TEST(LossCe, UniformIsLog7) {
  const std::vector<double> z(7, 0.3);
  for (int y = 0; y < 7; ++y) EXPECT_NEAR(loss_ce(z, std::vector<int>{y}, 7), std::log(7.0), 1e-12);
}

TEST(LossCe, MarginLimitAndMean) {
  std::vector<double> z(7, 0.0);
  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 60.0}) {
    z[2] = margin;
    const double l = loss_ce(z, std::vector<int>{2}, 7);
    EXPECT_LT(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  EXPECT_LT(prev, 1e-20);
  const std::vector<double> two{1, 2, 3, 4, 5, 6, 7, 7, 6, 5, 4, 3, 2, 1};
  const double a = loss_ce(std::span(two).first(7), std::vector<int>{0}, 7);
  const double b = loss_ce(std::span(two).last(7), std::vector<int>{4}, 7);
  EXPECT_NEAR(loss_ce(two, std::vector<int>{0, 4}, 7), 0.5 * (a + b), 1e-14);
}

TEST(LossCe, LabelOutOfRange) {
  const std::vector<double> z(7, 0.0);
  EXPECT_THROW(loss_ce(z, std::vector<int>{7}, 7), InputError);
  EXPECT_THROW(loss_ce(z, std::vector<int>{-1}, 7), InputError);
}

TEST(InputGrad, LinearTwoClassClosedForm) {
  // z = W x + b with two classes: dL/dx = (p - onehot(y))^T W, computed here
  // by hand from the softmax probabilities.
  Sequential net(Shape{1, 4});
  net.dense(2);
  const std::vector<double> w{0.5, -1.0, 0.25, 2.0, -0.75, 0.1, 1.5, -0.3, 0.2, -0.4};
  net.set_params(w);
  Batch b(4, 1);
  b.x = {0.3, -0.2, 1.1, 0.7};
  b.y = {1};
  double z0 = w[8], z1 = w[9];
  for (int j = 0; j < 4; ++j) {
    z0 += w[j] * b.x[j];
    z1 += w[4 + j] * b.x[j];
  }
  const double p0 = 1.0 / (1.0 + std::exp(z1 - z0));
  const double p1 = 1.0 - p0;
  std::vector<double> gx(4);
  net.input_grads(net.params(), b, Loss::cross_entropy, gx);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(gx[j], p0 * w[j] + (p1 - 1.0) * w[4 + j], 1e-14);
}

TEST(Gradients, FiniteDifferenceAllFamilies) {
  for (auto fam : kFamilies)
    for (auto act : {Activation::tanh, Activation::relu}) {
      auto m = make_model(small_arch(fam, act), 5);
      const auto b = random_batch(64, 6, 7, 7);
      check_param_grad(m, b);
      check_input_grad(m, b);
      train_steps(m, b, 10);
      check_param_grad(m, b);
      check_input_grad(m, b);
    }
}

TEST(Gradients, MeanOfPerFrameGradients) {
  const auto m = make_model(small_arch(Family::cnn_small), 8);
  const auto b = random_batch(64, 4, 7, 9);
  std::vector<double> g(m.param_count()), acc(m.param_count(), 0.0), gi(m.param_count());
  param_grad(m, b, g, Exec::serial);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::vector<std::size_t> idx{i};
    param_grad(m, select(b, idx), gi, Exec::serial);
    for (std::size_t k = 0; k < gi.size(); ++k) acc[k] += gi[k] / 4.0;
  }
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], acc[k], 1e-12);
}

TEST(Gradients, SelfLabelsAtHighTemperatureVanish) {
  // Scaling the final layer makes softmax one-hot on the model's own argmax,
  // so cross-entropy against those labels has a vanishing gradient.
  auto m = make_model(small_arch(Family::mlp_small), 10);
  auto b = random_batch(64, 4, 7, 11);
  const std::size_t off = m.net.param_offset(m.net.layer_count() - 1);
  for (std::size_t i = off; i < m.param_count(); ++i) m.params()[i] *= 1e4;
  b.y = predict(m, b);
  std::vector<double> g(m.param_count());
  param_grad(m, b, g);
  EXPECT_LT(std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0)), 1e-6);
}

TEST(Hvp, MatchesFiniteDifference) {
  for (auto fam : kFamilies) {
    const auto m = make_model(small_arch(fam), 12);
    const auto b = random_batch(64, 5, 7, 13);
    const auto v = random_vector(m.param_count(), 14);
    const auto hv = hvp(m, b, v, Exec::serial);
    BatchObjective obj(m.net, b, Loss::cross_entropy, Exec::serial);
    const auto fd = fd_hvp(obj, m.params(), v);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < hv.size(); ++i) {
      num += (hv[i] - fd[i]) * (hv[i] - fd[i]);
      den += fd[i] * fd[i];
    }
    EXPECT_LE(std::sqrt(num / den), 1e-2) << family_name(fam);
  }
}

TEST(Hvp, ZeroVector) {
  const auto m = make_model(small_arch(Family::cnn_wide), 15);
  const auto b = random_batch(64, 3, 7, 16);
  for (double h : hvp(m, b, std::vector<double>(m.param_count(), 0.0))) EXPECT_EQ(h, 0.0);
}

TEST(Hvp, QuadraticIsExact) {
  const std::vector<double> a{2.0, 0.5, 0.0, 0.5, 1.0, -0.25, 0.0, -0.25, 3.0};
  QuadraticObjective q(a, {0.0, 0.0, 0.0});
  const std::vector<double> theta{1.0, 2.0, 3.0}, v{0.5, -1.0, 2.0};
  std::vector<double> out(3);
  q.hvp(theta, v, out);
  EXPECT_DOUBLE_EQ(out[0], 2.0 * 0.5 + 0.5 * -1.0);
  EXPECT_DOUBLE_EQ(out[1], 0.5 * 0.5 - 1.0 - 0.25 * 2.0);
  EXPECT_DOUBLE_EQ(out[2], 0.25 + 6.0);
}

TEST(Grl, Definition) {
  const std::vector<double> g{1.0, -2.0, 0.5};
  const auto neg = grl_apply(g, 1.0);
  const auto zero = grl_apply(g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(neg[i], -g[i]);
    EXPECT_EQ(zero[i], 0.0);
  }
  GradientReversal grl{0.7};
  const auto same = grl.forward(g);
  EXPECT_EQ(same.data(), g.data());
}

TEST(Grl, CompositeThroughFeatureExtractor) {
  // Discriminator loss on G_f features, backpropagated to theta_f through the
  // reversal layer, equals -lambda times the plain gradient, which is itself
  // checked against finite differences.
  const auto m = make_model(small_arch(Family::mlp_small), 18);
  const auto b = random_batch(64, 4, 7, 19);
  auto disc = make_discriminator(m.feature_dim(), 8, 20);
  const double lambda = 0.6;

  const auto feats = features(m, b, Exec::serial);
  Batch fb(m.feature_dim(), b.size());
  fb.x = feats;
  for (std::size_t i = 0; i < b.size(); ++i) fb.y[i] = static_cast<int>(i % 2);
  std::vector<double> dfeat(feats.size());
  disc.net.input_grads(disc.net.params(), fb, Loss::logistic, dfeat, Exec::serial);
  for (auto& d : dfeat) d /= static_cast<double>(b.size());

  std::vector<double> plain(m.param_count(), 0.0);
  m.net.backward_prefix(m.params(), m.split_point, b, dfeat, plain, Exec::serial);
  GradientReversal grl{lambda};
  grl.backward(dfeat);
  std::vector<double> reversed(m.param_count(), 0.0);
  m.net.backward_prefix(m.params(), m.split_point, b, dfeat, reversed, Exec::serial);

  auto domain_loss = [&](std::span<const double> theta) {
    Batch f2(m.feature_dim(), b.size());
    f2.x = m.net.outputs_prefix(theta, m.split_point, b, Exec::serial);
    f2.y = fb.y;
    return disc.net.loss(f2, Loss::logistic, Exec::serial);
  };
  const std::vector<double> theta(m.params().begin(), m.params().end());
  const std::size_t feat_params = m.net.param_offset(m.split_point);
  std::mt19937_64 rng(21);
  for (int k = 0; k < 16; ++k) {
    const std::size_t i = rng() % feat_params;
    EXPECT_LE(rel_err(plain[i], central_diff(domain_loss, theta, i), 1e-6), 1e-3);
    EXPECT_NEAR(reversed[i], -lambda * plain[i], 1e-15);
  }
  for (std::size_t i = feat_params; i < m.param_count(); ++i) EXPECT_EQ(plain[i], 0.0);
}

TEST(Discriminator, SingleLogit) {
  const auto d = make_discriminator(32, 16, 1);
  EXPECT_EQ(d.net.output_shape().size(), 1u);
  EXPECT_EQ(d.input_dim(), 32u);
}

TEST(Exec, SerialMatchesParallel) {
  const auto m = make_model({Family::cnn_small}, 22);
  const auto b = random_batch(256, 37, 7, 23);
  EXPECT_EQ(forward(m, b, Exec::serial), forward(m, b, Exec::parallel));
  EXPECT_EQ(input_grad(m, b, Exec::serial), input_grad(m, b, Exec::parallel));
  std::vector<double> gs(m.param_count()), gp(m.param_count());
  EXPECT_EQ(param_grad(m, b, gs, Exec::serial), param_grad(m, b, gp, Exec::parallel));
  EXPECT_EQ(gs, gp);
  const auto v = random_vector(m.param_count(), 24);
  EXPECT_EQ(hvp(m, b, v, Exec::serial), hvp(m, b, v, Exec::parallel));
}

TEST(Model, InitDeterministicAndSeedSensitive) {
  const auto a = make_model({Family::cnn_wide}, 5);
  const auto b = make_model({Family::cnn_wide}, 5);
  const auto c = make_model({Family::cnn_wide}, 6);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(Optimizer, SgdAndAdamDescend) {
  const auto q = QuadraticObjective::isotropic(3, 2.0);
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    std::vector<double> theta{1.0, -2.0, 0.5}, g(3);
    Optimizer opt({kind, 0.05}, 3);
    const double start = q.value(theta);
    for (int i = 0; i < 200; ++i) {
      q.value_grad(theta, g);
      opt.step(theta, g);
    }
    EXPECT_LT(q.value(theta), 1e-2 * start);
  }
}

TEST(Artifact, RoundTripBitExact) {
  auto m = make_model({Family::cnn_deep, Activation::tanh, 128, 7}, 25);
  round_to_f32(m);
  const auto art = make_artifact(m, Provenance{"abc123", {1, 2, 3}, "meta", ""});
  const auto path = std::filesystem::temp_directory_path() / "amc_modelcore_test" / "m.amcw";
  save_artifact(path, art);
  const auto back = load_artifact(path);
  EXPECT_EQ(back, art);
  const auto m2 = to_model(back);
  EXPECT_TRUE(std::equal(m.params().begin(), m.params().end(), m2.params().begin()));
  EXPECT_EQ(m2.arch, m.arch);
}

TEST(Artifact, CorruptFails) {
  const auto m = make_model({Family::mlp_small}, 26);
  auto bytes = encode_artifact(make_artifact(m, {}));
  auto bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_artifact(bad), FormatError);
  bad = bytes;
  bad.resize(bad.size() - 3);
  EXPECT_THROW(decode_artifact(bad), FormatError);
  bad = bytes;
  bad[6] = 9;
  EXPECT_THROW(decode_artifact(bad), FormatError);
}
