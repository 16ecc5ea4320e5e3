#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "amc/common/error.hpp"
#include "amc/modelcore/objective.hpp"
#include "amc/offline/meta.hpp"
#include "amc/offline/strategy.hpp"
#include "test_support.hpp"

using namespace amc;
using namespace amc::off;
using amc::testing::central_diff;
using amc::testing::random_batch;
using amc::testing::rel_err;

namespace {

std::vector<const nn::Objective*> repeat(const nn::Objective& o, std::size_t k) {
  return std::vector<const nn::Objective*>(k, &o);
}

// 4 -> 3 -> 3 tanh network: 27 parameters.
nn::Sequential toy_net(std::uint64_t seed) {
  nn::Sequential net(nn::Shape{4, 1});
  net.dense(3).tanh().dense(3);
  net.init(seed);
  return net;
}

class NanObjective final : public nn::Objective {
 public:
  std::size_t dim() const override { return 1; }
  double value(std::span<const double>) const override { return std::numeric_limits<double>::quiet_NaN(); }
  double value_grad(std::span<const double>, std::span<double> g) const override {
    g[0] = std::numeric_limits<double>::quiet_NaN();
    return value({});
  }
  void hvp(std::span<const double>, std::span<const double>, std::span<double> out) const override {
    out[0] = 0.0;
  }
};

nn::ArchDescriptor tiny_arch() { return {nn::Family::mlp_small, nn::Activation::tanh, 32, 7}; }

std::vector<TaskData> random_tasks(std::size_t n, std::uint64_t seed) {
  std::vector<TaskData> out;
  for (std::size_t t = 0; t < n; ++t) {
    TaskData td;
    td.task.id = static_cast<std::uint32_t>(t);
    td.clean = random_batch(64, 40, 7, seed + t);
    td.adv = random_batch(64, 40, 7, seed + 100 + t);
    td.adv.y = td.clean.y;
    out.push_back(std::move(td));
  }
  return out;
}

}  // namespace

TEST(MetaClosedForm, OneInnerStepOnHalfSquare) {
  const auto q = nn::QuadraticObjective::isotropic(1);
  for (double theta : {3.0, -1.25, 0.7}) {
    for (double alpha : {0.1, 0.5, 0.9}) {
      const std::vector<double> t{theta};
      const auto sup = repeat(q, 1);
      const auto maml = meta_gradient(MetaAlgo::maml, t, sup, q, alpha);
      const auto fo = meta_gradient(MetaAlgo::fomaml, t, sup, q, alpha);
      EXPECT_NEAR(maml.direction[0], (1 - alpha) * (1 - alpha) * theta, 1e-9);
      EXPECT_NEAR(fo.direction[0], (1 - alpha) * theta, 1e-9);
      EXPECT_NEAR(maml.adapted[0], (1 - alpha) * theta, 1e-12);
    }
  }
}

TEST(MetaClosedForm, KInnerStepsMultiDim) {
  const auto q = nn::QuadraticObjective::isotropic(5);
  const std::vector<double> t{1.0, -2.0, 0.5, 3.0, 0.0};
  const double alpha = 0.2;
  for (std::size_t k : {2u, 4u}) {
    const auto sup = repeat(q, k);
    const double shrink = std::pow(1 - alpha, static_cast<double>(k));
    const auto maml = meta_gradient(MetaAlgo::maml, t, sup, q, alpha);
    const auto fo = meta_gradient(MetaAlgo::fomaml, t, sup, q, alpha);
    const auto rep = meta_gradient(MetaAlgo::reptile, t, sup, q, alpha);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_NEAR(maml.direction[i], shrink * shrink * t[i], 1e-12);
      EXPECT_NEAR(fo.direction[i], shrink * t[i], 1e-12);
      EXPECT_NEAR(rep.direction[i], (1 - shrink) * t[i], 1e-12);
    }
  }
}

TEST(MetaClosedForm, ZeroInnerStepsMamlEqualsFomaml) {
  const auto net = toy_net(3);
  const auto q = random_batch(4, 10, 3, 5);
  const nn::BatchObjective qo(net, q);
  const std::vector<double> t(net.params().begin(), net.params().end());
  const std::vector<const nn::Objective*> none;
  const auto maml = meta_gradient(MetaAlgo::maml, t, none, qo, 0.3);
  const auto fo = meta_gradient(MetaAlgo::fomaml, t, none, qo, 0.3);
  std::vector<double> g(t.size());
  qo.value_grad(t, g);
  EXPECT_EQ(maml.direction, fo.direction);
  EXPECT_EQ(maml.direction, g);
  const auto rep = meta_gradient(MetaAlgo::reptile, t, none, qo, 0.3);
  for (double d : rep.direction) EXPECT_EQ(d, 0.0);
}

TEST(MetaGradient, MamlMatchesFiniteDifferenceOfBilevelObjective) {
  const auto net = toy_net(11);
  ASSERT_LE(net.param_count(), 50u);
  const auto s1 = random_batch(4, 12, 3, 21);
  const auto s2 = random_batch(4, 12, 3, 22);
  const auto qb = random_batch(4, 12, 3, 23);
  const nn::BatchObjective o1(net, s1, nn::Loss::cross_entropy, Exec::serial);
  const nn::BatchObjective o2(net, s2, nn::Loss::cross_entropy, Exec::serial);
  const nn::BatchObjective qo(net, qb, nn::Loss::cross_entropy, Exec::serial);
  const std::vector<const nn::Objective*> sup{&o1, &o2};
  const double alpha = 0.4;
  const std::vector<double> t(net.params().begin(), net.params().end());

  auto bilevel = [&](std::span<const double> th) {
    std::vector<double> cur(th.begin(), th.end()), g(cur.size());
    for (const auto* o : sup) {
      o->value_grad(cur, g);
      for (std::size_t k = 0; k < cur.size(); ++k) cur[k] -= alpha * g[k];
    }
    return qo.value(cur);
  };
  const auto maml = meta_gradient(MetaAlgo::maml, t, sup, qo, alpha);
  EXPECT_NEAR(maml.query_loss, bilevel(t), 1e-12);
  double max_err = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    max_err = std::max(max_err, rel_err(maml.direction[i], central_diff(bilevel, t, i), 1e-6));
  EXPECT_LE(max_err, 1e-3);

  // The first-order direction drops the curvature terms and differs.
  const auto fo = meta_gradient(MetaAlgo::fomaml, t, sup, qo, alpha);
  double diff = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) diff = std::max(diff, std::abs(fo.direction[i] - maml.direction[i]));
  EXPECT_GT(diff, 1e-6);
}

TEST(MetaGradient, NonFiniteInnerLossIsFlagged) {
  const NanObjective bad;
  const auto q = nn::QuadraticObjective::isotropic(1);
  const std::vector<double> t{1.0};
  const std::vector<const nn::Objective*> sup{&bad};
  const auto step = meta_gradient(MetaAlgo::maml, t, sup, q, 0.1);
  EXPECT_TRUE(step.diverged);
  EXPECT_TRUE(step.direction.empty());
}

TEST(MetaAlgo, NamesRoundTrip) {
  for (auto a : {MetaAlgo::maml, MetaAlgo::fomaml, MetaAlgo::reptile})
    EXPECT_EQ(parse_meta_algo(meta_algo_name(a)), a);
  EXPECT_FALSE(parse_meta_algo("anil").has_value());
}

TEST(AdaptInner, ZeroStepSizeAndComposition) {
  const auto m = nn::make_model(tiny_arch(), 4);
  const auto b = random_batch(64, 30, 7, 8);
  const auto same = adapt_inner(m, b, 0.0, 3);
  EXPECT_TRUE(std::equal(same.params().begin(), same.params().end(), m.params().begin()));
  const auto two = adapt_inner(m, b, 0.05, 2);
  const auto one_one = adapt_inner(adapt_inner(m, b, 0.05, 1), b, 0.05, 1);
  EXPECT_TRUE(std::equal(two.params().begin(), two.params().end(), one_one.params().begin()));
  const auto five = adapt_inner(m, b, 0.05, 5);
  EXPECT_LT(five.net.loss(b, nn::Loss::cross_entropy), m.net.loss(b, nn::Loss::cross_entropy));
  EXPECT_THROW(adapt_inner(m, nn::Batch{}, 0.1, 1), ConfigError);
}

TEST(MixedLoss, DegenerateWeightsAreExact) {
  const auto m = nn::make_model(tiny_arch(), 5);
  const auto clean = random_batch(64, 16, 7, 1);
  const auto adv = random_batch(64, 16, 7, 2);
  const std::size_t n = m.param_count();
  std::vector<double> g(n), gc(n), ga(n), gm(n);
  const double lc = nn::param_grad(m, clean, gc);
  const double la = nn::param_grad(m, adv, ga);
  EXPECT_EQ(mixed_loss_grad(m, clean, adv, 1.0, g), lc);
  EXPECT_EQ(g, gc);
  EXPECT_EQ(mixed_loss_grad(m, clean, adv, 0.0, g), la);
  EXPECT_EQ(g, ga);
  const double lm = mixed_loss_grad(m, clean, adv, 0.25, gm);
  EXPECT_NEAR(lm, 0.25 * lc + 0.75 * la, 1e-12);
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(gm[k], 0.25 * gc[k] + 0.75 * ga[k], 1e-12);
}

TEST(Strategy, NamesAndValidation) {
  for (auto s : kAllStrategies) EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_EQ(parse_strategy("meta_adversarial"), Strategy::meta_adversarial);
  EXPECT_FALSE(parse_strategy("transfer").has_value());
  OfflineConfig cfg;
  cfg.mix_weight = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.support_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.inner_lr = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Strategy, EmptyTaskPoolRejected) {
  OfflineConfig cfg;
  const std::vector<TaskData> none;
  EXPECT_THROW(meta_train(tiny_arch(), none, cfg), ConfigError);
  EXPECT_THROW(train_adversarial(tiny_arch(), none, 100, cfg), ConfigError);
}

TEST(Strategy, SharedInitialization) {
  OfflineConfig cfg;
  cfg.seed = 77;
  const auto a = train_scratch(tiny_arch(), cfg).model;
  const auto b = initial_model(tiny_arch(), cfg);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  cfg.seed = 78;
  const auto c = initial_model(tiny_arch(), cfg);
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(Strategy, MetaTrainDeterministicAndLogged) {
  const auto tasks = random_tasks(3, 40);
  OfflineConfig cfg;
  cfg.strategy = Strategy::meta_adversarial;
  cfg.outer_iters = 12;
  cfg.meta_batch = 2;
  cfg.inner_steps = 2;
  cfg.inner_batch = 8;
  cfg.query_batch = 8;
  cfg.seed = 9;
  for (auto algo : {MetaAlgo::maml, MetaAlgo::fomaml, MetaAlgo::reptile}) {
    cfg.meta_algo = algo;
    const auto r1 = meta_train(tiny_arch(), tasks, cfg);
    const auto r2 = meta_train(tiny_arch(), tasks, cfg, Exec::serial);
    EXPECT_TRUE(std::equal(r1.model.params().begin(), r1.model.params().end(), r2.model.params().begin()))
        << meta_algo_name(algo);
    ASSERT_EQ(r1.log.size(), cfg.outer_iters * cfg.meta_batch);
    for (const auto& row : r1.log) {
      EXPECT_TRUE(std::isfinite(row.support_loss));
      EXPECT_TRUE(std::isfinite(row.query_loss));
      EXPECT_LT(row.task_id, 3);
    }
    const auto init = initial_model(tiny_arch(), cfg);
    EXPECT_FALSE(std::equal(init.params().begin(), init.params().end(), r1.model.params().begin()));
  }
}

TEST(Strategy, AdversarialStepCountAndDeterminism) {
  const auto tasks = random_tasks(2, 70);
  OfflineConfig cfg;
  cfg.strategy = Strategy::adversarial;
  cfg.fit.epochs = 3;
  cfg.fit.batch_size = 16;
  cfg.seed = 3;
  const auto r1 = train_adversarial(tiny_arch(), tasks, 48, cfg);
  const auto r2 = train_adversarial(tiny_arch(), tasks, 48, cfg);
  EXPECT_EQ(r1.log.size(), 3u);  // 3 steps per epoch
  EXPECT_TRUE(std::equal(r1.model.params().begin(), r1.model.params().end(), r2.model.params().begin()));
}

TEST(Strategy, CleanTrainingLossDecreases) {
  sig::DomainSpec spec{sig::ChannelProfile::source_default(), sig::Domain::source, 32, 40, 10, 0};
  const auto sets = sig::build_domain(spec, 5);
  OfflineConfig cfg;
  cfg.fit.epochs = 6;
  cfg.fit.batch_size = 32;
  cfg.fit.optimizer.lr = 3e-3;
  cfg.seed = 1;
  const auto r = train_clean(tiny_arch(), sets[0], cfg);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_LT(r.log.back().support_loss, r.log.front().support_loss);
  EXPECT_GE(r.wall_seconds, 0.0);
}
