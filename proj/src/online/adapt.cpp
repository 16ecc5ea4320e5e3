#include "amc/online/adapt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "amc/common/bytes.hpp"
#include "amc/common/clock.hpp"
#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"
#include "amc/modelcore/training.hpp"

namespace amc::onl {
namespace {

constexpr std::array<std::string_view, 3> kOnlineNames = {"none", "finetune", "dann"};
constexpr std::uint64_t kFinetuneStream = 0x20;
constexpr std::uint64_t kDiscInitStream = 0x21;
constexpr std::uint64_t kDannStream = 0x22;

double relative_change(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

nn::Batch domain_batch(std::span<const double> fs, std::span<const double> ft, std::size_t dim) {
  nn::Batch d;
  d.dim = dim;
  d.x.assign(fs.begin(), fs.end());
  d.x.insert(d.x.end(), ft.begin(), ft.end());
  d.y.assign(fs.size() / dim, 0);
  d.y.resize(d.y.size() + ft.size() / dim, 1);
  return d;
}

}  // namespace

std::string_view online_name(OnlineStrategy s) { return kOnlineNames.at(static_cast<std::size_t>(s)); }

std::optional<OnlineStrategy> parse_online(std::string_view name) {
  for (std::size_t i = 0; i < kOnlineNames.size(); ++i)
    if (kOnlineNames[i] == name) return static_cast<OnlineStrategy>(i);
  if (name == "standard" || name == "ft") return OnlineStrategy::finetune;
  if (name == "da") return OnlineStrategy::dann;
  return std::nullopt;
}

void OnlineConfig::validate() const {
  if (!(ft_lr >= 0.0) || !(dann_lr >= 0.0) || !(disc_lr >= 0.0))
    throw ConfigError("online: learning rates must be non-negative");
  if (!(lambda_grl >= 0.0)) throw ConfigError("online: lambda_grl must be non-negative");
  if (dann_batch < 2) throw ConfigError("online: dann_batch must be >= 2");
  if (disc_hidden == 0) throw ConfigError("online: disc_hidden must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw ConfigError("online: warmup_fraction must lie in [0, 1]");
}

AdaptResult finetune(const nn::Model& m, const sig::DomainDataset& pilots, const OnlineConfig& cfg,
                     Exec exec) {
  cfg.validate();
  const auto labeled = pilots.labeled_idx();
  if (labeled.empty())
    throw ConfigError("finetune: no labeled pilot frames (use the zero-shot path for 0 shots)");
  Clock clock;
  AdaptResult r;
  r.model = m;
  const nn::Batch all = nn::to_batch(pilots, labeled);
  nn::Optimizer opt({cfg.optimizer, cfg.ft_lr}, m.param_count());
  std::vector<double> grad(m.param_count());
  std::vector<double> last(r.model.params().begin(), r.model.params().end());
  auto rng = make_rng(cfg.seed, kFinetuneStream);
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t s = 0; s < cfg.ft_steps; ++s) {
    const bool full = cfg.ft_batch == 0 || cfg.ft_batch >= all.size();
    const double loss = full ? nn::param_grad(r.model, all, grad, exec)
                             : nn::param_grad(r.model, nn::select(all, sample_indices(all.size(), cfg.ft_batch, rng)),
                                              grad, exec);
    if (!std::isfinite(loss) || !nn::all_finite(grad))
      throw TrainingError("finetune diverged at step " + std::to_string(s), last);
    r.log.push_back({s, std::numeric_limits<double>::quiet_NaN(), loss,
                     std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                     0.0, clock.wall()});
    if (loss < best - 1e-6) {
      best = loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
    opt.step(r.model.params(), grad);
    last.assign(r.model.params().begin(), r.model.params().end());
    ++r.steps;
  }
  r.cpu_seconds = clock.cpu();
  r.wall_seconds = clock.wall();
  return r;
}

DannLosses dann_step_grad(const nn::Model& m, const nn::DomainDiscriminator& disc,
                          const nn::Batch& source, const nn::Batch& target,
                          const nn::Batch& pilots, double lambda, std::span<double> grad_theta,
                          std::span<double> grad_disc, Exec exec) {
  if (grad_theta.size() != m.param_count() || grad_disc.size() != disc.net.param_count())
    throw InputShapeError("dann_step_grad: gradient buffer size mismatch");
  if (source.empty() || target.empty()) throw InputError("dann_step_grad: empty domain batch");
  const std::size_t fdim = m.feature_dim();
  if (disc.input_dim() != fdim) throw InputShapeError("dann_step_grad: discriminator input mismatch");

  DannLosses out;
  out.source_loss = nn::param_grad(m, source, grad_theta, exec);
  if (!pilots.empty()) {
    std::vector<double> gp(grad_theta.size());
    out.pilot_loss = nn::param_grad(m, pilots, gp, exec);
    for (std::size_t k = 0; k < gp.size(); ++k) grad_theta[k] += gp[k];
  }

  const auto fs = nn::features(m, source, exec);
  const auto ft = nn::features(m, target, exec);
  const nn::Batch d = domain_batch(fs, ft, fdim);
  out.domain_loss = disc.net.loss_grad(d, nn::Loss::logistic, grad_disc, exec);
  const auto logits = disc.net.outputs(d, exec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += (logits[i] > 0.0 ? 1 : 0) == d.y[i];
  out.domain_accuracy = static_cast<double>(correct) / static_cast<double>(d.size());

  // dL^d/dF for the mean loss, then through the reversal layer into G_f.
  std::vector<double> gx(d.x.size());
  disc.net.input_grads(disc.net.params(), d, nn::Loss::logistic, gx, exec);
  const double scale = -lambda / static_cast<double>(d.size());
  for (auto& v : gx) v *= scale;
  const std::span<const double> all(gx);
  m.net.backward_prefix(m.params(), m.split_point, source, all.first(fs.size()), grad_theta, exec);
  m.net.backward_prefix(m.params(), m.split_point, target, all.subspan(fs.size()), grad_theta, exec);
  return out;
}

AdaptResult dann_adapt(const nn::Model& m, const sig::DomainDataset& source,
                       const sig::DomainDataset& pilots, const sig::DomainDataset& unlabeled,
                       const OnlineConfig& cfg, Exec exec) {
  cfg.validate();
  const auto src_idx = source.labeled_idx();
  if (src_idx.empty()) throw ConfigError("dann_adapt: no labeled source frames");
  if (unlabeled.empty()) throw ConfigError("dann_adapt: no unlabeled target frames");
  Clock clock;
  AdaptResult r;
  r.model = m;
  const nn::Batch src = nn::to_batch(source, src_idx);
  nn::Batch tgt = nn::to_batch(unlabeled);
  std::fill(tgt.y.begin(), tgt.y.end(), 0);  // target labels are never used
  const nn::Batch pil = nn::to_batch(pilots, pilots.labeled_idx());

  auto disc = nn::make_discriminator(m.feature_dim(), cfg.disc_hidden, derive_seed(cfg.seed, kDiscInitStream));
  nn::Optimizer opt({cfg.optimizer, cfg.dann_lr}, m.param_count());
  nn::Optimizer dopt({cfg.optimizer, cfg.disc_lr}, disc.net.param_count());
  std::vector<double> g(m.param_count()), gd(disc.net.param_count());
  std::vector<double> last(r.model.params().begin(), r.model.params().end());

  const std::size_t half = cfg.dann_batch / 2;
  const std::size_t per_epoch = (tgt.size() + half - 1) / half;
  const std::size_t total = cfg.dann_epochs * per_epoch;
  const std::size_t warmup = static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(total)));
  const std::size_t n_feat_params = m.net.param_offset(m.split_point);
  std::vector<double> window_start(r.model.params().begin(), r.model.params().begin() + static_cast<std::ptrdiff_t>(n_feat_params));
  std::size_t saturated = 0;
  double lambda_scale = 1.0;

  auto rng = make_rng(cfg.seed, kDannStream);
  std::size_t step = 0;
  for (std::size_t e = 0; e < cfg.dann_epochs; ++e) {
    const auto order = shuffled_indices(tgt.size(), rng);
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const std::size_t lo = b * half, hi = std::min(tgt.size(), lo + half);
      const nn::Batch tb = nn::select(tgt, std::span(order).subspan(lo, hi - lo));
      const nn::Batch sb = nn::select(src, sample_indices(src.size(), hi - lo, rng));
      const nn::Batch pb = pil.empty() ? nn::Batch{} : nn::select(pil, sample_indices(pil.size(), cfg.pilot_batch, rng));
      const double ramp = warmup == 0 ? 1.0 : std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup));
      const double lambda = cfg.lambda_grl * ramp * lambda_scale;

      const auto l = dann_step_grad(r.model, disc, sb, tb, pb, lambda, g, gd, exec);
      if (!std::isfinite(l.source_loss + l.pilot_loss + l.domain_loss) || !nn::all_finite(g) || !nn::all_finite(gd))
        throw TrainingError("dann diverged at step " + std::to_string(step), last);
      opt.step(r.model.params(), g);
      dopt.step(disc.net.params(), gd);
      last.assign(r.model.params().begin(), r.model.params().end());
      r.log.push_back({step, l.source_loss, pil.empty() ? std::numeric_limits<double>::quiet_NaN() : l.pilot_loss,
                       l.domain_loss, l.domain_accuracy, lambda, clock.wall()});

      // A discriminator that stays perfect while G_f stops moving means the
      // reversal has no grip; halve lambda and keep going.
      saturated = l.domain_accuracy >= 1.0 ? saturated + 1 : 0;
      if (cfg.collapse_window > 0 && saturated >= cfg.collapse_window) {
        const auto feat = r.model.params().first(n_feat_params);
        if (relative_change(feat, window_start) < 1e-4) {
          lambda_scale *= 0.5;
          r.warnings.push_back("domain discriminator saturated with static features at step " +
                               std::to_string(step) + "; lambda annealed to scale " + std::to_string(lambda_scale));
        }
        window_start.assign(feat.begin(), feat.end());
        saturated = 0;
      }
    }
  }
  r.steps = step;
  r.cpu_seconds = clock.cpu();
  r.wall_seconds = clock.wall();
  return r;
}

DomainMetrics discriminator_metrics(const nn::DomainDiscriminator& disc, const nn::Batch& features,
                                    Exec exec) {
  if (features.empty()) throw InputError("discriminator_metrics: empty batch");
  DomainMetrics out;
  out.loss = disc.net.loss(features, nn::Loss::logistic, exec);
  const auto logits = disc.net.outputs(features, exec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) correct += (logits[i] > 0.0 ? 1 : 0) == features.y[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(features.size());
  return out;
}

DomainMetrics discriminator_metrics(const nn::DomainDiscriminator& disc, const nn::Model& m,
                                    const nn::Batch& source, const nn::Batch& target, Exec exec) {
  return discriminator_metrics(
      disc, domain_batch(nn::features(m, source, exec), nn::features(m, target, exec), m.feature_dim()), exec);
}

void audit_disjoint(const sig::DomainDataset& pilots, const sig::DomainDataset& unlabeled,
                    const sig::DomainDataset& test) {
  std::unordered_set<std::uint32_t> seen;
  for (const auto* ds : {&pilots, &unlabeled, &test}) {
    std::unordered_set<std::uint32_t> own;
    for (const auto& f : ds->frames) {
      if (seen.count(f.frame_id))
        throw InputError("audit_disjoint: frame " + std::to_string(f.frame_id) + " of " +
                         std::string(sig::role_name(ds->role)) + " also appears in another set");
      own.insert(f.frame_id);
    }
    seen.insert(own.begin(), own.end());
  }
}

void write_adapt_log_csv(const std::filesystem::path& path, std::span<const AdaptLogRow> log) {
  std::ostringstream os;
  os.precision(9);
  os << "step,source_loss,pilot_loss,domain_loss,domain_accuracy,lambda,wall_seconds\n";
  auto put = [&os](double v) {
    if (!std::isnan(v)) os << v;
  };
  for (const auto& r : log) {
    os << r.step << ',';
    put(r.source_loss);
    os << ',';
    put(r.pilot_loss);
    os << ',';
    put(r.domain_loss);
    os << ',';
    put(r.domain_accuracy);
    os << ',' << r.lambda << ',' << r.wall_seconds << '\n';
  }
  write_text_atomic(path, os.str());
}

}  // namespace amc::onl
