#include "amc/evalcli/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "amc/common/bytes.hpp"
#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"
#include "amc/modelcore/artifact.hpp"
#include "amc/sigdata/dataset_io.hpp"

namespace amc::eval {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kSourceDataStream = 0x100;
constexpr std::uint64_t kTargetDataStream = 0x101;
constexpr std::uint64_t kAttackerDataStream = 0x102;
constexpr std::uint64_t kSourceSubStream = 0x103;
constexpr std::uint64_t kPoolStream = 0x104;
constexpr std::uint64_t kOfflineStream = 0x105;
constexpr std::uint64_t kOnlineStream = 0x106;
constexpr std::uint64_t kTargetSubStream = 0x107;
constexpr std::uint64_t kTaskDataStream = 0x108;

constexpr onl::OnlineStrategy kAdaptive[2] = {onl::OnlineStrategy::finetune, onl::OnlineStrategy::dann};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what(), 0);
  }
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_text_atomic(p, j.dump(1) + "\n");
}

std::string arch_tag(const nn::ArchDescriptor& a) {
  return std::string(nn::family_name(a.family)) + "-" + std::string(nn::activation_name(a.activation));
}

atk::Substitute cached_substitute(const fs::path& stem, const nn::ArchDescriptor& arch,
                                  const sig::DomainDataset& train, const sig::DomainDataset* test,
                                  std::uint64_t seed, const atk::SubstituteConfig& fit, const nn::Provenance& prov,
                                  Exec exec) {
  const fs::path art = stem.string() + ".amcw", meta = stem.string() + ".json";
  if (fs::exists(art) && fs::exists(meta)) {
    const json j = read_json(meta);
    atk::Substitute s;
    s.model = nn::to_model(nn::load_artifact(art));
    s.id = j.at("id").get<std::string>();
    s.domain = static_cast<sig::Domain>(j.at("domain").get<int>());
    s.high_snr_accuracy = j.at("high_snr_accuracy").get<double>();
    s.weak = j.at("weak").get<bool>();
    return s;
  }
  auto s = atk::train_substitute(arch, train, test, seed, fit, exec);
  nn::round_to_f32(s.model);
  fs::create_directories(stem.parent_path());
  nn::save_artifact(art, nn::make_artifact(s.model, prov));
  write_json(meta, {{"id", s.id},
                    {"domain", static_cast<int>(s.domain)},
                    {"high_snr_accuracy", s.high_snr_accuracy},
                    {"weak", s.weak}});
  return s;
}

}  // namespace

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir / ("seed_" + std::to_string(seed));
}

SeedData make_seed_data(const ExperimentConfig& cfg, std::uint64_t seed, Exec exec) {
  const auto& d = cfg.dataset;
  SeedData out;
  auto src = sig::build_domain({d.source, sig::Domain::source, d.frame_len, d.source_per_class,
                                d.source_test_per_class, 0},
                               derive_seed(seed, kSourceDataStream), exec);
  out.source_train = std::move(src[0]);
  out.source_test = std::move(src[1]);
  auto tgt = sig::build_domain({d.target, sig::Domain::target, d.frame_len, d.target_per_class,
                                d.target_test_per_class, cfg.max_shots()},
                               derive_seed(seed, kTargetDataStream), exec);
  out.pilot_pool = std::move(tgt[0]);
  out.unlabeled = std::move(tgt[1]);
  out.target_test = std::move(tgt[2]);
  auto atk_sets = sig::build_domain({d.target, sig::Domain::target, d.frame_len, d.attacker_per_class, 1, 0},
                                    derive_seed(seed, kAttackerDataStream), exec);
  out.attacker_train = std::move(atk_sets[1]);
  std::fill(out.attacker_train.label_mask.begin(), out.attacker_train.label_mask.end(), 1);
  return out;
}

SeedRun::SeedRun(const ExperimentConfig& cfg, std::uint64_t seed, fs::path dir, Exec exec, Logger log)
    : cfg_(cfg), seed_(seed), dir_(std::move(dir)), exec_(exec), log_(std::move(log)), digest_(cfg.digest()) {}

void SeedRun::say(const std::string& s) const {
  if (log_) log_("[seed " + std::to_string(seed_) + "] " + s);
}

const SeedData& SeedRun::data() {
  if (data_) return *data_;
  const fs::path d = dir_ / "data";
  const char* names[] = {"source_train", "source_test", "target_pilot", "target_unlabeled", "target_test",
                         "attacker_train"};
  bool cached = true;
  for (const char* n : names) cached = cached && fs::exists(d / (std::string(n) + ".amcd"));
  SeedData sd;
  sig::DomainDataset* slots[] = {&sd.source_train, &sd.source_test, &sd.pilot_pool,
                                 &sd.unlabeled,    &sd.target_test, &sd.attacker_train};
  if (cached) {
    for (std::size_t i = 0; i < 6; ++i) *slots[i] = sig::load_dataset(d / (std::string(names[i]) + ".amcd"));
  } else {
    say("generating datasets");
    sd = make_seed_data(cfg_, seed_, exec_);
    fs::create_directories(d);
    for (std::size_t i = 0; i < 6; ++i) sig::save_dataset(*slots[i], d / (std::string(names[i]) + ".amcd"));
  }
  data_ = std::move(sd);
  return *data_;
}

const std::vector<atk::Substitute>& SeedRun::source_substitutes() {
  if (subs_) return *subs_;
  std::vector<atk::Substitute> subs;
  for (std::size_t i = 0; i < cfg_.attack.substitutes.size(); ++i) {
    const fs::path stem = dir_ / "substitutes" / ("source_" + std::to_string(i));
    if (!fs::exists(stem.string() + ".amcw")) say("training source substitute " + arch_tag(cfg_.attack.substitutes[i]));
    subs.push_back(cached_substitute(stem, cfg_.attack.substitutes[i], data().source_train, &data().source_test,
                                     derive_seed(seed_, kSourceSubStream, i), cfg_.attack.substitute_fit,
                                     {digest_, {seed_}, "substitute", ""}, exec_));
    if (subs.back().weak)
      say("warning: substitute " + subs.back().id + " is weak (high-SNR accuracy " +
          std::to_string(subs.back().high_snr_accuracy) + ")");
  }
  subs_ = std::move(subs);
  return *subs_;
}

const atk::TaskPool& SeedRun::pool() {
  if (!pool_) {
    const auto specs = cfg_.attack.specs(cfg_.dataset.frame_len);
    pool_ = atk::build_task_pool(specs, cfg_.attack.substitutes.size(), cfg_.attack.holdout,
                                 derive_seed(seed_, kPoolStream));
  }
  return *pool_;
}

const nn::Model& SeedRun::offline_model(off::Strategy s) {
  if (auto it = offline_.find(s); it != offline_.end()) return it->second;
  const std::string name(off::strategy_name(s));
  const fs::path art = dir_ / "offline" / (name + ".amcw");
  const fs::path meta = dir_ / "offline" / (name + ".json");
  if (fs::exists(art) && fs::exists(meta)) {
    const json j = read_json(meta);
    timing_[s] = {j.at("cpu_seconds").get<double>(), j.at("wall_seconds").get<double>()};
    return offline_[s] = nn::to_model(nn::load_artifact(art));
  }
  off::OfflineConfig oc = cfg_.offline(s);
  oc.strategy = s;
  oc.seed = derive_seed(seed_, kOfflineStream);
  std::vector<off::TaskData> tasks;
  if (s == off::Strategy::adversarial || s == off::Strategy::meta_adversarial) {
    say("perturbing " + std::to_string(pool().train_tasks.size()) + " train tasks");
    tasks = off::build_task_data(pool().train_tasks, source_substitutes(), data().source_train,
                                 cfg_.attack.frames_per_task, derive_seed(seed_, kTaskDataStream), exec_);
  }
  say("offline training: " + name);
  auto r = off::train_offline(cfg_.model, data().source_train, tasks, oc, exec_);
  if (r.skipped_tasks) say("warning: " + std::to_string(r.skipped_tasks) + " diverged task visits skipped");
  nn::round_to_f32(r.model);
  fs::create_directories(art.parent_path());
  nn::save_artifact(art, nn::make_artifact(r.model, {digest_, {seed_}, name, ""}));
  off::write_log_csv(dir_ / "offline" / (name + "_log.csv"), r.log);
  write_json(meta, {{"cpu_seconds", r.cpu_seconds},
                    {"wall_seconds", r.wall_seconds},
                    {"skipped_tasks", r.skipped_tasks},
                    {"config_digest", digest_},
                    {"seeds", {seed_}}});
  timing_[s] = {r.cpu_seconds, r.wall_seconds};
  return offline_[s] = std::move(r.model);
}

OfflineTiming SeedRun::offline_timing(off::Strategy s) {
  offline_model(s);
  return timing_.at(s);
}

const AttackedTarget& SeedRun::attacked(std::size_t h) {
  if (auto it = attacked_.find(h); it != attacked_.end()) return it->second;
  if (h >= pool().held_out_tasks.size()) throw InputError("held-out attack index out of range");
  const auto& task = pool().held_out_tasks[h];
  const auto& arch = cfg_.attack.substitutes.at(task.substitute);
  AttackedTarget at;
  at.attack_id = std::string(atk::method_name(task.attack.method)) + "@" + arch_tag(arch);
  const fs::path d = dir_ / "data";
  const std::string stem = "attacked_" + std::to_string(h) + "_";
  const fs::path paths[] = {d / (stem + "pilot.amcd"), d / (stem + "unlabeled.amcd"), d / (stem + "test.amcd")};
  if (fs::exists(paths[0]) && fs::exists(paths[1]) && fs::exists(paths[2])) {
    at.pilot_pool = sig::load_dataset(paths[0]);
    at.unlabeled = sig::load_dataset(paths[1]);
    at.test = sig::load_dataset(paths[2]);
    return attacked_[h] = std::move(at);
  }
  const auto sub = cached_substitute(dir_ / "substitutes" / ("target_" + std::to_string(task.substitute)), arch,
                                     data().attacker_train, nullptr,
                                     derive_seed(seed_, kTargetSubStream, task.substitute),
                                     cfg_.attack.substitute_fit, {digest_, {seed_}, "substitute", ""}, exec_);
  say("crafting held-out attack " + at.attack_id + " on the target domain");
  const nn::Batch attacker_data = nn::to_batch(data().attacker_train);
  const atk::Perturber attack(sub.model, task.attack, &attacker_data, exec_);
  at.test = atk::perturb_dataset(data().target_test, attack, sub.id);
  if (cfg_.dann.attack_adaptation_data) {
    at.pilot_pool = atk::perturb_dataset(data().pilot_pool, attack, sub.id);
    at.unlabeled = atk::perturb_dataset(data().unlabeled, attack, sub.id);
  } else {
    at.pilot_pool = data().pilot_pool;
    at.unlabeled = data().unlabeled;
  }
  fs::create_directories(d);
  sig::save_dataset(at.pilot_pool, paths[0]);
  sig::save_dataset(at.unlabeled, paths[1]);
  sig::save_dataset(at.test, paths[2]);
  return attacked_[h] = std::move(at);
}

nn::Model SeedRun::adapt(off::Strategy offline, onl::OnlineStrategy online, std::size_t shots, std::size_t h,
                         onl::AdaptResult* details) {
  const nn::Model& base = offline_model(offline);
  if (online == onl::OnlineStrategy::none) return base;
  const auto& at = attacked(h);
  const auto pilots = sig::take_shots(at.pilot_pool, shots);
  onl::audit_disjoint(pilots, at.unlabeled, at.test);
  onl::OnlineConfig oc = cfg_.online(online);
  oc.strategy = online;
  oc.shots = shots;
  oc.seed = derive_seed(seed_, kOnlineStream, h * 4096 + shots);
  auto r = online == onl::OnlineStrategy::finetune ? onl::finetune(base, pilots, oc, exec_)
                                                   : onl::dann_adapt(base, data().source_train, pilots, at.unlabeled, oc, exec_);
  for (const auto& w : r.warnings) say("warning: " + w);
  nn::Model m = std::move(r.model);
  if (details) {
    *details = std::move(r);
    details->model = m;
  }
  return m;
}

fs::path SeedRun::cell_path(off::Strategy offline, onl::OnlineStrategy online, std::size_t shots,
                            std::size_t h) const {
  return dir_ / "cells" /
         (std::string(off::strategy_name(offline)) + "_" + std::string(onl::online_name(online)) + "_" +
          std::to_string(shots) + "_a" + std::to_string(h) + ".json");
}

CellResult SeedRun::cell(off::Strategy offline, onl::OnlineStrategy online, std::size_t shots, std::size_t h) {
  if (online == onl::OnlineStrategy::none) shots = 0;
  const fs::path p = cell_path(offline, online, shots, h);
  CellResult c;
  c.offline = offline;
  c.online = online;
  c.shots = shots;
  c.seed = seed_;
  if (fs::exists(p)) {
    const json j = read_json(p);
    c.attack = j.at("attack").get<std::string>();
    for (const auto& b : j.at("bins"))
      c.bins.emplace_back(b.at(0).get<double>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>());
    c.wrong = j.at("wrong").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    c.online_cpu_seconds = j.at("online_cpu_seconds").get<double>();
    c.online_wall_seconds = j.at("online_wall_seconds").get<double>();
    return c;
  }
  const auto& at = attacked(h);
  c.attack = at.attack_id;
  onl::AdaptResult details;
  const nn::Model m = adapt(offline, online, shots, h, &details);
  c.online_cpu_seconds = details.cpu_seconds;
  c.online_wall_seconds = details.wall_seconds;
  const auto slice = onl::zero_shot(m, at.test, exec_);
  json bins = json::array();
  for (const auto& b : slice.bins) {
    const auto wrong = static_cast<std::size_t>(std::llround(b.ser * static_cast<double>(b.n)));
    c.bins.emplace_back(b.snr_db, wrong, b.n);
    c.wrong += wrong;
    bins.push_back({b.snr_db, wrong, b.n});
  }
  c.n = slice.n;
  if (online != onl::OnlineStrategy::none)
    onl::write_adapt_log_csv(p.parent_path() / (p.stem().string() + "_log.csv"), details.log);
  write_json(p, {{"offline", off::strategy_name(offline)},
                 {"online", onl::online_name(online)},
                 {"shots", shots},
                 {"attack", c.attack},
                 {"seed", seed_},
                 {"config_digest", digest_},
                 {"bins", bins},
                 {"wrong", c.wrong},
                 {"n", c.n},
                 {"online_cpu_seconds", c.online_cpu_seconds},
                 {"online_wall_seconds", c.online_wall_seconds}});
  say(std::string(off::strategy_name(offline)) + " + " + std::string(onl::online_name(online)) +
      (shots ? " @" + std::to_string(shots) + " shots" : "") + " vs " + c.attack + ": SER " +
      std::to_string(c.ser()));
  return c;
}

void open_run_dir(const ExperimentConfig& cfg, bool allow_existing) {
  if (cfg.out_dir.empty()) throw ConfigError("no output directory: set output.dir in the config or pass --out");
  const fs::path manifest = cfg.out_dir / "manifest.json";
  const std::string digest = cfg.digest();
  if (fs::exists(manifest)) {
    const json j = read_json(manifest);
    const auto old = j.value("config_digest", std::string());
    if (old != digest)
      throw ConfigError("refusing to reuse " + cfg.out_dir.string() + ": it holds a run of config digest " + old +
                        " but this config has digest " + digest +
                        "; choose another --out or restore the original config");
    if (!allow_existing)
      throw ConfigError(cfg.out_dir.string() + " already holds a run of this config; pass --resume to continue it");
    return;
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());
  write_json(manifest, {{"schema_version", kReportSchemaVersion},
                        {"config_digest", digest},
                        {"seeds", cfg.seeds},
                        {"config", cfg.to_json()}});
}

SerReport run_grid(const ExperimentConfig& cfg, bool resume, Exec exec, Logger log) {
  open_run_dir(cfg, resume);
  SerReport r;
  r.config_digest = cfg.digest();
  r.seeds = cfg.seeds;
  auto add = [&r](const CellResult& c) {
    const std::string off_name(off::strategy_name(c.offline)), on_name(onl::online_name(c.online));
    for (const auto& [snr, wrong, n] : c.bins) r.rows.push_back({off_name, on_name, c.shots, snr, c.attack, wrong, n, c.seed});
    r.rows.push_back({off_name, on_name, c.shots, std::nullopt, c.attack, c.wrong, c.n, c.seed});
  };
  for (const auto seed : cfg.seeds) {
    SeedRun run(cfg, seed, seed_dir(cfg, seed), exec, log);
    for (std::size_t h = 0; h < run.held_out_count(); ++h) {
      for (auto s : off::kAllStrategies) add(run.cell(s, onl::OnlineStrategy::none, 0, h));
      for (auto s : off::kAllStrategies)
        for (auto on : kAdaptive)
          for (auto k : cfg.dataset.shots) add(run.cell(s, on, k, h));
    }
  }
  return r;
}

std::vector<EfficiencyRow> efficiency_probe(const ExperimentConfig& cfg, Exec exec, Logger log) {
  open_run_dir(cfg, true);
  std::vector<std::unique_ptr<SeedRun>> runs;
  for (const auto seed : cfg.seeds) runs.push_back(std::make_unique<SeedRun>(cfg, seed, seed_dir(cfg, seed), exec, log));

  // Seed-averaged pooled SER (each seed averaged over its held-out attacks)
  // and mean online times of one method at k shots.
  auto measure = [&](off::Strategy s, onl::OnlineStrategy on, std::size_t k) {
    double ser = 0.0, cpu = 0.0, wall = 0.0;
    for (auto& run : runs) {
      const std::size_t nh = run->held_out_count();
      double rs = 0.0;
      for (std::size_t h = 0; h < nh; ++h) {
        const auto c = run->cell(s, on, k, h);
        rs += c.ser();
        cpu += c.online_cpu_seconds / static_cast<double>(nh);
        wall += c.online_wall_seconds / static_cast<double>(nh);
      }
      ser += rs / static_cast<double>(nh);
    }
    const double n = static_cast<double>(runs.size());
    return std::tuple{ser / n, cpu / n, wall / n};
  };

  const double threshold = cfg.efficiency.threshold
                               ? *cfg.efficiency.threshold
                               : std::get<0>(measure(off::Strategy::clean, onl::OnlineStrategy::finetune,
                                                     cfg.efficiency.reference_shots));
  if (log) log("efficiency threshold SER " + std::to_string(threshold));

  std::vector<EfficiencyRow> out;
  for (auto s : off::kAllStrategies) {
    double off_cpu = 0.0, off_wall = 0.0;
    for (auto& run : runs) {
      const auto t = run->offline_timing(s);
      off_cpu += t.cpu_seconds;
      off_wall += t.wall_seconds;
    }
    for (auto on : kAdaptive) {
      EfficiencyRow e;
      e.offline = off::strategy_name(s);
      e.online = onl::online_name(on);
      e.threshold = threshold;
      e.offline_cpu_seconds = off_cpu / static_cast<double>(runs.size());
      e.offline_wall_seconds = off_wall / static_cast<double>(runs.size());
      for (auto k : cfg.efficiency.shots) {
        const auto [ser, cpu, wall] = measure(s, on, k);
        e.curve.emplace_back(k, ser);
        e.shots = k;
        e.mean_ser = ser;
        e.online_cpu_seconds = cpu;
        e.online_wall_seconds = wall;
        if (ser <= threshold) {
          e.reached = true;
          break;
        }
      }
      if (log)
        log("efficiency " + e.offline + " + " + e.online + ": " +
            (e.reached ? std::to_string(e.shots) + " shots" : "did not reach at " + std::to_string(e.shots)));
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace amc::eval
