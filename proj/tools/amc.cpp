#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "amc/common/error.hpp"
#include "amc/evalcli/grid.hpp"
#include "amc/modelcore/artifact.hpp"
#include "amc/sigdata/dataset_io.hpp"

namespace fs = std::filesystem;
using namespace amc;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool resume = false;
};

void add_common(CLI::App* app, Common& c, bool with_resume) {
  app->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Run a single seed instead of eval.seeds");
  app->add_option("--out", c.out, "Output directory (overrides output.dir)");
  if (with_resume) app->add_flag("--resume", c.resume, "Continue a partial run in the output directory");
}

eval::ExperimentConfig load(const Common& c) {
  eval::ExperimentConfig cfg = c.config.empty() ? eval::parse_config({{"schema_version", 1}}) : eval::load_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (cfg.out_dir.empty()) throw ConfigError("no output directory: set output.dir in the config or pass --out");
  return cfg;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

void print_summary(const eval::SerReport& r) {
  std::printf("%-12s %-9s %5s %10s %10s %5s\n", "offline", "online", "shots", "mean_ser", "std_ser", "seeds");
  for (const auto& s : eval::summarize(r))
    std::printf("%-12s %-9s %5zu %10.4f %10.4f %5zu\n", s.offline.c_str(), s.online.c_str(), s.shots, s.mean, s.std,
                s.seeds);
  if (!r.efficiency.empty()) {
    std::printf("\n%-12s %-9s %7s %8s %10s %12s %12s\n", "offline", "online", "shots", "reached", "mean_ser",
                "offline_cpu", "online_cpu");
    for (const auto& e : r.efficiency)
      std::printf("%-12s %-9s %6zu%s %8s %10.4f %12.2f %12.3f\n", e.offline.c_str(), e.online.c_str(), e.shots,
                  e.reached ? " " : "+", e.reached ? "yes" : "no", e.mean_ser, e.offline_cpu_seconds,
                  e.online_cpu_seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust modulation classification: adversarial meta-learning offline, domain adaptation online"};
  app.require_subcommand(1);

  Common gen, train, adapt, grid, eff, rep;
  std::string strategy = "all", offline = "meta", online = "dann";
  std::size_t shots = 10, attack_index = 0;

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate one seed's source, target and attacker datasets");
  add_common(gen_cmd, gen, false);
  auto* train_cmd = app.add_subcommand("train-offline", "Train offline strategies for one seed");
  add_common(train_cmd, train, false);
  train_cmd->add_option("--strategy", strategy, "scratch|clean|adversarial|meta|all");
  auto* adapt_cmd = app.add_subcommand("adapt-online", "Adapt one offline artifact to the attacked target domain");
  add_common(adapt_cmd, adapt, false);
  adapt_cmd->add_option("--offline", offline, "Offline strategy of the artifact to adapt");
  adapt_cmd->add_option("--online", online, "none|finetune|dann");
  adapt_cmd->add_option("--shots", shots, "Pilot frames per class");
  adapt_cmd->add_option("--attack", attack_index, "Index of the held-out attack");
  auto* grid_cmd = app.add_subcommand("run-grid", "Run the 12-model grid and write the SER report");
  add_common(grid_cmd, grid, true);
  auto* eff_cmd = app.add_subcommand("efficiency", "Shots-to-threshold sweep on top of the grid");
  add_common(eff_cmd, eff, true);
  auto* rep_cmd = app.add_subcommand("report", "Re-emit CSV, JSON and plots from a run's report.json");
  add_common(rep_cmd, rep, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      auto cfg = load(gen);
      const auto seed = cfg.seeds.front();
      const auto d = eval::make_seed_data(cfg, seed);
      const fs::path out = cfg.out_dir;
      fs::create_directories(out);
      const std::pair<const char*, const sig::DomainDataset*> sets[] = {
          {"source_train", &d.source_train}, {"source_test", &d.source_test}, {"target_pilot", &d.pilot_pool},
          {"target_unlabeled", &d.unlabeled}, {"target_test", &d.target_test}, {"attacker_train", &d.attacker_train}};
      for (const auto& [name, ds] : sets) {
        sig::save_dataset(*ds, out / (std::string(name) + ".amcd"));
        std::printf("%-18s %6zu frames -> %s\n", name, ds->size(), (out / (std::string(name) + ".amcd")).c_str());
      }
    } else if (*train_cmd) {
      auto cfg = load(train);
      eval::SeedRun run(cfg, cfg.seeds.front(), cfg.out_dir, Exec::parallel, log_line);
      for (auto s : off::kAllStrategies) {
        if (strategy != "all" && off::parse_strategy(strategy) != s) continue;
        const auto t = run.offline_timing(s);
        std::printf("%-12s cpu %.2fs wall %.2fs -> %s\n", std::string(off::strategy_name(s)).c_str(), t.cpu_seconds,
                    t.wall_seconds, (cfg.out_dir / "offline" / (std::string(off::strategy_name(s)) + ".amcw")).c_str());
      }
      if (strategy != "all" && !off::parse_strategy(strategy)) throw ConfigError("unknown strategy '" + strategy + "'");
    } else if (*adapt_cmd) {
      auto cfg = load(adapt);
      const auto s = off::parse_strategy(offline);
      const auto on = onl::parse_online(online);
      if (!s) throw ConfigError("unknown offline strategy '" + offline + "'");
      if (!on) throw ConfigError("unknown online strategy '" + online + "'");
      eval::SeedRun run(cfg, cfg.seeds.front(), cfg.out_dir, Exec::parallel, log_line);
      onl::AdaptResult details;
      const auto m = run.adapt(*s, *on, shots, attack_index, &details);
      const auto& at = run.attacked(attack_index);
      const auto slice = onl::zero_shot(m, at.test);
      const std::string tag = offline + "_" + online + "_" + std::to_string(shots);
      const fs::path art = cfg.out_dir / "online" / (tag + ".amcw");
      fs::create_directories(art.parent_path());
      nn::Model saved = m;
      nn::round_to_f32(saved);
      nn::save_artifact(art, nn::make_artifact(saved, {cfg.digest(), {run.seed()}, offline, online}));
      if (*on != onl::OnlineStrategy::none)
        onl::write_adapt_log_csv(cfg.out_dir / "online" / (tag + "_log.csv"), details.log);
      std::printf("%s + %s @%zu shots vs %s: SER %.4f over %zu frames (online cpu %.3fs) -> %s\n", offline.c_str(),
                  online.c_str(), shots, at.attack_id.c_str(), slice.pooled, slice.n, details.cpu_seconds,
                  art.c_str());
    } else if (*grid_cmd) {
      auto cfg = load(grid);
      const auto r = eval::run_grid(cfg, grid.resume, Exec::parallel, log_line);
      for (const auto& p : eval::emit_report(r, cfg.out_dir)) log_line("wrote " + p.string());
      print_summary(r);
    } else if (*eff_cmd) {
      auto cfg = load(eff);
      auto r = eval::run_grid(cfg, true, Exec::parallel, log_line);
      r.efficiency = eval::efficiency_probe(cfg, Exec::parallel, log_line);
      for (const auto& p : eval::emit_report(r, cfg.out_dir)) log_line("wrote " + p.string());
      print_summary(r);
    } else if (*rep_cmd) {
      const fs::path dir = rep.out.empty() ? load(rep).out_dir : fs::path(rep.out);
      const auto r = eval::load_report(dir / "report.json");
      if (!rep.config.empty()) {
        auto cfg = load(rep);
        if (cfg.digest() != r.config_digest)
          throw ConfigError("report in " + dir.string() + " was produced by config digest " + r.config_digest +
                            ", not " + cfg.digest());
      }
      for (const auto& p : eval::emit_report(r, dir)) log_line("wrote " + p.string());
      print_summary(r);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
