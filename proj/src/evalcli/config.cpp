#include "amc/evalcli/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "amc/common/error.hpp"

namespace amc::eval {
namespace {

using nlohmann::json;

// Typed reads from one JSON object with defaults; unknown keys are an error.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <class T>
  T get(const char* key, T def) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return def;
    try {
      return it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: '" + path_ + "." + key + "' has the wrong type: " + e.what());
    }
  }

  const json* sub(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("config: unknown key '" + path_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class E, class F>
E parse_enum(const std::string& name, F parse, const std::string& what) {
  const auto v = parse(name);
  if (!v) throw ConfigError("config: unknown " + what + " '" + name + "'");
  return *v;
}

std::string fading_name(sig::Fading f) {
  switch (f) {
    case sig::Fading::none: return "none";
    case sig::Fading::rayleigh: return "rayleigh";
    case sig::Fading::rician: return "rician";
  }
  return "none";
}

sig::Fading parse_fading(const std::string& s) {
  if (s == "none") return sig::Fading::none;
  if (s == "rayleigh") return sig::Fading::rayleigh;
  if (s == "rician") return sig::Fading::rician;
  throw ConfigError("config: unknown fading '" + s + "'");
}

json profile_json(const sig::ChannelProfile& p) {
  return {{"snr_grid", p.snr_grid}, {"fading", fading_name(p.fading)}, {"rician_k", p.rician_k},
          {"max_cfo", p.max_cfo},   {"max_phase", p.max_phase},         {"tap_count", p.tap_count}};
}

sig::ChannelProfile parse_profile(const json& j, const std::string& path, sig::ChannelProfile def) {
  Section s(j, path);
  sig::ChannelProfile p;
  try {
    p = sig::ChannelProfile::make(s.get("snr_grid", def.snr_grid),
                                  parse_fading(s.get("fading", fading_name(def.fading))),
                                  s.get("rician_k", def.rician_k), s.get("max_cfo", def.max_cfo),
                                  s.get("max_phase", def.max_phase), s.get("tap_count", def.tap_count));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  s.finish();
  return p;
}

json arch_json(const nn::ArchDescriptor& a) {
  return {{"family", nn::family_name(a.family)}, {"activation", nn::activation_name(a.activation)}};
}

nn::ArchDescriptor parse_arch(const json& j, const std::string& path, nn::ArchDescriptor def) {
  Section s(j, path);
  def.family = parse_enum<nn::Family>(s.get("family", std::string(nn::family_name(def.family))),
                                      nn::parse_family, "model family");
  def.activation = parse_enum<nn::Activation>(
      s.get("activation", std::string(nn::activation_name(def.activation))), nn::parse_activation,
      "activation");
  s.finish();
  return def;
}

std::string optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::sgd ? "sgd" : "adam"; }

nn::OptimizerKind parse_opt(const std::string& s) {
  const auto k = nn::parse_optimizer(s);
  if (!k) throw ConfigError("config: unknown optimizer '" + s + "'");
  return *k;
}

json fit_json(const nn::FitConfig& f) {
  return {{"optimizer", optimizer_name(f.optimizer.kind)}, {"lr", f.optimizer.lr},
          {"epochs", f.epochs}, {"batch_size", f.batch_size}};
}

nn::FitConfig read_fit(Section& s, nn::FitConfig def) {
  def.optimizer.kind = parse_opt(s.get("optimizer", optimizer_name(def.optimizer.kind)));
  def.optimizer.lr = s.get("lr", def.optimizer.lr);
  def.epochs = s.get("epochs", def.epochs);
  def.batch_size = s.get("batch_size", def.batch_size);
  return def;
}

json offline_json(const off::OfflineConfig& c) {
  json j = fit_json(c.fit);
  j["meta_algo"] = off::meta_algo_name(c.meta_algo);
  j["inner_lr"] = c.inner_lr;
  j["outer_lr"] = c.outer_lr;
  j["inner_steps"] = c.inner_steps;
  j["outer_iters"] = c.outer_iters;
  j["meta_batch"] = c.meta_batch;
  j["inner_batch"] = c.inner_batch;
  j["query_batch"] = c.query_batch;
  j["support_fraction"] = c.support_fraction;
  j["outer_optimizer"] = optimizer_name(c.outer_optimizer);
  j["mix_weight"] = c.mix_weight;
  j["adversarial_steps"] = c.adversarial_steps;
  return j;
}

off::OfflineConfig parse_offline(const json* j, const std::string& path, off::Strategy strategy) {
  off::OfflineConfig c;
  c.strategy = strategy;
  if (!j) return c;
  Section s(*j, path);
  c.fit = read_fit(s, c.fit);
  c.meta_algo = parse_enum<off::MetaAlgo>(s.get("meta_algo", std::string(off::meta_algo_name(c.meta_algo))),
                                          off::parse_meta_algo, "meta algorithm");
  c.inner_lr = s.get("inner_lr", c.inner_lr);
  c.outer_lr = s.get("outer_lr", c.outer_lr);
  c.inner_steps = s.get("inner_steps", c.inner_steps);
  c.outer_iters = s.get("outer_iters", c.outer_iters);
  c.meta_batch = s.get("meta_batch", c.meta_batch);
  c.inner_batch = s.get("inner_batch", c.inner_batch);
  c.query_batch = s.get("query_batch", c.query_batch);
  c.support_fraction = s.get("support_fraction", c.support_fraction);
  c.outer_optimizer = parse_opt(s.get("outer_optimizer", optimizer_name(c.outer_optimizer)));
  c.mix_weight = s.get("mix_weight", c.mix_weight);
  c.adversarial_steps = s.get("adversarial_steps", c.adversarial_steps);
  s.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json online_json(const onl::OnlineConfig& c) {
  return {{"optimizer", optimizer_name(c.optimizer)},
          {"ft_lr", c.ft_lr},
          {"ft_steps", c.ft_steps},
          {"ft_batch", c.ft_batch},
          {"patience", c.patience},
          {"lambda_grl", c.lambda_grl},
          {"dann_epochs", c.dann_epochs},
          {"dann_batch", c.dann_batch},
          {"pilot_batch", c.pilot_batch},
          {"dann_lr", c.dann_lr},
          {"disc_lr", c.disc_lr},
          {"disc_hidden", c.disc_hidden},
          {"warmup_fraction", c.warmup_fraction},
          {"collapse_window", c.collapse_window}};
}

onl::OnlineConfig parse_online_cfg(const json* j, const std::string& path, onl::OnlineStrategy strategy,
                                   bool attack_adaptation_data) {
  onl::OnlineConfig c;
  c.strategy = strategy;
  c.attack_adaptation_data = attack_adaptation_data;
  if (!j) return c;
  Section s(*j, path);
  c.optimizer = parse_opt(s.get("optimizer", optimizer_name(c.optimizer)));
  c.ft_lr = s.get("ft_lr", c.ft_lr);
  c.ft_steps = s.get("ft_steps", c.ft_steps);
  c.ft_batch = s.get("ft_batch", c.ft_batch);
  c.patience = s.get("patience", c.patience);
  c.lambda_grl = s.get("lambda_grl", c.lambda_grl);
  c.dann_epochs = s.get("dann_epochs", c.dann_epochs);
  c.dann_batch = s.get("dann_batch", c.dann_batch);
  c.pilot_batch = s.get("pilot_batch", c.pilot_batch);
  c.dann_lr = s.get("dann_lr", c.dann_lr);
  c.disc_lr = s.get("disc_lr", c.disc_lr);
  c.disc_hidden = s.get("disc_hidden", c.disc_hidden);
  c.warmup_fraction = s.get("warmup_fraction", c.warmup_fraction);
  c.collapse_window = s.get("collapse_window", c.collapse_window);
  s.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

std::vector<nn::ArchDescriptor> default_substitutes() {
  using nn::Activation;
  using nn::Family;
  return {{Family::cnn_small, Activation::relu},
          {Family::cnn_wide, Activation::relu},
          {Family::cnn_deep, Activation::relu},
          {Family::mlp_small, Activation::relu},
          {Family::cnn_small, Activation::tanh}};
}

}  // namespace

std::vector<atk::AttackSpec> AttackConfig::specs(std::size_t frame_len) const {
  std::vector<atk::AttackSpec> out;
  const double eps = atk::epsilon_from_psr(psr_db, frame_len);
  for (auto m : methods) {
    atk::AttackSpec s = base;
    s.method = m;
    s.epsilon = eps;
    s.validate();
    out.push_back(s);
  }
  return out;
}

const off::OfflineConfig& ExperimentConfig::offline(off::Strategy s) const {
  switch (s) {
    case off::Strategy::adversarial: return adversarial;
    case off::Strategy::meta_adversarial: return meta;
    default: return clean;
  }
}

const onl::OnlineConfig& ExperimentConfig::online(onl::OnlineStrategy s) const {
  return s == onl::OnlineStrategy::dann ? dann : finetune;
}

nlohmann::json ExperimentConfig::to_json() const {
  json subs = json::array();
  for (const auto& a : attack.substitutes) subs.push_back(arch_json(a));
  json methods = json::array();
  for (auto m : attack.methods) methods.push_back(atk::method_name(m));
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["dataset"] = {{"frame_len", dataset.frame_len},
                  {"source", profile_json(dataset.source)},
                  {"target", profile_json(dataset.target)},
                  {"source_per_class", dataset.source_per_class},
                  {"source_test_per_class", dataset.source_test_per_class},
                  {"target_per_class", dataset.target_per_class},
                  {"target_test_per_class", dataset.target_test_per_class},
                  {"attacker_per_class", dataset.attacker_per_class},
                  {"shots", dataset.shots}};
  j["model"] = arch_json(model);
  json sub_fit = fit_json(attack.substitute_fit.fit);
  sub_fit["weak_accuracy"] = attack.substitute_fit.weak_accuracy;
  sub_fit["high_snr_db"] = attack.substitute_fit.high_snr_db;
  j["attack"] = {{"methods", methods},
                 {"psr_db", attack.psr_db},
                 {"steps", attack.base.steps},
                 {"alpha", attack.base.alpha},
                 {"mu", attack.base.mu},
                 {"cw_c", attack.base.c},
                 {"cw_search_steps", attack.base.binary_search_steps},
                 {"cw_kappa", attack.base.kappa},
                 {"cw_lr", attack.base.cw_lr},
                 {"pca_space", attack.base.pca_space == atk::PcaSpace::data ? "data" : "gradient"},
                 {"substitutes", subs},
                 {"holdout", attack.holdout},
                 {"frames_per_task", attack.frames_per_task},
                 {"substitute_fit", sub_fit}};
  j["offline"] = {{"clean", offline_json(clean)},
                  {"adversarial", offline_json(adversarial)},
                  {"meta", offline_json(meta)}};
  j["online"] = {{"attack_adaptation_data", dann.attack_adaptation_data},
                 {"finetune", online_json(finetune)},
                 {"dann", online_json(dann)}};
  json eff = {{"shots", efficiency.shots}, {"reference_shots", efficiency.reference_shots}};
  eff["threshold"] = efficiency.threshold ? json(*efficiency.threshold) : json(nullptr);
  j["eval"] = {{"seeds", seeds}, {"efficiency", eff}};
  j["output"] = {{"dir", out_dir.string()}};
  return j;
}

std::size_t ExperimentConfig::max_shots() const {
  return std::max({*std::max_element(dataset.shots.begin(), dataset.shots.end()), efficiency.shots.back(),
                   efficiency.reference_shots});
}

std::string ExperimentConfig::digest() const {
  json j = to_json();
  j.erase("output");
  return sha256_hex(j.dump());
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  Section root(j, "config");
  const int version = root.get("schema_version", -1);
  if (version != kConfigSchemaVersion)
    throw ConfigError("config: schema_version must be " + std::to_string(kConfigSchemaVersion) + " (got " +
                      std::to_string(version) + ")");
  ExperimentConfig c;

  if (const json* d = root.sub("dataset")) {
    Section s(*d, "dataset");
    auto& ds = c.dataset;
    ds.frame_len = s.get("frame_len", ds.frame_len);
    if (const json* p = s.sub("source")) ds.source = parse_profile(*p, "dataset.source", ds.source);
    if (const json* p = s.sub("target")) ds.target = parse_profile(*p, "dataset.target", ds.target);
    ds.source_per_class = s.get("source_per_class", ds.source_per_class);
    ds.source_test_per_class = s.get("source_test_per_class", ds.source_test_per_class);
    ds.target_per_class = s.get("target_per_class", ds.target_per_class);
    ds.target_test_per_class = s.get("target_test_per_class", ds.target_test_per_class);
    ds.attacker_per_class = s.get("attacker_per_class", ds.attacker_per_class);
    ds.shots = s.get("shots", ds.shots);
    s.finish();
  }
  if (c.dataset.frame_len < 8 || c.dataset.frame_len > 4096)
    throw ConfigError("dataset.frame_len must lie in [8, 4096]");
  if (c.dataset.shots.empty()) throw ConfigError("dataset.shots must list at least one shot count");
  for (auto k : c.dataset.shots)
    if (k == 0) throw ConfigError("dataset.shots entries must be >= 1 (zero-shot is always evaluated)");

  if (const json* m = root.sub("model")) c.model = parse_arch(*m, "model", c.model);
  c.model.frame_len = static_cast<std::uint16_t>(c.dataset.frame_len);

  c.attack.substitutes = default_substitutes();
  c.attack.substitute_fit.fit.epochs = 30;
  c.attack.substitute_fit.fit.optimizer.lr = 3e-3;
  if (const json* a = root.sub("attack")) {
    Section s(*a, "attack");
    auto& at = c.attack;
    if (const json* ms = s.sub("methods")) {
      if (!ms->is_array() || ms->empty()) throw ConfigError("attack.methods must be a non-empty list");
      at.methods.clear();
      for (const auto& m : *ms)
        at.methods.push_back(parse_enum<atk::Method>(m.get<std::string>(), atk::parse_method, "attack method"));
    }
    at.psr_db = s.get("psr_db", at.psr_db);
    at.base.steps = s.get("steps", at.base.steps);
    at.base.alpha = s.get("alpha", at.base.alpha);
    at.base.mu = s.get("mu", at.base.mu);
    at.base.c = s.get("cw_c", at.base.c);
    at.base.binary_search_steps = s.get("cw_search_steps", at.base.binary_search_steps);
    at.base.kappa = s.get("cw_kappa", at.base.kappa);
    at.base.cw_lr = s.get("cw_lr", at.base.cw_lr);
    const auto space = s.get("pca_space", std::string("gradient"));
    if (space != "gradient" && space != "data") throw ConfigError("attack.pca_space must be gradient or data");
    at.base.pca_space = space == "data" ? atk::PcaSpace::data : atk::PcaSpace::gradient;
    if (const json* subs = s.sub("substitutes")) {
      if (!subs->is_array() || subs->empty()) throw ConfigError("attack.substitutes must be a non-empty list");
      at.substitutes.clear();
      for (std::size_t i = 0; i < subs->size(); ++i)
        at.substitutes.push_back(parse_arch((*subs)[i], "attack.substitutes[" + std::to_string(i) + "]", {}));
    }
    at.holdout = s.get("holdout", at.holdout);
    at.frames_per_task = s.get("frames_per_task", at.frames_per_task);
    if (const json* f = s.sub("substitute_fit")) {
      Section fs(*f, "attack.substitute_fit");
      at.substitute_fit.fit = read_fit(fs, at.substitute_fit.fit);
      at.substitute_fit.weak_accuracy = fs.get("weak_accuracy", at.substitute_fit.weak_accuracy);
      at.substitute_fit.high_snr_db = fs.get("high_snr_db", at.substitute_fit.high_snr_db);
      fs.finish();
    }
    s.finish();
  }
  for (auto& a : c.attack.substitutes) a.frame_len = c.model.frame_len;
  if (c.attack.holdout == 0) throw ConfigError("attack.holdout must be >= 1 (the online phase needs an unseen attack)");
  if (c.attack.holdout >= c.attack.methods.size() * c.attack.substitutes.size())
    throw ConfigError("attack.holdout must be smaller than the attack x substitute pool");
  c.attack.specs(c.dataset.frame_len);  // validates

  const json* off_j = root.sub("offline");
  const json empty = json::object();
  Section off_s(off_j ? *off_j : empty, "offline");
  c.clean = parse_offline(off_s.sub("clean"), "offline.clean", off::Strategy::clean);
  c.adversarial = parse_offline(off_s.sub("adversarial"), "offline.adversarial", off::Strategy::adversarial);
  c.meta = parse_offline(off_s.sub("meta"), "offline.meta", off::Strategy::meta_adversarial);
  off_s.finish();

  const json* on_j = root.sub("online");
  Section on_s(on_j ? *on_j : empty, "online");
  const bool attacked = on_s.get("attack_adaptation_data", true);
  c.finetune = parse_online_cfg(on_s.sub("finetune"), "online.finetune", onl::OnlineStrategy::finetune, attacked);
  c.dann = parse_online_cfg(on_s.sub("dann"), "online.dann", onl::OnlineStrategy::dann, attacked);
  on_s.finish();

  if (const json* e = root.sub("eval")) {
    Section s(*e, "eval");
    c.seeds = s.get("seeds", c.seeds);
    if (const json* ef = s.sub("efficiency")) {
      Section es(*ef, "eval.efficiency");
      c.efficiency.shots = es.get("shots", c.efficiency.shots);
      c.efficiency.reference_shots = es.get("reference_shots", c.efficiency.reference_shots);
      if (const json* t = es.sub("threshold"); t && !t->is_null()) {
        if (!t->is_number()) throw ConfigError("eval.efficiency.threshold must be a number or null");
        c.efficiency.threshold = t->get<double>();
      }
      es.finish();
    }
    s.finish();
  }
  if (c.seeds.empty()) throw ConfigError("eval.seeds must list at least one seed");
  if (c.efficiency.shots.empty()) throw ConfigError("eval.efficiency.shots must be non-empty");
  if (!std::is_sorted(c.efficiency.shots.begin(), c.efficiency.shots.end()) || c.efficiency.shots.front() == 0)
    throw ConfigError("eval.efficiency.shots must be positive and ascending");

  if (c.efficiency.reference_shots == 0) throw ConfigError("eval.efficiency.reference_shots must be >= 1");
  const std::size_t max_shots = c.max_shots();
  if (max_shots > c.dataset.target_per_class)
    throw ConfigError("dataset.target_per_class must be at least the largest shot count (" +
                      std::to_string(max_shots) + ")");
  if (10 * max_shots > c.dataset.target_per_class - max_shots)
    throw ConfigError("dataset.target_per_class too small: " + std::to_string(max_shots) +
                      " pilots per class must stay within 10% of the unlabeled frames");

  if (const json* o = root.sub("output")) {
    Section s(*o, "output");
    c.out_dir = s.get("dir", std::string());
    s.finish();
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

}  // namespace amc::eval
