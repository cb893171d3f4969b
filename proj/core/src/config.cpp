#include "vqg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"

#ifndef VQG_VERSION_STRING
#define VQG_VERSION_STRING "0.0.0"
#endif

namespace vqg {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += xs[i];
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

// Shortest decimal that round-trips.
std::string fmt_double(double x) { return fmt::format("{}", x); }

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field num_field(std::string section, std::string name, T ExperimentConfig::*sec,
                double T::*member) {
  const std::string key = section + "." + name;
  return {key, [=](const ExperimentConfig& c) { return fmt_double(c.*sec.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*sec.*member = to_double(key, v);
          }};
}

template <typename T>
Field int_field(std::string section, std::string name, T ExperimentConfig::*sec,
                int T::*member) {
  const std::string key = section + "." + name;
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*sec.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            const long long x = to_int(key, v);
            if (x < INT32_MIN || x > INT32_MAX)
              throw ConfigError(key, "integer out of range");
            c.*sec.*member = static_cast<int>(x);
          }};
}

template <typename T>
Field bool_field(std::string section, std::string name, T ExperimentConfig::*sec,
                 bool T::*member) {
  const std::string key = section + "." + name;
  return {key,
          [=](const ExperimentConfig& c) {
            return std::string(c.*sec.*member ? "true" : "false");
          },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*sec.*member = to_bool(key, v);
          }};
}

template <typename T>
Field str_field(std::string section, std::string name, T ExperimentConfig::*sec,
                std::string T::*member) {
  const std::string key = section + "." + name;
  return {key, [=](const ExperimentConfig& c) { return c.*sec.*member; },
          [=](ExperimentConfig& c, const std::string& v) { c.*sec.*member = v; }};
}

template <typename T>
Field list_field(std::string section, std::string name, T ExperimentConfig::*sec,
                 std::vector<std::string> T::*member) {
  const std::string key = section + "." + name;
  return {key, [=](const ExperimentConfig& c) { return join_list(c.*sec.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*sec.*member = split_list(v);
          }};
}

// Fixed keys; per-attribute world keys are handled separately.
const std::vector<Field>& fields() {
  using E = ExperimentConfig;
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back(list_field("world", "categories", &E::world, &WorldConfig::categories));
    v.push_back({"world.attributes",
                 [](const E& c) {
                   std::vector<std::string> names;
                   for (const auto& a : c.world.attributes) names.push_back(a.name);
                   return join_list(names);
                 },
                 [](E& c, const std::string& s) {
                   std::vector<AttributeSpec> attrs;
                   for (const auto& name : split_list(s)) {
                     AttributeSpec a;
                     a.name = name;
                     for (const auto& old : c.world.attributes)
                       if (old.name == name) a = old;
                     attrs.push_back(std::move(a));
                   }
                   c.world.attributes = std::move(attrs);
                 }});
    v.push_back(int_field("world", "min_objects", &E::world, &WorldConfig::min_objects));
    v.push_back(int_field("world", "max_objects", &E::world, &WorldConfig::max_objects));
    v.push_back(num_field("world", "min_box_size", &E::world, &WorldConfig::min_box_size));
    v.push_back(num_field("world", "max_box_size", &E::world, &WorldConfig::max_box_size));
    v.push_back(int_field("world", "max_resample", &E::world, &WorldConfig::max_resample));

    v.push_back(num_field("oracle", "epsilon", &E::oracle, &OracleConfig::epsilon));

    v.push_back(int_field("grammar", "max_question_length", &E::grammar,
                          &GrammarConfig::max_question_length));
    v.push_back(str_field("grammar", "category_template", &E::grammar,
                          &GrammarConfig::category_template));
    v.push_back(str_field("grammar", "attribute_template", &E::grammar,
                          &GrammarConfig::attribute_template));
    v.push_back(str_field("grammar", "spatial_template", &E::grammar,
                          &GrammarConfig::spatial_template));
    v.push_back(list_field("grammar", "regions", &E::grammar, &GrammarConfig::regions));

    v.push_back(bool_field("features", "answer_entropy", &E::features,
                           &FeatureConfig::answer_entropy));
    v.push_back(bool_field("features", "lookahead", &E::features, &FeatureConfig::lookahead));

    v.push_back(num_field("rewards", "lambda", &E::rewards, &RewardConfig::lambda));
    v.push_back(num_field("rewards", "eta", &E::rewards, &RewardConfig::eta));
    v.push_back(int_field("rewards", "j_max", &E::rewards, &RewardConfig::j_max));
    v.push_back(bool_field("rewards", "goal", &E::rewards, &RewardConfig::goal));
    v.push_back(bool_field("rewards", "progressive", &E::rewards, &RewardConfig::progressive));
    v.push_back(bool_field("rewards", "informativeness", &E::rewards,
                           &RewardConfig::informativeness));
    v.push_back(bool_field("rewards", "sole_reward", &E::rewards, &RewardConfig::sole_reward));

    v.push_back(num_field("trainer", "lr", &E::trainer, &TrainerConfig::lr));
    v.push_back(int_field("trainer", "batch_size", &E::trainer, &TrainerConfig::batch_size));
    v.push_back(int_field("trainer", "epochs", &E::trainer, &TrainerConfig::epochs));
    v.push_back(int_field("trainer", "episodes_per_epoch", &E::trainer,
                          &TrainerConfig::episodes_per_epoch));
    v.push_back(num_field("trainer", "baseline_lr", &E::trainer, &TrainerConfig::baseline_lr));
    v.push_back(int_field("trainer", "baseline_hidden", &E::trainer,
                          &TrainerConfig::baseline_hidden));
    v.push_back(num_field("trainer", "entropy_bonus", &E::trainer,
                          &TrainerConfig::entropy_bonus));
    v.push_back(bool_field("trainer", "normalize_advantage", &E::trainer,
                           &TrainerConfig::normalize_advantage));
    v.push_back(str_field("trainer", "warm_start", &E::trainer, &TrainerConfig::warm_start));
    v.push_back(int_field("trainer", "checkpoint_every", &E::trainer,
                          &TrainerConfig::checkpoint_every));
    v.push_back(int_field("trainer", "episode_log_every", &E::trainer,
                          &TrainerConfig::episode_log_every));

    v.push_back(int_field("pretrain", "expert_episodes", &E::pretrain,
                          &PretrainConfig::expert_episodes));
    v.push_back(int_field("pretrain", "epochs", &E::pretrain, &PretrainConfig::epochs));
    v.push_back(num_field("pretrain", "lr", &E::pretrain, &PretrainConfig::lr));
    v.push_back(int_field("pretrain", "batch_size", &E::pretrain, &PretrainConfig::batch_size));
    v.push_back(num_field("pretrain", "stop_threshold", &E::pretrain,
                          &PretrainConfig::stop_threshold));

    v.push_back(int_field("eval", "n_games", &E::eval, &EvalConfig::n_games));
    v.push_back(int_field("eval", "n_seeds", &E::eval, &EvalConfig::n_seeds));

    const std::string hseed = "harness.seed";
    v.push_back({hseed, [](const E& c) { return std::to_string(c.harness.seed); },
                 [hseed](E& c, const std::string& s) { c.harness.seed = to_u64(hseed, s); }});
    v.push_back(int_field("harness", "n_train_scenes", &E::harness,
                          &HarnessConfig::n_train_scenes));
    v.push_back(int_field("harness", "n_test_scenes", &E::harness,
                          &HarnessConfig::n_test_scenes));
    v.push_back(int_field("harness", "workers", &E::harness, &HarnessConfig::workers));
    v.push_back(str_field("harness", "out_dir", &E::harness, &HarnessConfig::out_dir));

    v.push_back(str_field("service", "host", &E::service, &ServiceConfig::host));
    v.push_back(int_field("service", "port", &E::service, &ServiceConfig::port));
    v.push_back(str_field("service", "checkpoint_dir", &E::service,
                          &ServiceConfig::checkpoint_dir));
    v.push_back(str_field("service", "ledger", &E::service, &ServiceConfig::ledger));
    v.push_back(int_field("service", "idle_timeout_s", &E::service,
                          &ServiceConfig::idle_timeout_s));
    v.push_back(str_field("service", "decode", &E::service, &ServiceConfig::decode));
    return v;
  }();
  return f;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  validate(c.world);
  validate(c.oracle);
  validate(c.rewards);
  Grammar::build(c.grammar, c.world);

  const auto& t = c.trainer;
  require(std::isfinite(t.lr) && t.lr >= 0, "trainer.lr", "must be finite and >= 0");
  require(t.batch_size >= 1, "trainer.batch_size", "must be >= 1");
  require(t.epochs >= 0, "trainer.epochs", "must be >= 0");
  require(t.episodes_per_epoch >= 0, "trainer.episodes_per_epoch", "must be >= 0");
  require(std::isfinite(t.baseline_lr) && t.baseline_lr >= 0, "trainer.baseline_lr",
          "must be finite and >= 0");
  require(t.baseline_hidden >= 1, "trainer.baseline_hidden", "must be >= 1");
  require(std::isfinite(t.entropy_bonus) && t.entropy_bonus >= 0,
          "trainer.entropy_bonus", "must be finite and >= 0");
  require(t.checkpoint_every >= 0, "trainer.checkpoint_every", "must be >= 0");
  require(t.episode_log_every >= 0, "trainer.episode_log_every", "must be >= 0");

  const auto& p = c.pretrain;
  require(p.expert_episodes >= 0, "pretrain.expert_episodes", "must be >= 0");
  require(p.epochs >= 0, "pretrain.epochs", "must be >= 0");
  require(std::isfinite(p.lr) && p.lr >= 0, "pretrain.lr", "must be finite and >= 0");
  require(p.batch_size >= 1, "pretrain.batch_size", "must be >= 1");
  require(p.stop_threshold > 0 && p.stop_threshold <= 1, "pretrain.stop_threshold",
          "must lie in (0, 1]");

  require(c.eval.n_games >= 1, "eval.n_games", "must be >= 1");
  require(c.eval.n_seeds >= 1, "eval.n_seeds", "must be >= 1");

  require(c.harness.n_train_scenes >= 1, "harness.n_train_scenes", "must be >= 1");
  require(c.harness.n_test_scenes >= 1, "harness.n_test_scenes", "must be >= 1");
  require(c.harness.workers >= 0, "harness.workers", "must be >= 0");

  require(c.service.port >= 0 && c.service.port <= 65535, "service.port",
          "must lie in [0, 65535]");
  require(c.service.idle_timeout_s >= 1, "service.idle_timeout_s", "must be >= 1");
  try {
    DecodeMode::parse(c.service.decode);
  } catch (const Error&) {
    throw ConfigError("service.decode", "must be sampling, greedy or beam<width>");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", fmt::format("line {}: {}", e.line(), e.message()));
  }

  ExperimentConfig cfg;
  static const std::set<std::string> sections{
      "world", "oracle", "grammar", "features", "rewards",
      "trainer", "pretrain", "eval", "harness", "service"};
  for (const auto& [section, body] : tree) {
    if (!sections.count(section) || !body.data().empty())
      throw ConfigError(section, "unknown section");
  }

  // The attribute list decides which per-attribute keys are legal, so it is
  // applied before anything else.
  if (const auto w = tree.get_child_optional("world"))
    if (const auto a = w->get_optional<std::string>("attributes"))
      find_field("world.attributes")->set(cfg, trim(*a));

  for (const auto& [section, body] : tree) {
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      const std::string value = trim(node.data());
      if (key == "world.attributes") continue;
      if (const Field* f = find_field(key)) {
        f->set(cfg, value);
        continue;
      }
      bool matched = false;
      if (section == "world") {
        for (auto& a : cfg.world.attributes) {
          if (name == a.name + "_values") {
            a.values = split_list(value);
            matched = true;
          } else if (name == a.name + "_presence") {
            a.presence = to_double(key, value);
            matched = true;
          }
        }
      }
      if (!matched) throw ConfigError(key, "unknown key");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("config file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string sec = f.key.substr(0, f.key.find('.'));
    if (sec != section) {
      if (!section.empty()) {
        if (section == "world")
          for (const auto& a : cfg.world.attributes) {
            out += a.name + "_values = " + join_list(a.values) + "\n";
            out += a.name + "_presence = " + fmt_double(a.presence) + "\n";
          }
        out += "\n";
      }
      section = sec;
      out += "[" + section + "]\n";
    }
    out += f.key.substr(sec.size() + 1) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.harness.out_dir = HarnessConfig{}.out_dir;
  c.harness.workers = HarnessConfig{}.workers;
  c.service = ServiceConfig{};
  return fmt::format("{:016x}", fnv1a(serialize_config(c)));
}

const char* code_version() { return VQG_VERSION_STRING; }

}  // namespace vqg
