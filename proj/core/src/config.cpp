// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace capgrpo {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number_as(std::string_view key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key), "cannot parse '" + std::string(text) + "' as a number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(std::string(key), "value must be finite");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key), "expected true/false, got '" + std::string(text) + "'");
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
using Accessor = T& (*)(RunConfig&);

template <class T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    return std::to_string(v);
  }
}

template <class T, class Check>
Field number(std::string key, Accessor<T> acc, Check check, const char* requirement) {
  Field f;
  f.key = key;
  f.set = [key, acc, check, requirement](RunConfig& c, std::string_view text) {
    T v{};
    if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(key, text);
    } else {
      v = parse_number_as<T>(key, text);
    }
    if (!check(v)) throw ConfigError(key, std::string("must be ") + requirement);
    acc(c) = v;
  };
  f.get = [acc](const RunConfig& c) {
    RunConfig copy = c;
    return show(acc(copy));
  };
  return f;
}

Field text(std::string key, Accessor<std::string> acc) {
  Field f;
  f.key = key;
  f.set = [acc](RunConfig& c, std::string_view v) { acc(c) = std::string(v); };
  f.get = [acc](const RunConfig& c) {
    RunConfig copy = c;
    return acc(copy);
  };
  return f;
}

template <class E, class Parse, class Show>
Field choice(std::string key, Accessor<E> acc, Parse parse, Show shown, const char* options) {
  Field f;
  f.key = key;
  f.set = [key, acc, parse, options](RunConfig& c, std::string_view v) {
    auto e = parse(v);
    if (!e) {
      throw ConfigError(key, "unknown value '" + std::string(v) + "' (expected " + options + ")");
    }
    acc(c) = *e;
  };
  f.get = [acc, shown](const RunConfig& c) {
    RunConfig copy = c;
    return std::string(shown(acc(copy)));
  };
  return f;
}

auto any = [](auto) { return true; };
auto positive = [](auto v) { return v > 0; };
auto nonneg = [](auto v) { return v >= 0; };
auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };

const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back(number<int>("group_size", [](C& c) -> int& { return c.trainer.group_size; },
                            [](int v) { return v >= 2; }, ">= 2"));
    t.push_back(number<double>("temperature", [](C& c) -> double& { return c.trainer.temperature; },
                               positive, "> 0"));
    t.push_back(number<double>("alpha", [](C& c) -> double& { return c.trainer.alpha; }, nonneg,
                               ">= 0"));
    t.push_back(number<double>("beta", [](C& c) -> double& { return c.trainer.beta; }, nonneg,
                               ">= 0"));
    t.push_back(number<double>("clip_epsilon",
                               [](C& c) -> double& { return c.trainer.clip_epsilon; }, open_unit,
                               "in (0, 1)"));
    t.push_back(choice<RatioLevel>("ratio_level",
                                   [](C& c) -> RatioLevel& { return c.trainer.ratio_level; },
                                   parse_ratio_level,
                                   [](RatioLevel r) { return to_string(r); }, "token|sequence"));
    t.push_back(number<long>("t_max", [](C& c) -> long& { return c.trainer.t_max; },
                             [](long v) { return v >= 1; }, ">= 1"));
    t.push_back(choice<KlStrategy>("kl_strategy",
                                   [](C& c) -> KlStrategy& { return c.trainer.kl_strategy; },
                                   parse_kl_strategy,
                                   [](KlStrategy s) { return to_string(s); },
                                   "static|linear|cosine"));
    t.push_back(choice<FormatMode>("format_mode",
                                   [](C& c) -> FormatMode& { return c.trainer.format_mode; },
                                   parse_format_mode,
                                   [](FormatMode m) { return to_string(m); },
                                   "reason-answer|caption-reason-answer"));
    t.push_back(number<double>("learning_rate",
                               [](C& c) -> double& { return c.trainer.learning_rate; }, nonneg,
                               ">= 0"));
    t.push_back(number<bool>("caption_reward_enabled",
                             [](C& c) -> bool& { return c.trainer.caption_reward_enabled; }, any,
                             "a boolean"));
    t.push_back(number<bool>("length_reward_enabled",
                             [](C& c) -> bool& { return c.trainer.length_reward_enabled; }, any,
                             "a boolean"));
    t.push_back(number<double>("length_weight",
                               [](C& c) -> double& { return c.trainer.length_weight; }, nonneg,
                               ">= 0"));
    t.push_back(number<int>("length_target", [](C& c) -> int& { return c.trainer.length_target; },
                            positive, ">= 1"));
    t.push_back(number<bool>("strict_format",
                             [](C& c) -> bool& { return c.trainer.strict_format; }, any,
                             "a boolean"));
    t.push_back(choice<JudgeKind>("judge", [](C& c) -> JudgeKind& { return c.trainer.judge; },
                                  parse_judge_kind, [](JudgeKind k) { return to_string(k); },
                                  "oracle|external"));
    t.push_back(text("judge_endpoint",
                     [](C& c) -> std::string& { return c.trainer.external_judge.endpoint; }));
    t.push_back(
        text("judge_path", [](C& c) -> std::string& { return c.trainer.external_judge.path; }));
    t.push_back(
        text("judge_model", [](C& c) -> std::string& { return c.trainer.external_judge.model; }));
    t.push_back(text("judge_template_file",
                     [](C& c) -> std::string& { return c.trainer.judge_template_file; }));
    t.push_back(number<int>("judge_timeout_ms",
                            [](C& c) -> int& { return c.trainer.external_judge.timeout_ms; },
                            positive, ">= 1"));
    t.push_back(number<int>("judge_max_in_flight",
                            [](C& c) -> int& { return c.trainer.judge_max_in_flight; }, positive,
                            ">= 1"));
    t.push_back(number<int>("old_policy_refresh_every",
                            [](C& c) -> int& { return c.trainer.old_policy_refresh_every; },
                            positive, ">= 1"));
    t.push_back(number<std::uint64_t>("seed",
                                      [](C& c) -> std::uint64_t& { return c.trainer.seed; }, any,
                                      "an unsigned integer"));
    t.push_back(number<int>("tasks_per_step",
                            [](C& c) -> int& { return c.trainer.tasks_per_step; }, positive,
                            ">= 1"));
    t.push_back(number<int>("eval_every", [](C& c) -> int& { return c.trainer.eval_every; },
                            positive, ">= 1"));
    t.push_back(number<int>("checkpoint_every",
                            [](C& c) -> int& { return c.trainer.checkpoint_every; }, positive,
                            ">= 1"));
    t.push_back(number<int>("max_tokens", [](C& c) -> int& { return c.trainer.max_tokens; },
                            positive, ">= 1"));
    t.push_back(number<int>("hidden_dim", [](C& c) -> int& { return c.trainer.hidden_dim; },
                            nonneg, ">= 0"));
    t.push_back(number<bool>("reveal_image", [](C& c) -> bool& { return c.trainer.reveal_image; },
                             any, "a boolean"));
    t.push_back(number<double>("prior_grammar_strength",
                               [](C& c) -> double& { return c.trainer.prior.grammar_strength; },
                               nonneg, ">= 0"));
    t.push_back(number<double>("prior_copy_bias",
                               [](C& c) -> double& { return c.trainer.prior.copy_bias; }, any,
                               "finite"));
    t.push_back(number<double>("prior_attribute_bias",
                               [](C& c) -> double& { return c.trainer.prior.attribute_bias; },
                               any, "finite"));
    t.push_back(number<double>("prior_evidence_bias",
                               [](C& c) -> double& { return c.trainer.prior.evidence_bias; }, any,
                               "finite"));
    t.push_back(number<double>("prior_reasoning_attribute_bias",
                               [](C& c) -> double& {
                                 return c.trainer.prior.reasoning_attribute_bias;
                               },
                               any, "finite"));
    t.push_back(number<double>("prior_filler_bias",
                               [](C& c) -> double& { return c.trainer.prior.filler_bias; }, any,
                               "finite"));
    t.push_back(number<double>("prior_close_slope",
                               [](C& c) -> double& { return c.trainer.prior.close_slope; }, any,
                               "finite"));
    t.push_back(number<double>("prior_close_offset",
                               [](C& c) -> double& { return c.trainer.prior.close_offset; }, any,
                               "finite"));
    t.push_back(number<double>("prior_repeat_penalty",
                               [](C& c) -> double& { return c.trainer.prior.repeat_penalty; },
                               any, "finite"));
    t.push_back(number<double>("prior_hidden_init_scale",
                               [](C& c) -> double& { return c.trainer.prior.hidden_init_scale; },
                               nonneg, ">= 0"));
    t.push_back(number<int>("env_num_attributes",
                            [](C& c) -> int& { return c.env.num_attributes; },
                            [](int v) { return v >= 2 && v <= 9; }, "in [2, 9]"));
    t.push_back(number<int>("env_num_symbols", [](C& c) -> int& { return c.env.num_symbols; },
                            [](int v) { return v >= 2 && v <= 26; }, "in [2, 26]"));
    t.push_back(number<int>("env_train_size", [](C& c) -> int& { return c.env.train_size; },
                            positive, ">= 1"));
    t.push_back(number<int>("env_test_size", [](C& c) -> int& { return c.env.test_size; },
                            positive, ">= 1"));
    t.push_back(number<double>("env_easy_fraction_train",
                               [](C& c) -> double& { return c.env.easy_fraction_train; }, unit,
                               "in [0, 1]"));
    t.push_back(number<double>("env_easy_fraction_test",
                               [](C& c) -> double& { return c.env.easy_fraction_test; }, unit,
                               "in [0, 1]"));
    t.push_back(number<double>("env_shortcut_correlation",
                               [](C& c) -> double& { return c.env.shortcut_correlation; }, unit,
                               "in [0, 1]"));
    const char* tw[] = {"env_weight_lookup", "env_weight_comparison", "env_weight_count"};
    for (int i = 0; i < kNumTemplates; ++i) {
      Field f = number<double>(
          tw[i], [](C& c) -> double& { return c.env.template_weights[0]; }, nonneg, ">= 0");
      f.set = [i, key = std::string(tw[i])](C& c, std::string_view v) {
        const double w = parse_number_as<double>(key, v);
        if (!(w >= 0.0)) throw ConfigError(key, "must be >= 0");
        c.env.template_weights[static_cast<std::size_t>(i)] = w;
      };
      f.get = [i](const C& c) {
        return format_double(c.env.template_weights[static_cast<std::size_t>(i)]);
      };
      t.push_back(std::move(f));
    }
    t.push_back(number<std::uint64_t>("env_seed",
                                      [](C& c) -> std::uint64_t& { return c.env.seed; }, any,
                                      "an unsigned integer"));
    return t;
  }();
  return table;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Settings parse_settings(std::istream& in, std::string_view source_name) {
  Settings out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", std::string(source_name) + ":" + std::to_string(lineno) +
                                ": expected 'key = value'");
    }
    out.emplace_back(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return out;
}

Settings parse_overrides(std::span<const std::string> items) {
  Settings out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(item, "override must look like key=value");
    }
    out.emplace_back(std::string(trim(std::string_view(item).substr(0, eq))),
                     std::string(trim(std::string_view(item).substr(eq + 1))));
  }
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError(std::string(key), "unknown configuration key");
}

void apply_settings(RunConfig& cfg, const Settings& settings) {
  for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  RunConfig cfg;
  apply_settings(cfg, parse_settings(in, path.string()));
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.env.num_symbols < cfg.env.num_attributes) {
    throw ConfigError("env_num_symbols", "must be >= env_num_attributes (slots hold distinct symbols)");
  }
  double total = 0.0;
  for (double w : cfg.env.template_weights) total += w;
  if (!(total > 0.0)) throw ConfigError("env_weight_lookup", "some template weight must be > 0");
  if (cfg.trainer.judge == JudgeKind::kExternal &&
      cfg.trainer.external_judge.endpoint.rfind("http://", 0) != 0) {
    throw ConfigError("judge_endpoint", "must start with http://");
  }
  try {
    validate(cfg.trainer);
    validate(cfg.env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(cfg) << "\n";
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace capgrpo
