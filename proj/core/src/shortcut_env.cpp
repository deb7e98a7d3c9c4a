// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/shortcut_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <regex>
#include <stdexcept>

#include "capgrpo/random.hpp"

namespace capgrpo {

namespace {

constexpr std::string_view kHintPrefix = " Hint: ";

std::string slot_list_text(std::span<const int> slots) {
  std::string out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i > 0) out += (i + 1 == slots.size()) ? " and " : ", ";
    out += std::to_string(slots[i] + 1);
  }
  return out;
}

std::string question_text(const Question& q) {
  switch (q.tmpl) {
    case QuestionTemplate::kLookup:
      return "What symbol is in slot " + std::to_string(q.slots.at(0) + 1) + "?";
    case QuestionTemplate::kComparison:
      return "Which symbol is greater, the one in slot " +
             std::to_string(q.slots.at(0) + 1) + " or the one in slot " +
             std::to_string(q.slots.at(1) + 1) + "?";
    case QuestionTemplate::kCount:
      return "How many of slots " + slot_list_text(q.slots) +
             " hold a symbol greater than " + symbol_name(q.threshold) + "?";
  }
  return {};
}

Answer gold_answer(const Question& q, int label, int num_symbols) {
  Answer a;
  if (q.tmpl == QuestionTemplate::kCount) {
    a.kind = AnswerKind::kNumeric;
    a.value = std::to_string(label - num_symbols);
  } else {
    a.kind = AnswerKind::kMultiChoice;
    a.value = symbol_name(label);
    for (int s = 0; s < num_symbols; ++s) a.choices.push_back(symbol_name(s));
  }
  return a;
}

std::vector<int> distinct_symbols(Rng& rng, int k, int v) {
  std::vector<int> pool(static_cast<std::size_t>(v));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    int j = i + rng.below_int(v - i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

QuestionTemplate pick_template(Rng& rng, const std::array<double, kNumTemplates>& w) {
  const double total = w[0] + w[1] + w[2];
  double u = rng.uniform() * total;
  for (int t = 0; t < kNumTemplates; ++t) {
    if (u < w[static_cast<std::size_t>(t)]) return static_cast<QuestionTemplate>(t);
    u -= w[static_cast<std::size_t>(t)];
  }
  for (int t = kNumTemplates - 1; t >= 0; --t) {
    if (w[static_cast<std::size_t>(t)] > 0) return static_cast<QuestionTemplate>(t);
  }
  return QuestionTemplate::kLookup;
}

Question make_question(Rng& rng, QuestionTemplate t, int k, int v) {
  Question q;
  q.tmpl = t;
  switch (t) {
    case QuestionTemplate::kLookup:
      q.slots = {rng.below_int(k)};
      break;
    case QuestionTemplate::kComparison:
      q.slots = distinct_symbols(rng, 2, k);  // two distinct slots, random order
      break;
    case QuestionTemplate::kCount: {
      q.slots = distinct_symbols(rng, count_span(k), k);
      std::sort(q.slots.begin(), q.slots.end());
      q.threshold = rng.below_int(std::max(1, v - 1));
      break;
    }
  }
  q.text = question_text(q);
  return q;
}

std::vector<SyntheticTask> generate_tasks(const EnvConfig& cfg, int size, double easy_fraction,
                                          std::string_view prefix, std::uint64_t stream) {
  Rng rng(mix_seed(cfg.seed, stream));
  const int k = cfg.num_attributes;
  const int v = cfg.num_symbols;

  const int n_easy = static_cast<int>(std::lround(easy_fraction * size));
  std::vector<bool> easy(static_cast<std::size_t>(size), false);
  std::fill(easy.begin(), easy.begin() + n_easy, true);
  for (int i = size - 1; i > 0; --i) {
    int j = rng.below_int(i + 1);
    bool tmp = easy[static_cast<std::size_t>(i)];
    easy[static_cast<std::size_t>(i)] = easy[static_cast<std::size_t>(j)];
    easy[static_cast<std::size_t>(j)] = tmp;
  }

  std::vector<SyntheticTask> tasks;
  tasks.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    SyntheticTask task;
    char id[32];
    std::snprintf(id, sizeof id, "%.*s-%05d", static_cast<int>(prefix.size()),
                  prefix.data(), i);
    task.task_id = id;
    task.num_symbols = v;
    task.cue_correlation = cfg.shortcut_correlation;
    task.attributes = distinct_symbols(rng, k, v);
    task.question = make_question(rng, pick_template(rng, cfg.template_weights), k, v);
    task.gold_label = answer_label(task.question, task.attributes, v);
    task.gold = gold_answer(task.question, task.gold_label, v);
    task.difficulty = easy[static_cast<std::size_t>(i)] ? Difficulty::kEasy : Difficulty::kHard;
    if (task.difficulty == Difficulty::kEasy) {
      auto [lo, hi] = label_range(task.question.tmpl, k, v);
      const int width = hi - lo;
      if (rng.uniform() < cfg.shortcut_correlation || width <= 1) {
        task.shortcut_cue = task.gold_label;
      } else {
        int other = lo + rng.below_int(width - 1);
        if (other >= task.gold_label) ++other;
        task.shortcut_cue = other;
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

// Calls fn(assignment) for every injective slot -> symbol map.
void for_each_assignment(int k, int v, const std::function<void(std::span<const int>)>& fn) {
  std::vector<int> cur(static_cast<std::size_t>(k), 0);
  std::vector<bool> used(static_cast<std::size_t>(v), false);
  std::function<void(int)> rec = [&](int slot) {
    if (slot == k) {
      fn(cur);
      return;
    }
    for (int s = 0; s < v; ++s) {
      if (used[static_cast<std::size_t>(s)]) continue;
      used[static_cast<std::size_t>(s)] = true;
      cur[static_cast<std::size_t>(slot)] = s;
      rec(slot + 1);
      used[static_cast<std::size_t>(s)] = false;
    }
  };
  rec(0);
}

std::vector<int> parse_slot_list(const std::string& list) {
  std::vector<int> out;
  static const std::regex kNum(R"((\d+))");
  for (auto it = std::sregex_iterator(list.begin(), list.end(), kNum);
       it != std::sregex_iterator(); ++it) {
    out.push_back(std::stoi((*it)[1].str()) - 1);
  }
  return out;
}

}  // namespace

std::string_view to_string(QuestionTemplate t) {
  switch (t) {
    case QuestionTemplate::kLookup: return "lookup";
    case QuestionTemplate::kComparison: return "comparison";
    case QuestionTemplate::kCount: return "count";
  }
  return "lookup";
}

std::string_view to_string(Difficulty d) {
  return d == Difficulty::kEasy ? "easy" : "hard";
}

std::string SyntheticTask::prompt_text() const {
  std::string out = question.text;
  if (shortcut_cue) {
    auto labels = answer_labels(static_cast<int>(attributes.size()), num_symbols);
    out.append(kHintPrefix);
    out.append(labels.at(static_cast<std::size_t>(*shortcut_cue)));
    out.push_back('.');
  }
  return out;
}

void validate(const EnvConfig& cfg) {
  auto fraction = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (cfg.num_attributes < 2) throw std::invalid_argument("num_attributes must be >= 2");
  if (cfg.num_symbols < cfg.num_attributes) {
    throw std::invalid_argument("num_symbols must be >= num_attributes (slots hold distinct symbols)");
  }
  if (cfg.num_symbols > 26) throw std::invalid_argument("num_symbols must be <= 26");
  if (cfg.num_attributes > 9) throw std::invalid_argument("num_attributes must be <= 9");
  if (cfg.train_size < 1 || cfg.test_size < 1) throw std::invalid_argument("split sizes must be >= 1");
  if (!fraction(cfg.easy_fraction_train) || !fraction(cfg.easy_fraction_test)) {
    throw std::invalid_argument("easy fractions must lie in [0, 1]");
  }
  if (!fraction(cfg.shortcut_correlation)) {
    throw std::invalid_argument("shortcut_correlation must lie in [0, 1]");
  }
  double total = 0.0;
  for (double w : cfg.template_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("template weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("at least one template weight must be positive");
}

Split generate_split(const EnvConfig& cfg) {
  validate(cfg);
  Split split;
  split.train = generate_tasks(cfg, cfg.train_size, cfg.easy_fraction_train, "train", 1);
  split.test = generate_tasks(cfg, cfg.test_size, cfg.easy_fraction_test, "test", 2);
  return split;
}

int count_span(int num_attributes) { return std::min(3, num_attributes); }

int num_answer_labels(int num_attributes, int num_symbols) {
  return num_symbols + count_span(num_attributes) + 1;
}

std::vector<std::string> answer_labels(int num_attributes, int num_symbols) {
  std::vector<std::string> out;
  for (int s = 0; s < num_symbols; ++s) out.push_back(symbol_name(s));
  for (int c = 0; c <= count_span(num_attributes); ++c) out.push_back(std::to_string(c));
  return out;
}

std::pair<int, int> label_range(QuestionTemplate t, int num_attributes, int num_symbols) {
  if (t == QuestionTemplate::kCount) {
    return {num_symbols, num_symbols + count_span(num_attributes) + 1};
  }
  return {0, num_symbols};
}

std::vector<std::string> default_fillers() { return {"so", "then", "hmm", "ok"}; }

Vocabulary make_vocabulary(const EnvConfig& cfg) {
  return Vocabulary(cfg.num_attributes, cfg.num_symbols,
                    answer_labels(cfg.num_attributes, cfg.num_symbols), default_fillers());
}

TaskFeatureLayout TaskFeatureLayout::make(int num_attributes, int num_symbols) {
  TaskFeatureLayout l;
  l.num_attributes = num_attributes;
  l.num_symbols = num_symbols;
  l.num_labels = num_answer_labels(num_attributes, num_symbols);
  l.template_offset = 0;
  l.slot_offset = kNumTemplates;
  l.threshold_offset = l.slot_offset + num_attributes;
  l.cue_offset = l.threshold_offset + num_symbols;
  l.attribute_offset = l.cue_offset + l.num_labels;
  l.dim = l.attribute_offset + num_attributes * num_symbols;
  return l;
}

std::vector<double> task_context_features(const SyntheticTask& task, bool reveal_image) {
  const int k = static_cast<int>(task.attributes.size());
  const auto layout = TaskFeatureLayout::make(k, task.num_symbols);
  std::vector<double> x(static_cast<std::size_t>(layout.dim), 0.0);
  auto set = [&](int i) { x[static_cast<std::size_t>(i)] = 1.0; };
  set(layout.template_offset + static_cast<int>(task.question.tmpl));
  for (int s : task.question.slots) set(layout.slot_offset + s);
  if (task.question.threshold >= 0) set(layout.threshold_offset + task.question.threshold);
  if (task.shortcut_cue) set(layout.cue_offset + *task.shortcut_cue);
  if (reveal_image) {
    for (int s = 0; s < k; ++s) set(layout.attribute_index(s, task.attributes[static_cast<std::size_t>(s)]));
  }
  return x;
}

int answer_label(const Question& q, std::span<const int> attributes, int num_symbols) {
  auto at = [&](int slot) { return attributes[static_cast<std::size_t>(slot)]; };
  switch (q.tmpl) {
    case QuestionTemplate::kLookup:
      return at(q.slots.at(0));
    case QuestionTemplate::kComparison:
      return std::max(at(q.slots.at(0)), at(q.slots.at(1)));
    case QuestionTemplate::kCount: {
      int n = 0;
      for (int s : q.slots) n += at(s) > q.threshold ? 1 : 0;
      return num_symbols + n;
    }
  }
  throw std::invalid_argument("unknown template");
}

Question parse_question(std::string_view text) {
  std::string s(text);
  if (auto hint = s.find(kHintPrefix); hint != std::string::npos) s.resize(hint);
  static const std::regex kLookupRe(R"(^What symbol is in slot (\d+)\?$)");
  static const std::regex kComparisonRe(
      R"(^Which symbol is greater, the one in slot (\d+) or the one in slot (\d+)\?$)");
  static const std::regex kCountRe(
      R"(^How many of slots ([\d, and]+) hold a symbol greater than ([A-Z])\?$)");
  std::smatch m;
  Question q;
  if (std::regex_match(s, m, kLookupRe)) {
    q.tmpl = QuestionTemplate::kLookup;
    q.slots = {std::stoi(m[1].str()) - 1};
  } else if (std::regex_match(s, m, kComparisonRe)) {
    q.tmpl = QuestionTemplate::kComparison;
    q.slots = {std::stoi(m[1].str()) - 1, std::stoi(m[2].str()) - 1};
  } else if (std::regex_match(s, m, kCountRe)) {
    q.tmpl = QuestionTemplate::kCount;
    q.slots = parse_slot_list(m[1].str());
    q.threshold = m[2].str()[0] - 'A';
  } else {
    throw std::invalid_argument("unknown question template: " + s);
  }
  for (int slot : q.slots) {
    if (slot < 0) throw std::invalid_argument("slot numbers are 1-based: " + s);
  }
  q.text = s;
  return q;
}

std::vector<AttributeMention> caption_mentions(std::string_view caption) {
  std::vector<AttributeMention> out;
  std::size_t pos = 0;
  while (pos < caption.size()) {
    auto b = caption.find_first_not_of(" \t\r\n", pos);
    if (b == std::string_view::npos) break;
    auto e = caption.find_first_of(" \t\r\n", b);
    if (e == std::string_view::npos) e = caption.size();
    if (auto a = parse_attribute_text(caption.substr(b, e - b))) out.push_back(*a);
    pos = e;
  }
  return out;
}

std::optional<std::string> oracle_answer(std::string_view question,
                                         std::span<const AttributeMention> caption_tokens) {
  const Question q = parse_question(question);
  int max_slot = 0;
  for (int s : q.slots) max_slot = std::max(max_slot, s);
  std::vector<int> known(static_cast<std::size_t>(max_slot + 1), -1);
  for (int s : q.slots) {
    for (const auto& [slot, sym] : caption_tokens) {
      if (slot != s) continue;
      int& cell = known[static_cast<std::size_t>(s)];
      if (cell >= 0 && cell != sym) return std::nullopt;  // contradictory caption
      cell = sym;
    }
    if (known[static_cast<std::size_t>(s)] < 0) return std::nullopt;
  }
  switch (q.tmpl) {
    case QuestionTemplate::kLookup:
      return symbol_name(known[static_cast<std::size_t>(q.slots[0])]);
    case QuestionTemplate::kComparison:
      return symbol_name(std::max(known[static_cast<std::size_t>(q.slots[0])],
                                  known[static_cast<std::size_t>(q.slots[1])]));
    case QuestionTemplate::kCount: {
      int n = 0;
      for (int s : q.slots) n += known[static_cast<std::size_t>(s)] > q.threshold ? 1 : 0;
      return std::to_string(n);
    }
  }
  return std::nullopt;
}

double text_only_bayes_accuracy(const SyntheticTask& task) {
  const int k = static_cast<int>(task.attributes.size());
  const int v = task.num_symbols;
  std::vector<double> weight(static_cast<std::size_t>(num_answer_labels(k, v)), 0.0);
  for_each_assignment(k, v, [&](std::span<const int> a) {
    weight[static_cast<std::size_t>(answer_label(task.question, a, v))] += 1.0;
  });
  if (task.shortcut_cue) {
    auto [lo, hi] = label_range(task.question.tmpl, k, v);
    const int width = hi - lo;
    const double rho = task.cue_correlation;
    for (int l = lo; l < hi; ++l) {
      const double like = (l == *task.shortcut_cue)
                              ? (width <= 1 ? 1.0 : rho)
                              : (1.0 - rho) / static_cast<double>(width - 1);
      weight[static_cast<std::size_t>(l)] *= like;
    }
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  return *std::max_element(weight.begin(), weight.end()) / total;
}

double text_only_bayes_accuracy(std::span<const SyntheticTask> split) {
  if (split.empty()) throw std::invalid_argument("empty split");
  double sum = 0.0;
  for (const auto& t : split) sum += text_only_bayes_accuracy(t);
  return sum / static_cast<double>(split.size());
}

JudgeVerdict OracleJudge::ask(std::string_view caption, std::string_view question) {
  JudgeVerdict v;
  v.judge_id = id();
  try {
    auto mentions = caption_mentions(caption);
    auto ans = oracle_answer(question, mentions);
    v.answered = ans ? *ans : std::string(kInsufficient);
  } catch (const std::invalid_argument& e) {
    v.error = true;
    v.error_message = e.what();
  }
  return v;
}

}  // namespace capgrpo
