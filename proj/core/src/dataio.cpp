// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "capgrpo/config.hpp"
#include "capgrpo/vocab.hpp"

namespace capgrpo {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kSyntheticPrefix = "synthetic:";

QaRecord record_from_json(const ojson& j) {
  if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
  auto need_string = [&](const ojson& obj, const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
    if (!it->is_string()) {
      throw std::invalid_argument(std::string("field \"") + key + "\" must be a string");
    }
    return it->get<std::string>();
  };
  QaRecord r;
  r.id = need_string(j, "id");
  if (r.id.empty()) throw std::invalid_argument("field \"id\" is empty");
  r.question = need_string(j, "question");
  auto ans = j.find("answer");
  if (ans == j.end()) throw std::invalid_argument("missing field \"answer\"");
  if (!ans->is_object()) throw std::invalid_argument("field \"answer\" must be an object");
  const auto kind_text = need_string(*ans, "kind");
  const auto kind = parse_answer_kind(kind_text);
  if (!kind) throw std::invalid_argument("unknown answer kind \"" + kind_text + "\"");
  r.answer.kind = *kind;
  r.answer.value = need_string(*ans, "value");
  if (auto c = ans->find("choices"); c != ans->end() && !c->is_null()) {
    if (!c->is_array()) throw std::invalid_argument("answer choices must be an array");
    for (const auto& x : *c) {
      if (!x.is_string()) throw std::invalid_argument("answer choices must be strings");
      r.answer.choices.push_back(x.get<std::string>());
    }
  }
  if (auto t = ans->find("numeric_tolerance"); t != ans->end() && !t->is_null()) {
    if (!t->is_number()) throw std::invalid_argument("numeric_tolerance must be a number");
    r.answer.numeric_tolerance = t->get<double>();
  }
  validate(r.answer);
  if (auto img = j.find("image_ref"); img != j.end() && !img->is_null()) {
    if (!img->is_string()) throw std::invalid_argument("field \"image_ref\" must be a string");
    r.image_ref = img->get<std::string>();
  }
  if (j.contains("source")) r.source = need_string(j, "source");
  if (j.contains("visual_format")) {
    r.visual_format = need_string(j, "visual_format");
    if (!is_visual_format(r.visual_format)) {
      throw std::invalid_argument("unknown visual_format \"" + r.visual_format + "\"");
    }
  }
  return r;
}

int parse_int(std::string_view s, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad ") + what + " in synthetic image_ref");
  }
  return v;
}

}  // namespace

bool is_visual_format(std::string_view tag) {
  return std::find(kVisualFormats.begin(), kVisualFormats.end(), tag) != kVisualFormats.end();
}

LoadResult read_records(std::istream& in) {
  LoadResult out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = ojson::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded()) throw std::invalid_argument("malformed JSON");
      auto rec = record_from_json(j);
      if (!seen.insert(rec.id).second) {
        throw std::invalid_argument("duplicate id \"" + rec.id + "\"");
      }
      out.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      out.issues.push_back({lineno, e.what()});
    }
  }
  return out;
}

LoadResult load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open record file " + path.string());
  return read_records(in);
}

std::string record_to_line(const QaRecord& r) {
  if (r.id.empty()) throw std::invalid_argument("record id is empty");
  validate(r.answer);
  if (!is_visual_format(r.visual_format)) {
    throw std::invalid_argument("unknown visual_format \"" + r.visual_format + "\"");
  }
  ojson j;
  j["id"] = r.id;
  j["question"] = r.question;
  ojson a;
  a["kind"] = std::string(to_string(r.answer.kind));
  a["value"] = r.answer.value;
  if (!r.answer.choices.empty()) a["choices"] = r.answer.choices;
  if (r.answer.numeric_tolerance) a["numeric_tolerance"] = *r.answer.numeric_tolerance;
  j["answer"] = std::move(a);
  j["image_ref"] = r.image_ref ? ojson(*r.image_ref) : ojson(nullptr);
  j["source"] = r.source;
  j["visual_format"] = r.visual_format;
  try {
    return j.dump(-1, ' ', false, ojson::error_handler_t::strict);
  } catch (const nlohmann::json::type_error& e) {
    throw std::invalid_argument("record " + r.id + " is not valid UTF-8");
  }
}

void write_records(std::span<const QaRecord> records, std::ostream& out) {
  std::set<std::string> ids;
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate record id \"" + r.id + "\"");
    lines.push_back(record_to_line(r));
  }
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw std::runtime_error("failed to write records");
}

void save_records(std::span<const QaRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write record file " + path.string());
  write_records(records, out);
}

QaRecord task_to_record(const SyntheticTask& task) {
  QaRecord r;
  r.id = task.task_id;
  r.question = task.prompt_text();
  r.answer = task.gold;
  std::string ref(kSyntheticPrefix);
  ref += "v=" + std::to_string(task.num_symbols);
  ref += ";rho=" + format_double(task.cue_correlation);
  ref += ";difficulty=" + std::string(to_string(task.difficulty));
  if (task.shortcut_cue) ref += ";cue=" + std::to_string(*task.shortcut_cue);
  for (std::size_t s = 0; s < task.attributes.size(); ++s) {
    ref += ";" + attribute_text(static_cast<int>(s), task.attributes[s]);
  }
  r.image_ref = ref;
  r.source = "synthetic";
  r.visual_format = "general-scene";
  return r;
}

SyntheticTask record_to_task(const QaRecord& record) {
  if (!record.image_ref || record.image_ref->rfind(kSyntheticPrefix, 0) != 0) {
    throw std::invalid_argument("record " + record.id + " is not a synthetic task");
  }
  std::string_view rest = std::string_view(*record.image_ref).substr(kSyntheticPrefix.size());
  std::map<std::string, std::string, std::less<>> kv;
  std::vector<std::pair<int, int>> attrs;
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const auto item = rest.substr(0, semi);
    rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
    if (auto a = parse_attribute_text(item)) {
      attrs.push_back(*a);
      continue;
    }
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("bad synthetic image_ref item");
    kv.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
  }
  SyntheticTask t;
  t.task_id = record.id;
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(std::string("synthetic image_ref lacks ") + key);
    return it->second;
  };
  t.num_symbols = parse_int(get("v"), "v");
  {
    const auto& rho = get("rho");
    auto [ptr, ec] = std::from_chars(rho.data(), rho.data() + rho.size(), t.cue_correlation);
    if (ec != std::errc{} || ptr != rho.data() + rho.size()) {
      throw std::invalid_argument("bad rho in synthetic image_ref");
    }
  }
  const auto& diff = get("difficulty");
  if (diff == "easy") {
    t.difficulty = Difficulty::kEasy;
  } else if (diff == "hard") {
    t.difficulty = Difficulty::kHard;
  } else {
    throw std::invalid_argument("bad difficulty in synthetic image_ref");
  }
  if (auto it = kv.find("cue"); it != kv.end()) t.shortcut_cue = parse_int(it->second, "cue");
  t.attributes.assign(attrs.size(), -1);
  for (auto [slot, sym] : attrs) {
    if (slot < 0 || static_cast<std::size_t>(slot) >= attrs.size() || sym >= t.num_symbols ||
        t.attributes[static_cast<std::size_t>(slot)] != -1) {
      throw std::invalid_argument("bad slot list in synthetic image_ref");
    }
    t.attributes[static_cast<std::size_t>(slot)] = sym;
  }
  t.question = parse_question(record.question);
  t.gold = record.answer;
  t.gold_label = answer_label(t.question, t.attributes, t.num_symbols);
  const auto labels = answer_labels(static_cast<int>(t.attributes.size()), t.num_symbols);
  if (accuracy_reward(labels.at(static_cast<std::size_t>(t.gold_label)), t.gold) != 1) {
    throw std::invalid_argument("record " + record.id + ": answer disagrees with attributes");
  }
  return t;
}

std::vector<QaRecord> tasks_to_records(std::span<const SyntheticTask> tasks) {
  std::vector<QaRecord> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(task_to_record(t));
  return out;
}

std::vector<SyntheticTask> records_to_tasks(std::span<const QaRecord> records) {
  std::vector<SyntheticTask> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(record_to_task(r));
  return out;
}

}  // namespace capgrpo
