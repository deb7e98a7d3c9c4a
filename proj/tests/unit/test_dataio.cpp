#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "capgrpo/dataio.hpp"
#include "capgrpo/random.hpp"

namespace capgrpo {
namespace {

QaRecord sample_record(std::string id) {
  QaRecord r;
  r.id = std::move(id);
  r.question = "Which bar is tallest?";
  r.answer = {AnswerKind::kMultiChoice, "B", {"A", "B", "C"}, std::nullopt};
  r.image_ref = "images/0001.png";
  r.source = "chartqa";
  r.visual_format = "chart";
  return r;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "capgrpo_dataio_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(DataIo, ThreeValidLines) {
  std::stringstream ss;
  const std::vector<QaRecord> recs = {sample_record("a"), sample_record("b"), sample_record("c")};
  write_records(recs, ss);
  const auto res = read_records(ss);
  EXPECT_TRUE(res.issues.empty());
  EXPECT_EQ(res.records, recs);
}

TEST(DataIo, FixedFieldOrder) {
  auto r = sample_record("x");
  r.answer = {AnswerKind::kNumeric, "3.5", {}, 0.01};
  EXPECT_EQ(record_to_line(r),
            R"({"id":"x","question":"Which bar is tallest?","answer":{"kind":"numeric","value":"3.5",)"
            R"("numeric_tolerance":0.01},"image_ref":"images/0001.png","source":"chartqa","visual_format":"chart"})");
  r.image_ref.reset();
  EXPECT_NE(record_to_line(r).find(R"("image_ref":null)"), std::string::npos);
}

TEST(DataIo, MalformedLinesAreReportedWithLineNumbers) {
  std::stringstream ss;
  ss << record_to_line(sample_record("ok1")) << "\n"
     << R"({"id":"no-answer","question":"q"})" << "\n"
     << "\n"
     << "{not json\n"
     << R"({"id":"bad-kind","question":"q","answer":{"kind":"essay","value":"x"}})" << "\n"
     << record_to_line(sample_record("ok1")) << "\n"
     << R"({"id":"bad-format","question":"q","answer":{"kind":"open-text","value":"x"},"visual_format":"video"})" << "\n"
     << record_to_line(sample_record("ok2")) << "\n";
  const auto res = read_records(ss);
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.records[0].id, "ok1");
  EXPECT_EQ(res.records[1].id, "ok2");
  std::vector<int> lines;
  for (const auto& i : res.issues) lines.push_back(i.line);
  EXPECT_EQ(lines, (std::vector<int>{2, 4, 5, 6, 7}));
  EXPECT_NE(res.issues[0].message.find("answer"), std::string::npos);
  EXPECT_NE(res.issues[3].message.find("duplicate"), std::string::npos);
}

TEST(DataIo, LoadIsTotalOverGarbage) {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    std::string s;
    const int len = rng.below_int(200);
    for (int k = 0; k < len; ++k) s += static_cast<char>(rng.below(256));
    std::istringstream in(s);
    EXPECT_NO_THROW(read_records(in));
  }
}

TEST(DataIo, NonAsciiSurvivesByteExactly) {
  auto r = sample_record("u");
  r.question = "Qu'est-ce que c'est ? 图中有几个苹果？ \xF0\x9F\x8D\x8E";
  r.answer = {AnswerKind::kOpenText, "trois pommes — 3", {}, std::nullopt};
  const auto path = temp_file("utf8.jsonl");
  save_records(std::vector<QaRecord>{r}, path);
  const auto res = load_records(path);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].question, r.question);
  EXPECT_EQ(res.records[0], r);
}

TEST(DataIo, InvalidUtf8IsRejectedOnWrite) {
  auto r = sample_record("bad");
  r.question = "\xC3\x28";
  EXPECT_THROW(record_to_line(r), std::invalid_argument);
}

TEST(DataIo, EmptyListIsEmptyFile) {
  const auto path = temp_file("empty.jsonl");
  save_records(std::vector<QaRecord>{}, path);
  EXPECT_EQ(std::filesystem::file_size(path), 0u);
  EXPECT_TRUE(load_records(path).records.empty());
}

TEST(DataIo, DuplicateIdsRejectedOnSave) {
  std::stringstream ss;
  const std::vector<QaRecord> recs = {sample_record("a"), sample_record("a")};
  EXPECT_THROW(write_records(recs, ss), std::invalid_argument);
  EXPECT_TRUE(ss.str().empty());
}

TEST(DataIo, UnreadableFileIsHardError) {
  EXPECT_THROW(load_records("/nonexistent/dir/file.jsonl"), std::runtime_error);
}

TEST(DataIo, SyntheticSplitRoundTrips) {
  const auto split = generate_split(EnvConfig{});
  const auto path = temp_file("train.jsonl");
  save_records(tasks_to_records(split.train), path);
  const auto res = load_records(path);
  EXPECT_TRUE(res.issues.empty());
  EXPECT_EQ(records_to_tasks(res.records), split.train);
}

TEST(DataIo, SyntheticRecordMustAgreeWithItsImage) {
  const auto split = generate_split(EnvConfig{});
  auto rec = task_to_record(split.train[0]);
  EXPECT_EQ(rec.source, "synthetic");
  rec.image_ref = "images/x.png";
  EXPECT_THROW(record_to_task(rec), std::invalid_argument);
  // Swap the answer for a different valid label of the same kind.
  rec = task_to_record(split.train[0]);
  auto labels = answer_labels(4, 4);
  const auto& gold = split.train[0].gold;
  for (const auto& l : labels) {
    Answer other = gold;
    other.value = l;
    try {
      validate(other);
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (accuracy_reward(l, gold) == 1) continue;
    rec.answer = other;
    break;
  }
  EXPECT_THROW(record_to_task(rec), std::invalid_argument);
}

}  // namespace
}  // namespace capgrpo
