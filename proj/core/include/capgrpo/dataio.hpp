// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited JSON question-answer records. One object per line with the
// fields id, question, answer {kind, value, choices, numeric_tolerance},
// image_ref, source and visual_format, always in that order.

#ifndef CAPGRPO_DATAIO_HPP_
#define CAPGRPO_DATAIO_HPP_

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capgrpo/rewards.hpp"
#include "capgrpo/shortcut_env.hpp"

namespace capgrpo {

inline constexpr std::array<std::string_view, 7> kVisualFormats = {
    "chart", "table", "document", "general-scene", "math", "diagram", "3d"};

bool is_visual_format(std::string_view tag);

struct QaRecord {
  std::string id;
  std::string question;
  Answer answer;
  std::optional<std::string> image_ref;
  std::string source;
  std::string visual_format = "general-scene";

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

struct LoadIssue {
  int line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<QaRecord> records;
  std::vector<LoadIssue> issues;
};

// Never throws on content; malformed lines land in `issues`. A repeated id is
// reported and the later line dropped.
LoadResult read_records(std::istream& in);
// Throws std::runtime_error when the file cannot be opened.
LoadResult load_records(const std::filesystem::path& path);

// Throws std::invalid_argument on duplicate ids, invalid answers or text that
// is not valid UTF-8.
std::string record_to_line(const QaRecord& record);
void write_records(std::span<const QaRecord> records, std::ostream& out);
void save_records(std::span<const QaRecord> records, const std::filesystem::path& path);

// Synthetic tasks keep their latent attributes in image_ref, e.g.
// "synthetic:v=4;rho=0.95;difficulty=easy;cue=2;s1=B;s2=D;s3=A;s4=C".
QaRecord task_to_record(const SyntheticTask& task);
// Throws std::invalid_argument when the record is not a synthetic task.
SyntheticTask record_to_task(const QaRecord& record);

std::vector<QaRecord> tasks_to_records(std::span<const SyntheticTask> tasks);
std::vector<SyntheticTask> records_to_tasks(std::span<const QaRecord> records);

}  // namespace capgrpo

#endif  // CAPGRPO_DATAIO_HPP_
