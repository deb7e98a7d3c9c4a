// SPDX-License-Identifier: Apache-2.0

#ifndef CAPGRPO_VOCAB_HPP_
#define CAPGRPO_VOCAB_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capgrpo {

enum class TokenKind { kEnd, kTag, kAttribute, kFiller, kLabel };

enum class TagId { kInfoOpen, kInfoClose, kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose };

/// Token inventory of the desk-scale policy: end marker, the six format tags,
/// one attribute token per (slot, symbol) pair rendered "s<slot>=<symbol>",
/// a few filler words and one token per answer label.
class Vocabulary {
 public:
  Vocabulary(int num_slots, int num_symbols, std::vector<std::string> labels,
             std::vector<std::string> fillers);

  int size() const { return static_cast<int>(text_.size()); }
  int num_slots() const { return num_slots_; }
  int num_symbols() const { return num_symbols_; }
  int num_labels() const { return static_cast<int>(labels_.size()); }
  int num_fillers() const { return static_cast<int>(fillers_.size()); }

  int end_id() const { return 0; }
  int tag_id(TagId tag) const { return 1 + static_cast<int>(tag); }
  int attribute_id(int slot, int symbol) const;
  int filler_id(int i) const { return filler_base_ + i; }
  int label_id(int label) const { return label_base_ + label; }

  TokenKind kind(int id) const;
  std::optional<TagId> tag_of(int id) const;
  // (slot, symbol) of an attribute token.
  std::optional<std::pair<int, int>> attribute_of(int id) const;
  std::optional<int> label_of(int id) const;

  const std::string& text(int id) const { return text_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> find(std::string_view text) const;

  // Tags are concatenated directly; other tokens inside a run are separated by
  // single spaces. The end token is not rendered.
  std::string detokenize(std::span<const int> tokens) const;

 private:
  int num_slots_;
  int num_symbols_;
  std::vector<std::string> labels_;
  std::vector<std::string> fillers_;
  int attribute_base_ = 0;
  int filler_base_ = 0;
  int label_base_ = 0;
  std::vector<std::string> text_;
};

std::string symbol_name(int symbol);
std::string attribute_text(int slot, int symbol);
// Parses "s<slot>=<symbol>" (slot 1-based in text). Returns 0-based indices.
std::optional<std::pair<int, int>> parse_attribute_text(std::string_view text);

}  // namespace capgrpo

#endif  // CAPGRPO_VOCAB_HPP_
