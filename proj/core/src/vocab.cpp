// SPDX-License-Identifier: Apache-2.0

#include "capgrpo/vocab.hpp"

#include <charconv>
#include <stdexcept>

#include "capgrpo/structured_output.hpp"

namespace capgrpo {

std::string symbol_name(int symbol) {
  if (symbol < 0 || symbol >= 26) throw std::out_of_range("symbol index");
  return std::string(1, static_cast<char>('A' + symbol));
}

std::string attribute_text(int slot, int symbol) {
  return "s" + std::to_string(slot + 1) + "=" + symbol_name(symbol);
}

std::optional<std::pair<int, int>> parse_attribute_text(std::string_view text) {
  if (text.size() < 4 || text.front() != 's') return std::nullopt;
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq + 2 != text.size()) return std::nullopt;
  int slot = 0;
  auto digits = text.substr(1, eq - 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), slot);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || slot < 1) {
    return std::nullopt;
  }
  char sym = text.back();
  if (sym < 'A' || sym > 'Z') return std::nullopt;
  return std::pair{slot - 1, sym - 'A'};
}

Vocabulary::Vocabulary(int num_slots, int num_symbols, std::vector<std::string> labels,
                       std::vector<std::string> fillers)
    : num_slots_(num_slots),
      num_symbols_(num_symbols),
      labels_(std::move(labels)),
      fillers_(std::move(fillers)) {
  if (num_slots < 1 || num_symbols < 1 || num_symbols > 26) {
    throw std::invalid_argument("vocabulary needs 1..26 symbols and >= 1 slot");
  }
  text_.emplace_back("<end>");
  for (auto tag : kTagLiterals) text_.emplace_back(tag);
  attribute_base_ = static_cast<int>(text_.size());
  for (int s = 0; s < num_slots_; ++s) {
    for (int y = 0; y < num_symbols_; ++y) text_.push_back(attribute_text(s, y));
  }
  filler_base_ = static_cast<int>(text_.size());
  for (const auto& f : fillers_) text_.push_back(f);
  label_base_ = static_cast<int>(text_.size());
  for (const auto& l : labels_) text_.push_back(l);
}

int Vocabulary::attribute_id(int slot, int symbol) const {
  if (slot < 0 || slot >= num_slots_ || symbol < 0 || symbol >= num_symbols_) {
    throw std::out_of_range("attribute token index");
  }
  return attribute_base_ + slot * num_symbols_ + symbol;
}

TokenKind Vocabulary::kind(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id");
  if (id == 0) return TokenKind::kEnd;
  if (id < attribute_base_) return TokenKind::kTag;
  if (id < filler_base_) return TokenKind::kAttribute;
  if (id < label_base_) return TokenKind::kFiller;
  return TokenKind::kLabel;
}

std::optional<TagId> Vocabulary::tag_of(int id) const {
  if (kind(id) != TokenKind::kTag) return std::nullopt;
  return static_cast<TagId>(id - 1);
}

std::optional<std::pair<int, int>> Vocabulary::attribute_of(int id) const {
  if (kind(id) != TokenKind::kAttribute) return std::nullopt;
  int rel = id - attribute_base_;
  return std::pair{rel / num_symbols_, rel % num_symbols_};
}

std::optional<int> Vocabulary::label_of(int id) const {
  if (kind(id) != TokenKind::kLabel) return std::nullopt;
  return id - label_base_;
}

std::optional<int> Vocabulary::find(std::string_view text) const {
  for (int i = 0; i < size(); ++i) {
    if (text_[static_cast<std::size_t>(i)] == text) return i;
  }
  return std::nullopt;
}

std::string Vocabulary::detokenize(std::span<const int> tokens) const {
  std::string out;
  bool prev_word = false;
  for (int id : tokens) {
    switch (kind(id)) {
      case TokenKind::kEnd:
        return out;
      case TokenKind::kTag:
        out.append(text(id));
        prev_word = false;
        break;
      default:
        if (prev_word) out.push_back(' ');
        out.append(text(id));
        prev_word = true;
        break;
    }
  }
  return out;
}

}  // namespace capgrpo
