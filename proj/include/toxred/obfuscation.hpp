// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace toxred::obf {

// The four surface-variant rewriting strategies, in canonical order.
enum class ObfuscationType { HOMOPHONE, TRANSPOSITION, TRADITIONAL_MIX, EMOJI };

inline constexpr ObfuscationType kAllTypes[] = {
    ObfuscationType::HOMOPHONE,
    ObfuscationType::TRANSPOSITION,
    ObfuscationType::TRADITIONAL_MIX,
    ObfuscationType::EMOJI,
};

const char* to_string(ObfuscationType kind);
ObfuscationType obfuscation_type_from_string(const std::string& s);

// Replacement rules for one variant kind. Transposition carries marker spans
// instead of replacements: swaps happen inside marker matches only.
struct RuleTable {
  ObfuscationType kind = ObfuscationType::HOMOPHONE;
  // source span -> replacement alternatives, keyed/valued in scalar values
  std::map<std::u32string, std::vector<std::u32string>> mappings;
  std::vector<std::u32string> markers;  // TRANSPOSITION only

  void validate() const;
};

class RuleTableSet {
 public:
  // TSV columns: kind, key, replacement (replacement empty for transposition
  // marker rows). UTF-8; keys and replacements are NFC-normalized on load.
  static RuleTableSet load_tsv(const std::filesystem::path& path);

  const RuleTable& table(ObfuscationType kind) const;
  bool has(ObfuscationType kind) const;
  void add(RuleTable table);

 private:
  std::map<ObfuscationType, RuleTable> tables_;
};

// One span replacement at a codepoint position of the original text.
struct Edit {
  std::size_t position = 0;  // Unicode scalar values, never bytes
  std::u32string before;
  std::u32string after;
};

struct RewriteOutcome {
  std::string original;
  std::string variant;
  ObfuscationType kind = ObfuscationType::HOMOPHONE;
  std::vector<Edit> edits;
  bool changed = false;
};

struct RewriteOptions {
  // Edits per text are capped to keep variants readable.
  int max_edits = 3;
};

// Applies `edits` to `original`; the result must reproduce the variant
// exactly, which the tests assert for every outcome.
std::string replay_edits(std::string_view original, std::span<const Edit> edits);

RewriteOutcome apply_homophone(std::string_view text, const RuleTable& table,
                               std::uint64_t seed, RewriteOptions options = {});
RewriteOutcome apply_transposition(std::string_view text, const RuleTable& table,
                                   std::uint64_t seed, RewriteOptions options = {});
RewriteOutcome apply_traditional_mix(std::string_view text, const RuleTable& table,
                                     std::uint64_t seed, RewriteOptions options = {});
RewriteOutcome apply_emoji(std::string_view text, const RuleTable& table,
                           std::uint64_t seed, RewriteOptions options = {});

// Dispatches on kind; deterministic for a fixed (text, tables, seed).
RewriteOutcome rewrite(std::string_view text, ObfuscationType kind,
                       const RuleTableSet& tables, std::uint64_t seed,
                       RewriteOptions options = {});

// One outcome per kind in canonical order; every table must be present.
std::vector<RewriteOutcome> generate_variant_set(std::string_view text,
                                                 const RuleTableSet& tables,
                                                 std::uint64_t seed,
                                                 RewriteOptions options = {});

// char -> toneless pinyin, used to sanity-check shipped homophone tables.
class PinyinTable {
 public:
  // TSV columns: character, toneless pinyin.
  static PinyinTable load_tsv(const std::filesystem::path& path);

  // Concatenated per-character pinyin with '-' separators; error when a
  // character is missing from the table.
  std::string pinyin_of(const std::u32string& span) const;

 private:
  std::map<char32_t, std::string> map_;
};

// Verifies that every homophone (key, replacement) pair shares identical
// toneless pinyin; raises on the first violation.
void check_homophone_pinyin(const RuleTable& homophone_table,
                            const PinyinTable& pinyin);

}  // namespace toxred::obf
