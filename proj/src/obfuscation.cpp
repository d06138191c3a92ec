// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#include "toxred/obfuscation.hpp"

#include <algorithm>
#include <fstream>

#include "toxred/errors.hpp"
#include "toxred/rng.hpp"
#include "toxred/unicode.hpp"

namespace toxred::obf {

const char* to_string(ObfuscationType kind) {
  switch (kind) {
    case ObfuscationType::HOMOPHONE: return "homophone";
    case ObfuscationType::TRANSPOSITION: return "transposition";
    case ObfuscationType::TRADITIONAL_MIX: return "traditional_mix";
    case ObfuscationType::EMOJI: return "emoji";
  }
  return "unknown";
}

ObfuscationType obfuscation_type_from_string(const std::string& s) {
  for (ObfuscationType kind : kAllTypes) {
    if (s == to_string(kind)) return kind;
  }
  raise(ErrorKind::kFormat, "unknown obfuscation type: " + s);
}

void RuleTable::validate() const {
  if (kind == ObfuscationType::TRANSPOSITION) {
    if (!mappings.empty()) {
      raise(ErrorKind::kFormat,
            "transposition table carries markers, not replacements");
    }
    for (const std::u32string& marker : markers) {
      if (marker.empty()) {
        raise(ErrorKind::kFormat, "transposition marker is empty");
      }
    }
    return;
  }
  if (!markers.empty()) {
    raise(ErrorKind::kFormat, "markers are only valid for transposition");
  }
  for (const auto& [key, replacements] : mappings) {
    if (key.empty()) raise(ErrorKind::kFormat, "rule key is empty");
    if (replacements.empty()) {
      raise(ErrorKind::kFormat, "rule has no replacements");
    }
    for (const std::u32string& replacement : replacements) {
      if (replacement.empty()) {
        raise(ErrorKind::kFormat, "rule replacement is empty");
      }
      if (replacement == key) {
        raise(ErrorKind::kFormat,
              "rule maps a span to itself: " + uni::encode_utf8(key));
      }
    }
    if (kind == ObfuscationType::TRADITIONAL_MIX) {
      if (key.size() != 1) {
        raise(ErrorKind::kFormat,
              "traditional_mix keys are single characters");
      }
      for (const std::u32string& replacement : replacements) {
        if (replacement.size() != 1) {
          raise(ErrorKind::kFormat,
                "traditional_mix replacements are single characters");
        }
      }
    }
  }
}

RuleTableSet RuleTableSet::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorKind::kIo, "cannot open rule table " + path.string());
  }
  std::map<ObfuscationType, RuleTable> tables;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    const std::size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos) {
      raise(ErrorKind::kFormat, where() + ": expected kind<TAB>key[<TAB>replacement]");
    }
    const std::size_t tab2 = line.find('\t', tab1 + 1);
    const std::string kind_str = line.substr(0, tab1);
    const std::string key_str =
        tab2 == std::string::npos ? line.substr(tab1 + 1)
                                  : line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string repl_str =
        tab2 == std::string::npos ? std::string() : line.substr(tab2 + 1);

    const ObfuscationType kind = obfuscation_type_from_string(kind_str);
    RuleTable& table = tables.try_emplace(kind, RuleTable{.kind = kind}).first->second;
    const std::u32string key = uni::decode_utf8(uni::nfc(key_str));
    if (key.empty()) raise(ErrorKind::kFormat, where() + ": empty key");
    if (kind == ObfuscationType::TRANSPOSITION) {
      if (!repl_str.empty()) {
        raise(ErrorKind::kFormat,
              where() + ": transposition rows take no replacement");
      }
      table.markers.push_back(key);
      continue;
    }
    if (repl_str.empty()) {
      raise(ErrorKind::kFormat, where() + ": missing replacement");
    }
    table.mappings[key].push_back(uni::decode_utf8(uni::nfc(repl_str)));
  }
  RuleTableSet set;
  for (auto& [kind, table] : tables) {
    table.validate();
    set.tables_.emplace(kind, std::move(table));
  }
  return set;
}

const RuleTable& RuleTableSet::table(ObfuscationType kind) const {
  auto it = tables_.find(kind);
  if (it == tables_.end()) {
    raise(ErrorKind::kConfig,
          std::string("no rule table of kind ") + to_string(kind));
  }
  return it->second;
}

bool RuleTableSet::has(ObfuscationType kind) const {
  return tables_.contains(kind);
}

void RuleTableSet::add(RuleTable table) {
  table.validate();
  tables_[table.kind] = std::move(table);
}

namespace {

struct Match {
  std::size_t position = 0;
  std::u32string span;
};

// Longest-key match at each position, left to right, non-overlapping.
std::vector<Match> find_matches(const std::u32string& text,
                                const std::vector<std::u32string>& keys) {
  std::vector<std::u32string> ordered = keys;
  std::sort(ordered.begin(), ordered.end(),
            [](const std::u32string& a, const std::u32string& b) {
              return a.size() != b.size() ? a.size() > b.size() : a < b;
            });
  std::vector<Match> matches;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const std::u32string& key : ordered) {
      if (key.size() <= text.size() - i &&
          text.compare(i, key.size(), key) == 0) {
        matches.push_back({i, key});
        i += key.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return matches;
}

std::vector<std::u32string> mapping_keys(const RuleTable& table) {
  std::vector<std::u32string> keys;
  keys.reserve(table.mappings.size());
  for (const auto& [key, _] : table.mappings) keys.push_back(key);
  return keys;
}

// Seeded choice of min(matches, max_edits) match indices. The draw order is
// fixed: one partial Fisher-Yates pass keyed by (seed, kind), then one
// alternative draw per selected match in ascending position order.
RewriteOutcome apply_edits(std::string_view text, const RuleTable& table,
                           std::uint64_t seed, const RewriteOptions& options,
                           const std::vector<Match>& matches,
                           bool transposition) {
  if (options.max_edits < 1) {
    raise(ErrorKind::kInvalidArgument, "max_edits must be >= 1");
  }
  RewriteOutcome outcome;
  outcome.original = std::string(text);
  outcome.kind = table.kind;
  const std::u32string original = uni::decode_utf8(text);

  auto rng = rng::KeyedRng::keyed(seed, static_cast<std::uint64_t>(table.kind));
  const std::size_t k =
      std::min(matches.size(), static_cast<std::size_t>(options.max_edits));
  const std::vector<std::size_t> chosen = rng.sample_indices(matches.size(), k);

  for (std::size_t index : chosen) {
    const Match& match = matches[index];
    Edit edit;
    edit.position = match.position;
    edit.before = match.span;
    if (transposition) {
      // Swap one adjacent pair inside the span.
      if (match.span.size() < 2) continue;
      const std::size_t pair =
          static_cast<std::size_t>(rng.below(match.span.size() - 1));
      std::u32string swapped = match.span;
      std::swap(swapped[pair], swapped[pair + 1]);
      if (swapped == match.span) continue;  // e.g. doubled characters
      edit.after = std::move(swapped);
    } else {
      const auto& alternatives = table.mappings.at(match.span);
      edit.after = alternatives[rng.below(alternatives.size())];
    }
    outcome.edits.push_back(std::move(edit));
  }

  std::u32string variant = original;
  for (auto it = outcome.edits.rbegin(); it != outcome.edits.rend(); ++it) {
    variant.replace(it->position, it->before.size(), it->after);
  }
  outcome.variant = uni::encode_utf8(variant);
  outcome.changed = !outcome.edits.empty();
  return outcome;
}

}  // namespace

std::string replay_edits(std::string_view original, std::span<const Edit> edits) {
  std::u32string text = uni::decode_utf8(original);
  for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
    if (it->position + it->before.size() > text.size() ||
        text.compare(it->position, it->before.size(), it->before) != 0) {
      raise(ErrorKind::kInvalidArgument,
            "edit does not match original at position " +
                std::to_string(it->position));
    }
    text.replace(it->position, it->before.size(), it->after);
  }
  return uni::encode_utf8(text);
}

RewriteOutcome apply_homophone(std::string_view text, const RuleTable& table,
                               std::uint64_t seed, RewriteOptions options) {
  const std::u32string cps = uni::decode_utf8(text);
  return apply_edits(text, table, seed, options,
                     find_matches(cps, mapping_keys(table)), false);
}

RewriteOutcome apply_transposition(std::string_view text, const RuleTable& table,
                                   std::uint64_t seed, RewriteOptions options) {
  const std::u32string cps = uni::decode_utf8(text);
  return apply_edits(text, table, seed, options,
                     find_matches(cps, table.markers), true);
}

RewriteOutcome apply_traditional_mix(std::string_view text, const RuleTable& table,
                                     std::uint64_t seed, RewriteOptions options) {
  const std::u32string cps = uni::decode_utf8(text);
  return apply_edits(text, table, seed, options,
                     find_matches(cps, mapping_keys(table)), false);
}

RewriteOutcome apply_emoji(std::string_view text, const RuleTable& table,
                           std::uint64_t seed, RewriteOptions options) {
  const std::u32string cps = uni::decode_utf8(text);
  return apply_edits(text, table, seed, options,
                     find_matches(cps, mapping_keys(table)), false);
}

RewriteOutcome rewrite(std::string_view text, ObfuscationType kind,
                       const RuleTableSet& tables, std::uint64_t seed,
                       RewriteOptions options) {
  if (text.empty()) {
    raise(ErrorKind::kInvalidArgument, "rewrite: text is empty");
  }
  const RuleTable& table = tables.table(kind);
  switch (kind) {
    case ObfuscationType::HOMOPHONE:
      return apply_homophone(text, table, seed, options);
    case ObfuscationType::TRANSPOSITION:
      return apply_transposition(text, table, seed, options);
    case ObfuscationType::TRADITIONAL_MIX:
      return apply_traditional_mix(text, table, seed, options);
    case ObfuscationType::EMOJI:
      return apply_emoji(text, table, seed, options);
  }
  raise(ErrorKind::kInvalidArgument, "rewrite: bad kind");
}

std::vector<RewriteOutcome> generate_variant_set(std::string_view text,
                                                 const RuleTableSet& tables,
                                                 std::uint64_t seed,
                                                 RewriteOptions options) {
  for (ObfuscationType kind : kAllTypes) {
    if (!tables.has(kind)) {
      raise(ErrorKind::kConfig,
            std::string("generate_variant_set: missing table ") + to_string(kind));
    }
  }
  std::vector<RewriteOutcome> outcomes;
  outcomes.reserve(4);
  for (ObfuscationType kind : kAllTypes) {
    outcomes.push_back(rewrite(text, kind, tables, seed, options));
  }
  return outcomes;
}

PinyinTable PinyinTable::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorKind::kIo, "cannot open pinyin table " + path.string());
  }
  PinyinTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      raise(ErrorKind::kFormat,
            path.string() + ":" + std::to_string(line_no) +
                ": expected char<TAB>pinyin");
    }
    const std::u32string ch = uni::decode_utf8(uni::nfc(line.substr(0, tab)));
    const std::string pinyin = line.substr(tab + 1);
    if (ch.size() != 1 || pinyin.empty()) {
      raise(ErrorKind::kFormat,
            path.string() + ":" + std::to_string(line_no) + ": bad row");
    }
    table.map_[ch[0]] = pinyin;
  }
  return table;
}

std::string PinyinTable::pinyin_of(const std::u32string& span) const {
  std::string out;
  for (char32_t cp : span) {
    auto it = map_.find(cp);
    if (it == map_.end()) {
      raise(ErrorKind::kFormat,
            "no pinyin entry for " + uni::encode_utf8(std::u32string(1, cp)));
    }
    if (!out.empty()) out.push_back('-');
    out += it->second;
  }
  return out;
}

void check_homophone_pinyin(const RuleTable& homophone_table,
                            const PinyinTable& pinyin) {
  if (homophone_table.kind != ObfuscationType::HOMOPHONE) {
    raise(ErrorKind::kInvalidArgument, "not a homophone table");
  }
  for (const auto& [key, replacements] : homophone_table.mappings) {
    const std::string key_pinyin = pinyin.pinyin_of(key);
    for (const std::u32string& replacement : replacements) {
      const std::string repl_pinyin = pinyin.pinyin_of(replacement);
      if (repl_pinyin != key_pinyin) {
        raise(ErrorKind::kFormat,
              "homophone pair differs in pinyin: " + uni::encode_utf8(key) +
                  " (" + key_pinyin + ") vs " + uni::encode_utf8(replacement) +
                  " (" + repl_pinyin + ")");
      }
    }
  }
}

}  // namespace toxred::obf
