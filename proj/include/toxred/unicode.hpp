// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace toxred::uni {

// Decodes UTF-8 into Unicode scalar values. Rejects overlong forms,
// surrogates, and truncated sequences.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view codepoints);

bool is_valid_utf8(std::string_view text);

// Canonical composition (NFC).
std::string nfc(std::string_view text);

bool is_space(char32_t cp);

// Trims leading/trailing whitespace and collapses interior runs to a single
// ASCII space. Positions are Unicode scalar values, never bytes.
std::string collapse_whitespace(std::string_view text);

// NFC + whitespace collapse; the canonical key for duplicate detection and
// content-addressed caching.
std::string normalize_text(std::string_view text);

// Lowercase SHA-256 hex digest of the raw bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace toxred::uni
