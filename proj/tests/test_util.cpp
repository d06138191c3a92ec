// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "toxred/errors.hpp"
#include "toxred/prompts.hpp"
#include "toxred/rng.hpp"
#include "toxred/unicode.hpp"

using namespace toxred;

TEST_CASE("utf8 round trip") {
  const std::string text = "中文 emoji 🐷 mixed ASCII";
  CHECK(uni::encode_utf8(uni::decode_utf8(text)) == text);
  CHECK(uni::decode_utf8("中国").size() == 2);
  CHECK(uni::decode_utf8("🐷").size() == 1);
}

TEST_CASE("utf8 rejects malformed input") {
  CHECK_THROWS_AS(uni::decode_utf8("\xC0\xAF"), Error);         // overlong
  CHECK_THROWS_AS(uni::decode_utf8("\xED\xA0\x80"), Error);     // surrogate
  CHECK_THROWS_AS(uni::decode_utf8("\xE4\xB8"), Error);         // truncated
  CHECK_THROWS_AS(uni::decode_utf8("\xFF"), Error);             // bad lead byte
  CHECK(uni::is_valid_utf8("ok"));
  CHECK_FALSE(uni::is_valid_utf8("\xFF"));
}

TEST_CASE("nfc composes canonically") {
  // e + combining acute composes to the precomposed form.
  CHECK(uni::nfc("e\xCC\x81") == "\xC3\xA9");
  // CJK and emoji are already NFC.
  CHECK(uni::nfc("中国🐷") == "中国🐷");
  CHECK_THROWS_AS(uni::nfc("\xFF"), Error);
}

TEST_CASE("whitespace collapse") {
  CHECK(uni::collapse_whitespace("  a \t b  ") == "a b");
  CHECK(uni::collapse_whitespace("你　　好") == "你 好");
  CHECK(uni::collapse_whitespace(" \t\n ") == "");
  CHECK(uni::normalize_text("  e\xCC\x81  x ") == "\xC3\xA9 x");
}

TEST_CASE("sha256 known vector") {
  CHECK(uni::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(uni::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("keyed rng is deterministic and order-independent of scheduling") {
  auto a = rng::KeyedRng::keyed(7, 1, 2, 3);
  auto b = rng::KeyedRng::keyed(7, 1, 2, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  auto c = rng::KeyedRng::keyed(7, 1, 2, 4);
  CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("rng below stays in range and covers values") {
  auto r = rng::KeyedRng::keyed(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 300; ++i) {
    const std::uint64_t v = r.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(r.below(0), Error);
}

TEST_CASE("sample_indices picks k distinct ascending indices") {
  auto r = rng::KeyedRng::keyed(3);
  const auto chosen = r.sample_indices(10, 4);
  REQUIRE(chosen.size() == 4);
  for (std::size_t i = 1; i < chosen.size(); ++i) {
    CHECK(chosen[i - 1] < chosen[i]);
  }
  CHECK(chosen.back() < 10);
  CHECK_THROWS_AS(r.sample_indices(3, 4), Error);
}

TEST_CASE("rng doubles live in [0,1)") {
  auto r = rng::KeyedRng::keyed(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = r.next_double();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("prompt placeholder substitution leaves literal braces alone") {
  const std::string p = prompts::blue_defense("他真笨");
  CHECK(p.find("Text: 他真笨") != std::string::npos);
  CHECK(p.find("{text}") == std::string::npos);

  const std::string q = prompts::quality_rubric("C", "R");
  CHECK(q.find("Context: C") != std::string::npos);
  CHECK(q.find("Response: R") != std::string::npos);
  // The embedded JSON example must survive substitution.
  CHECK(q.find("{\"quality_score\": 3}") != std::string::npos);
}
