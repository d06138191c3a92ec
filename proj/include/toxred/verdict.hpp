// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "toxred/errors.hpp"

namespace toxred::gateway {

enum class Label { SAFE, TOXIC };

inline const char* to_string(Label label) {
  return label == Label::SAFE ? "safe" : "toxic";
}

inline Label label_from_string(const std::string& s) {
  if (s == "safe") return Label::SAFE;
  if (s == "toxic") return Label::TOXIC;
  raise(ErrorKind::kFormat, "unknown verdict label: " + s);
}

// A detector's binary decision. `label` is derived only from `raw` by the
// documented parser for the detector's backend.
struct Verdict {
  Label label = Label::SAFE;
  std::string detector_id;
  std::string raw;       // verbatim response payload
  bool cached = false;
  double latency_ms = 0.0;
};

// LLM-judge quality rating on the 1..5 scale, parsed from a strict JSON
// object with key "quality_score".
struct QualityScore {
  int score = 1;
  std::string raw;
};

}  // namespace toxred::gateway
