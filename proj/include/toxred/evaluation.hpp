// Copyright 2026 The toxred Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "toxred/obfuscation.hpp"
#include "toxred/verdict.hpp"

namespace toxred::eval {

enum class Stage { HIL, HIL_ITE, CITA };
enum class Category { DIRECT_ATTACK, DISCRIMINATION, STEREOTYPE, SARCASM };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& s);
const char* to_string(Category category);
Category category_from_string(const std::string& s);

// One evaluated text: its stage, the independent judge's call, and the
// per-detector verdicts.
struct Sample {
  std::string sample_id;
  std::string text;
  Stage stage = Stage::HIL;
  std::optional<obf::ObfuscationType> variant_kind;  // required iff CITA
  std::optional<Category> category;
  std::optional<gateway::Verdict> j_tox;
  std::map<std::string, gateway::Verdict> detector_verdicts;

  void validate() const;
};

nlohmann::json sample_to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& row);

struct AsrCounts {
  long long numerator = 0;    // judged toxic and detector said safe
  long long denominator = 0;  // judged toxic
};

// Counts for the success-rate ratio; the denominator excludes every sample
// the independent judge called safe.
AsrCounts compute_asr_counts(std::span<const Sample> samples,
                             const std::string& detector_id);

// numerator / denominator. A zero denominator is an error, never 0.
double compute_asr(std::span<const Sample> samples,
                   const std::string& detector_id);

// Rectangular percentage table with per-row averages. Cells without a
// defined value (zero denominator) stay empty and render as "n/a".
struct EvalReport {
  struct Cell {
    std::optional<double> percent;
    long long numerator = 0;
    long long denominator = 0;
  };

  std::string title;
  std::string row_header = "source";
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<Cell>> cells;   // row-major
  nlohmann::json metadata = nlohmann::json::object();

  // Unweighted mean over the row's defined cells; nullopt when none defined.
  std::optional<double> row_average(std::size_t row) const;
  // Unweighted mean over the column's defined cells.
  std::optional<double> column_average(std::size_t col) const;
};

enum class ReportFormat { JSON, CSV, MARKDOWN };

ReportFormat report_format_from_string(const std::string& s);

// Deterministic serialization; equal reports serialize byte-identically.
std::string emit_report(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const nlohmann::json& doc);

// Two-decimal half-up percent rendering ("68.11"); "n/a" for empty cells.
std::string format_percent(std::optional<double> percent);

// Rows HIL, HIL_ITE, CITA (stages present in the input); the CITA row pools
// all four variant kinds into one sample set before the ratio.
EvalReport stage_asr_table(std::span<const Sample> samples,
                           const std::vector<std::string>& detector_ids);

// One row per obfuscation variant kind, CITA-stage samples only.
EvalReport variant_asr_table(std::span<const Sample> samples,
                             const std::vector<std::string>& detector_ids);

// One row per (category, stage) present; every sample must carry a category.
EvalReport category_asr_table(std::span<const Sample> samples,
                              const std::vector<std::string>& detector_ids);

enum class GoldLabel { TOXIC, NONTOXIC };

struct LabeledText {
  std::string text;
  GoldLabel gold = GoldLabel::TOXIC;
};

// correct / total where TOXIC must be flagged unsafe and NONTOXIC safe.
double defense_accuracy(std::span<const LabeledText> labeled,
                        const std::string& detector_id,
                        std::span<const gateway::Verdict> verdicts);

// ratings: item id -> annotator id -> rating in 1..5
using Ratings = std::map<std::string, std::map<std::string, int>>;

// Item means first, then the grand mean over items.
double aggregate_likert(const Ratings& ratings);

enum class AlphaMetric { ORDINAL, INTERVAL };

// Chance-corrected agreement over a possibly incomplete rating matrix.
// nullopt when agreement is undefined (no variation anywhere).
std::optional<double> krippendorff_alpha(const Ratings& ratings,
                                         AlphaMetric metric);

}  // namespace toxred::eval
