#pragma once

// File formats: the benchmark JSONL, source triplets, focus/evaluation reports, scorer
// parameters, plans and training history.

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "fbcir/augment.hpp"
#include "fbcir/metrics.hpp"
#include "fbcir/scoring.hpp"
#include "fbcir/synthworld.hpp"
#include "fbcir/trainer.hpp"
#include "fbcir/types.hpp"

namespace fbcir {

inline constexpr std::string_view kBenchmarkFormat = "fbcir-bench";
inline constexpr int kBenchmarkVersion = 1;

/// inline: every token and candidate carries a feature vector.
/// asset: no feature vectors; candidates and the query image are asset references.
enum class PayloadMode { Inline, Asset };

std::string_view to_string(PayloadMode mode) noexcept;
PayloadMode payload_mode_from_string(std::string_view text);

/// Mode a sample satisfies. Throws Parse when features are present on some payloads but not all.
PayloadMode payload_mode_of(const AugmentedSample& sample);

nlohmann::json sample_to_json(const AugmentedSample& sample);
/// Throws Parse on schema errors or when the sample does not satisfy `mode`.
AugmentedSample sample_from_json(const nlohmann::json& json, PayloadMode mode);

struct BenchmarkFile {
    PayloadMode mode = PayloadMode::Inline;
    std::vector<AugmentedSample> samples;
};

std::string benchmark_header_line(PayloadMode mode);
/// Header plus one compact line per sample. Throws Parse when samples disagree on the mode.
void write_benchmark(std::ostream& out, std::span<const AugmentedSample> samples);
/// Throws Parse with the 1-based line number on any malformed line.
BenchmarkFile read_benchmark(std::istream& in);
BenchmarkFile read_benchmark_file(const std::filesystem::path& path);
void write_benchmark_file(const std::filesystem::path& path, std::span<const AugmentedSample> samples);

/// One triplet per line: {"id","query_image","query_text","positive","source","dataset"[,"segments"]}.
std::vector<SourceTriplet> read_triplets(std::istream& in);
nlohmann::json triplet_to_json(const SourceTriplet& triplet);

nlohmann::json focus_report_to_json(const std::string& sample_id, const FocusReport& report,
                                    const TokenizedQuery& query);
nlohmann::json evaluation_report_to_json(const EvaluationReport& report);

nlohmann::json params_to_json(const ToyScorerParams& params);
ToyScorerParams params_from_json(const nlohmann::json& json);

/// Unknown keys are rejected so that typos in config files surface as Parse errors.
AugmentPlan plan_from_json(const nlohmann::json& json);
WorldConfig world_config_from_json(const nlohmann::json& json);
TrainingConfig training_config_from_json(const nlohmann::json& json, TrainingConfig base);
nlohmann::json world_config_to_json(const WorldConfig& config);
nlohmann::json training_config_to_json(const TrainingConfig& config);

nlohmann::json history_record_to_json(const HistoryRecord& record);
nlohmann::json hard_set_evaluation_to_json(const HardSetEvaluation& evaluation);

/// Reads a whole JSON document. Throws Parse.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fbcir
