#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dialeval/goal_model.hpp"
#include "dialeval/graph.hpp"
#include "dialeval/judge.hpp"

namespace dialeval {

struct GenerationConfig {
    int total_dialogues = 0;
    /// Explicit per-class quotas override the criteria ratios.
    std::optional<int> medium_quota;
    std::optional<int> complex_quota;
    ComplexityCriteria criteria;
    uint64_t seed = 0;
    std::string output_dir;
    int qc_max_rounds = 3;
    double qc_failure_tolerance = 0.25;  ///< enforced by the CLI, recorded here
    /// Timestamps make reruns differ; scripted runs leave generated_at null.
    bool emit_timestamp = false;
    std::string id_prefix = "dlg";
};

struct DatasetManifest {
    int medium_count = 0;
    int complex_count = 0;
    std::vector<std::string> dialogue_ids;  ///< write order
    std::vector<std::string> files;         ///< relative to output_dir
    std::string generated_at;               ///< empty = not recorded
    std::string config_hash;                ///< hex FNV of the canonical config
    int qc_pass_count = 0;
    int qc_fail_count = 0;    ///< trajectories lost to QcExhausted
    int discarded_count = 0;  ///< classified into an already-full bucket
    int attempts = 0;
    std::vector<std::string> notes;  ///< non-fatal diagnostics (length misses etc.)
};

ojson manifest_to_json(const DatasetManifest& m);
ojson generation_config_to_json(const GenerationConfig& cfg);
std::string generation_config_hash(const GenerationConfig& cfg);

struct AnnotateOptions {
    int estimated_turns = 0;  ///< generation target, stamped into metadata when > 0
    /// Complexity label shown to the QC judge (the sampling target; the final
    /// class is stamped afterwards by classification).
    std::optional<ComplexityClass> qc_complexity;
    int qc_max_rounds = 3;
    ComplexityCriteria criteria;
    std::string dialogue_id;
};

/// One judge call instantiates slots, dependencies, and descriptions for the
/// sampled goal set; the output is quality-checked (PASS/FAIL judge loop) and
/// must echo exactly the sampled "domain.intent" set. The complexity class
/// and per-goal classification_method are stamped before returning.
/// Throws QcExhaustedError, SchemaError, or usage Error on an empty goal set.
Trajectory annotate_trajectory(const std::vector<std::string>& goals, JudgeGateway& judge,
                               const AnnotateOptions& opts = {});

/// Splits a raw transcript into turns. Every non-empty line must be
/// "USER: ..." or "SYSTEM: ..."; the first speaker must be USER and speakers
/// must alternate. Throws MalformedTranscriptError otherwise.
std::vector<Turn> parse_transcript(const std::string& raw);

/// Prompts for a full transcript and parses it, retrying the judge on
/// malformed output up to max_retries extra attempts. A turn count outside
/// the class range is recorded in diagnostics, not fatal.
std::vector<Turn> generate_dialogue_turns(const Trajectory& t, JudgeGateway& judge,
                                          const ComplexityCriteria& criteria = {},
                                          std::vector<std::string>* diagnostics = nullptr,
                                          int max_retries = 3);

/// Iterates turns in order; per turn the judge receives the current status
/// table and returns an updated one. Legal changes are applied, illegal ones
/// rejected with the prior status retained (diagnostic logged), missing ids
/// left unchanged. The result carries per-turn goal_status_changes plus
/// full all_goals snapshots and replays cleanly.
Dialogue annotate_status(const Trajectory& t, const std::vector<Turn>& turns,
                         JudgeGateway& judge, std::vector<std::string>* diagnostics = nullptr);

/// sample -> annotate -> generate -> annotate_status until per-class quotas
/// are met. One JSON file per dialogue plus manifest.json under output_dir,
/// each written atomically (temp + rename). Deterministic for a fixed
/// (graph, config, script). Throws UnsatisfiableError when quotas cannot be
/// met within 20 * total attempts; stage errors propagate with the dialogue
/// id prefixed.
DatasetManifest run_pipeline(const CooccurrenceGraph& g, const GenerationConfig& cfg,
                             JudgeGateway& judge);

}  // namespace dialeval
