#pragma once

#include <string>
#include <vector>

#include "dialeval/config.hpp"
#include "dialeval/report.hpp"

namespace dialeval {

struct DialogueFailure {
    std::string dialogue_id;  ///< file stem when the dialogue never parsed
    ErrorCategory category = ErrorCategory::data;
    std::string message;
};

struct EvaluationSummary {
    int total = 0;
    int succeeded = 0;
    std::vector<DialogueFailure> failures;
    std::vector<MetricReport> reports;  ///< succeeded dialogues, dataset order
    std::vector<EfficiencyRow> efficiency;
    std::vector<CorrelationRow> medium_correlations;
    std::vector<CorrelationRow> complex_correlations;
};

/// Dataset discovery: a directory yields its *.json files (manifest.json
/// excluded) sorted by name; a single file yields itself.
std::vector<std::string> discover_dataset_files(const std::string& path);

/// Metrics for one processed dialogue. The pipeline result provides the
/// predicted side (store state, snapshots, transitions); the gold dialogue
/// provides annotations for alignment, recall probes, and the online curve.
MetricReport evaluate_dialogue(const Dialogue& gold, const ProcessResult& result,
                               JudgeGateway& judge, const EmbeddingProvider& embedder,
                               const RunConfig& cfg);

/// Full evaluation run: processes every dataset dialogue through the memory
/// pipeline (workers in parallel, outputs in dataset order), computes
/// metrics, and writes reports/, stores/, the aggregate/online/correlation/
/// efficiency/comparison CSVs, ledger.json, config_snapshot.json, and
/// summary.json under cfg.output_dir. Per-dialogue failures are isolated;
/// the summary tallies them.
EvaluationSummary run_evaluation(const std::string& dataset_path, const RunConfig& cfg);

}  // namespace dialeval
