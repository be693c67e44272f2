#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dialeval/json_util.hpp"
#include "dialeval/metrics.hpp"

namespace dialeval {

struct OnlineCheckpoint {
    int progress_percent = 0;  ///< 10, 20, ..., 100
    std::optional<double> detection_f1;
    std::optional<double> status_acc;
};

struct MetricReport {
    std::string dialogue_id;
    std::string complexity;  ///< "medium" | "complex"

    Rational dgcr_value;  ///< den 0 = undefined
    Rational naive_rate;
    std::optional<double> ntc_mean;
    std::optional<double> memory_recall_acc;
    RecallBreakdown recall_breakdown;
    std::optional<double> proactivity;
    int proactive_candidates = 0;
    Prf detection;
    std::optional<double> status_tracking;
    std::vector<OnlineCheckpoint> online_curve;
    std::optional<double> turn_quality;
    std::optional<double> dialogue_quality;

    int turn_count = 0;
    double latency_total_ms = 0.0;
    long input_tokens = 0;
    long output_tokens = 0;
    int judge_calls = 0;

    std::vector<std::string> diagnostics;
};

ojson metric_report_to_json(const MetricReport& r);

/// One row per dialogue, one column per metric; undefined values print "NA".
std::string aggregate_csv(const std::vector<MetricReport>& reports);

/// One row per (dialogue, checkpoint).
std::string online_curve_csv(const std::vector<MetricReport>& reports);

/// Validity-table layout: metric, n and r/rho per complexity class.
std::string correlations_csv(const std::vector<CorrelationRow>& medium_rows,
                             const std::vector<CorrelationRow>& complex_rows);

std::string efficiency_csv(const std::vector<EfficiencyRow>& rows);

/// Published reference values for the comparison report. These depend on
/// hosted models and are NOT reproducible here; they exist only so a run's
/// numbers can be placed next to them.
struct ReferenceRow {
    std::string metric;
    std::optional<double> reference_medium;
    std::optional<double> reference_complex;
    std::string note;
};

const std::vector<ReferenceRow>& reference_rows();

/// Reference values beside this run's per-class means.
std::string comparison_csv(const std::vector<MetricReport>& reports);

}  // namespace dialeval
