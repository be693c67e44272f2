#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialeval/embedding.hpp"
#include "dialeval/goal_model.hpp"
#include "dialeval/judge.hpp"
#include "dialeval/memory.hpp"

namespace dialeval {

/// Exact fraction; den == 0 means the metric is undefined (reported
/// distinctly, never coerced to 0).
struct Rational {
    long long num = 0;
    long long den = 0;

    bool defined() const { return den != 0; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

enum class EligibilityMode {
    strict,   ///< every dependency COMPLETED
    lenient,  ///< every dependency terminal
};

/// Dependency-aware goal completion rate. U = goals whose prerequisites are
/// satisfied; U_dec = U with status in {COMPLETED, FAILED};
/// dGCR = |U ∩ COMPLETED| / |U_dec|. Throws CyclicDependenciesError.
Rational dgcr(const std::map<std::string, GoalStatus>& final_statuses,
              const std::map<std::string, std::vector<std::string>>& dependencies,
              EligibilityMode mode = EligibilityMode::strict);

/// Naive completion rate over decided goals, ignoring dependencies; used to
/// demonstrate the dependency-aware exclusion.
Rational naive_completion_rate(const std::map<std::string, GoalStatus>& final_statuses);

/// Mean (completion turn - initiation turn) over COMPLETED goals, where
/// initiation is the first event entering OPEN or PENDING (the completion
/// event itself when a goal enters the store already completed).
/// nullopt when no goal completed.
std::optional<double> ntc(const std::map<std::string, std::vector<StatusEvent>>& histories);

struct GoalAlignment {
    std::vector<std::pair<int, int>> pairs;  ///< (predicted index, gold index)
    std::vector<int> unmatched_predicted;
    std::vector<int> unmatched_gold;
};

/// Greedy one-to-one matching: exact normalized core_content equality first,
/// then embedding cosine >= tau_align in descending-similarity order.
GoalAlignment align_goals(const std::vector<std::string>& predicted_core,
                          const std::vector<std::string>& gold_core,
                          const EmbeddingProvider* embedder, double tau_align = 0.85);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero-denominator conventions: empty predicted and empty gold give all 1.0;
/// otherwise an empty side gives 0.0 for its ratio.
Prf detection_prf(const GoalAlignment& alignment, size_t predicted_count, size_t gold_count);

/// Fraction of matched pairs whose statuses agree; nullopt when no pairs.
std::optional<double> status_tracking_acc(
    const GoalAlignment& alignment, const std::vector<GoalStatus>& predicted_statuses,
    const std::vector<GoalStatus>& gold_statuses);

/// Probes auto-generated from gold annotations: one status probe per
/// (goal, status-change turn) answered from the snapshot covering that turn,
/// plus one slot probe per annotated slot value answered from the final
/// store. nullopt when the gold dialogue yields zero probes.
struct RecallBreakdown {
    int status_probes = 0;
    int status_correct = 0;
    int slot_probes = 0;
    int slot_correct = 0;

    int total() const { return status_probes + slot_probes; }
    int correct() const { return status_correct + slot_correct; }
};
std::optional<double> memory_recall_accuracy(const std::vector<StoreSnapshot>& snapshots,
                                             const Dialogue& gold,
                                             const EmbeddingProvider* embedder,
                                             double tau_align, RecallBreakdown* breakdown);

/// Candidate proactive events: audit-applied transitions plus transitions
/// whose same-pair user utterance never mentioned the goal. Each is judged
/// binary-appropriate via SCORE_QUALITY. nullopt when zero candidates.
std::optional<double> proactivity_effectiveness(const std::vector<TransitionRecord>& transitions,
                                                const DualStore& store, JudgeGateway* judge,
                                                int* candidate_count);

struct QualityScores {
    std::optional<double> turn_quality;      ///< [0,1], binary per-pair average
    std::optional<double> dialogue_quality;  ///< 1-5 scale
};
QualityScores quality_scores(const Dialogue& d, JudgeGateway* judge);

/// Sample Pearson correlation; nullopt when n < 2 or either variance is 0.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman rho = Pearson on average ranks (ties averaged).
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> average_ranks(const std::vector<double>& values);

struct CorrelationRow {
    std::string metric;
    int n = 0;  ///< pairs remaining after dropping undefined entries
    std::optional<double> pearson_r;
    std::optional<double> spearman_rho;
};

/// Correlates every metric series against the target series, pairwise
/// dropping undefined entries; rows with fewer than 3 pairs stay undefined.
std::vector<CorrelationRow> correlations(
    const std::vector<std::pair<std::string, std::vector<std::optional<double>>>>& series,
    const std::vector<std::optional<double>>& target);

struct EfficiencyRow {
    std::string complexity;  ///< "medium" | "complex" | "all"
    int turn_count = 0;
    double latency_mean = 0.0;
    double latency_min = 0.0;
    double latency_max = 0.0;
    double input_tokens_mean = 0.0;
    double output_tokens_mean = 0.0;
};

/// Per-turn latency = sum of call latencies for that (dialogue, turn); means
/// split by complexity class. Dialogues missing from `classes` fall under
/// "all" only. Empty ledger yields an empty vector.
std::vector<EfficiencyRow> efficiency_report(const CallLedger& ledger,
                                             const std::map<std::string, std::string>& classes);

}  // namespace dialeval
