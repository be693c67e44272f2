#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dialeval/goal_model.hpp"

namespace dialeval {

class JudgeGateway;

/// One seed dialogue's ordered goal list, each entry a "domain.intent" key.
using GoalSequence = std::vector<std::string>;

struct CooccurrenceGraph {
    std::vector<std::string> nodes;  ///< "domain.intent", first-appearance order
    /// Per node: (neighbor index, weight), neighbor indices ascending.
    std::vector<std::vector<std::pair<int, int>>> adj;
    int edge_count = 0;

    int index_of(const std::string& goal) const;  // -1 when absent
    int degree(int node) const;
    long long weight_sum(int node) const;
    int weight(int a, int b) const;  // 0 when no edge
};

struct GraphStats {
    int node_count = 0;
    int edge_count = 0;
    long long density_num = 0;  ///< 2E, exact
    long long density_den = 0;  ///< V(V-1), exact; 0 when undefined
    double density = 0.0;
    double avg_degree = 0.0;
    int max_degree = 0;
    int min_degree = 0;
    int connected_component_count = 0;
    bool density_defined = true;
};

/// Node per unique goal; edge weight = number of sequences containing both
/// endpoints (one count per sequence, self-pairs excluded).
/// Throws EmptyCorpusError when sequences is empty.
CooccurrenceGraph build_graph(const std::vector<GoalSequence>& sequences);

GraphStats compute_stats(const CooccurrenceGraph& g);
ojson stats_to_json(const GraphStats& s);

ojson graph_to_json(const CooccurrenceGraph& g);
CooccurrenceGraph graph_from_json(const ojson& j);

/// Reads a JSONL seed corpus: one JSON array of "domain.intent" strings per
/// line; blank lines skipped. Throws MissingFileError / MalformedLineError
/// (with 1-based line number) / EmptyCorpusError.
std::vector<GoalSequence> load_seed_corpus(const std::string& path);

struct SampleResult {
    std::vector<std::string> goals;  ///< visit order; distinct; connected in g
    std::string start_node;
    int stratum = 0;  ///< degree tercile of the start node: 0 low, 1 mid, 2 high
    int steps_used = 0;
};

/// Stratified weighted random walk: the start node comes from a uniformly
/// chosen degree tercile (uniform node within it); each step moves to a
/// neighbor with probability proportional to edge weight; revisits are
/// skipped. Deterministic for a fixed (graph, target_size, rng_seed).
/// Throws UnsatisfiableError when target_size nodes are not collected within
/// a budget of 50 * target_size steps.
SampleResult sample_trajectory(const CooccurrenceGraph& g, int target_size, uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Complexity classification
// ---------------------------------------------------------------------------

/// Quantitative criteria per class plus the target mix. The sampling draw
/// ranges are narrower than the class criteria so that rule classification
/// of freshly sampled trajectories is unambiguous; both are config-exposed.
struct ComplexityCriteria {
    double medium_ratio = 0.65;
    double complex_ratio = 0.35;

    // Classification thresholds.
    int medium_goals_min = 2, medium_goals_max = 8;
    int medium_turns_min = 8, medium_turns_max = 35;
    int medium_max_dependencies = 2;
    int complex_goals_min = 7;   // "7+"
    int complex_turns_min = 30;  // "30+"
    int complex_min_dependencies = 2;

    // Sampling draw ranges (targets handed to the synthesis pipeline).
    int draw_medium_goals_min = 2, draw_medium_goals_max = 6;
    int draw_medium_turns_min = 8, draw_medium_turns_max = 29;
    int draw_complex_goals_min = 7, draw_complex_goals_max = 10;
    int draw_complex_turns_min = 30, draw_complex_turns_max = 45;
};

enum class ClassificationMethod { pre_defined, model_based };

std::string_view to_string(ClassificationMethod m);

struct ComplexityDecision {
    ComplexityClass complexity = ComplexityClass::medium;
    ClassificationMethod method = ClassificationMethod::pre_defined;
};

/// Rule layer first; when both or neither class rule fires, the judge breaks
/// the tie (method = model_based). With judge == nullptr the fallback prefers
/// complex when the trajectory has >= 2 dependency edges.
ComplexityDecision classify_complexity(const Trajectory& t, JudgeGateway* judge,
                                       const ComplexityCriteria& criteria = {});

/// Total dependency edges across the trajectory's goals.
int dependency_count(const Trajectory& t);

}  // namespace dialeval
