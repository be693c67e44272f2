#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialeval/embedding.hpp"
#include "dialeval/goal_model.hpp"
#include "dialeval/judge.hpp"
#include "dialeval/kernels.hpp"

namespace dialeval {

struct PipelineConfig {
    int k = 5;                ///< retrieval depth
    double tau = 0.8;         ///< existence-match confidence threshold
    double delta = 0.6;       ///< relatedness threshold for evolution
    int audit_period = 5;     ///< proactive audit every N exchange pairs
    int embedding_dim = 384;
    double mention_tau = 0.85;  ///< embedding threshold for the mention test
};

enum class RelationKind { link, dependency };

std::string_view to_string(RelationKind k);

struct RelationEdge {
    std::string from;
    std::string to;
    RelationKind kind = RelationKind::link;

    bool operator==(const RelationEdge&) const = default;
};

/// Store-resident goal. Never carries NOT_MENTIONED: a goal exists in memory
/// only once it has been mentioned.
struct MemoryGoal {
    std::string id;
    std::string content;
    std::string core_content;
    GoalStatus status = GoalStatus::open;
    std::vector<StatusEvent> status_history;
    std::map<std::string, std::string> slot_values;
    std::optional<std::string> parent_id;
    bool core_pattern_listed = true;
    int inserted_at_turn = 0;  ///< exchange-pair index
};

/// Symbolic database plus vector index kept in bijection, plus the directed
/// typed relation graph. Dependency edges stay acyclic (enforced at insert).
class DualStore {
public:
    explicit DualStore(int embedding_dim);

    /// Inserts into both sides; returns the generated id ("m1", "m2", ...).
    std::string insert(MemoryGoal goal, std::vector<double> embedding);

    bool contains(const std::string& id) const;
    MemoryGoal& get(const std::string& id);              // UnknownIdError
    const MemoryGoal& get(const std::string& id) const;  // UnknownIdError
    const std::vector<double>& embedding_of(const std::string& id) const;
    void refresh_embedding(const std::string& id, std::vector<double> embedding);

    size_t size() const { return order_.size(); }
    const std::vector<std::string>& insertion_order() const { return order_; }
    const std::vector<RelationEdge>& relations() const { return relations_; }

    /// Top-k cosine retrieval over all stored vectors; ties resolve to the
    /// earlier-inserted goal. Returns (id, score) pairs.
    std::vector<std::pair<std::string, double>> retrieve_top_k(
        const std::vector<double>& query, int k) const;

    /// Cosine similarity of the stored vector for `id` against `query`.
    double similarity(const std::string& id, const std::vector<double>& query) const;

    /// Adds a typed edge. A dependency edge that would close a directed cycle
    /// is downgraded to a link; the diagnostic (when non-null) receives an
    /// explanation and the call returns false.
    bool add_relation(const std::string& from, const std::string& to, RelationKind kind,
                      std::string* diagnostic);

    /// Dependency ids of a goal (outgoing dependency edges).
    std::vector<std::string> dependencies_of(const std::string& id) const;

    // Audits used by tests after every mutation.
    bool bijection_holds() const;
    bool dependencies_acyclic() const;

    ojson to_json() const;

private:
    bool dependency_path_exists(const std::string& from, const std::string& to) const;

    int embedding_dim_;
    int next_id_ = 1;
    std::vector<std::string> order_;
    std::map<std::string, MemoryGoal> goals_;
    std::map<std::string, std::vector<double>> vectors_;
    std::vector<double> matrix_;  ///< row-major, row i = embedding of order_[i]
    std::vector<RelationEdge> relations_;
};

/// Candidate produced by the extraction stage. slot_values and dependency
/// references (core_content form) are optional extras the extractor may emit.
struct CandidateGoal {
    std::string goal_content;
    std::string core_content;
    GoalStatus status = GoalStatus::open;
    bool pattern_listed = true;
    std::map<std::string, std::string> slot_values;
    std::vector<std::string> dependency_refs;
};

enum class TransitionOrigin { extraction, update, audit };

std::string_view to_string(TransitionOrigin o);

struct TransitionRecord {
    std::string goal_id;
    GoalStatus from = GoalStatus::open;
    GoalStatus to = GoalStatus::open;
    int turn_index = 0;  ///< exchange-pair index
    TransitionOrigin origin = TransitionOrigin::extraction;
    bool user_mentioned_goal = false;  ///< same-pair user request named the goal
};

/// Full store state after one exchange pair, for online evaluation.
struct StoreSnapshot {
    int pair_index = 0;
    int last_utterance_turn_id = 0;
    std::vector<std::string> goal_ids;  ///< insertion order
    std::map<std::string, GoalStatus> statuses;
    std::map<std::string, std::string> core_contents;
    std::map<std::string, std::map<std::string, std::string>> slot_values;
    std::vector<RelationEdge> relations;
};

struct ExistenceOutcome {
    bool match = false;
    std::string matched_id;
    int judge_calls = 0;
};

struct ProcessResult {
    std::string dialogue_id;
    DualStore store;
    std::vector<StoreSnapshot> snapshots;  ///< one per exchange pair
    std::vector<TransitionRecord> transitions;
    std::vector<std::string> diagnostics;
    int match_count = 0;           ///< existence checks that resolved Match=1
    int insert_count = 0;
    int relation_judge_calls = 0;  ///< EVOLVE_RELATIONS dispatches
    int audit_runs = 0;
};

/// User/system exchange pair, the processing unit of the turn pipeline.
struct ExchangePair {
    int pair_index = 0;  ///< 1-based
    std::string user_utterance;
    std::string system_response;
    int last_utterance_turn_id = 0;
};

/// Groups Listing-2-style turns into exchange pairs (a trailing user turn
/// forms a pair with an empty system response).
std::vector<ExchangePair> group_into_pairs(const std::vector<Turn>& turns);

/// Four-stage turn pipeline: extract -> existence check -> update or
/// insert+evolve -> scheduled proactive audit.
class MemoryPipeline {
public:
    MemoryPipeline(JudgeGateway* judge, const EmbeddingProvider* embedder, PipelineConfig config);

    std::vector<CandidateGoal> extract_goals(const ExchangePair& pair);
    ExistenceOutcome existence_check(const CandidateGoal& candidate,
                                     const std::vector<double>& embedding,
                                     const DualStore& store);
    void update_goal(const std::string& matched_id, const CandidateGoal& candidate,
                     DualStore& store, const ExchangePair& pair, ProcessResult& result);
    std::string insert_and_evolve(const CandidateGoal& candidate, std::vector<double> embedding,
                                  DualStore& store, const ExchangePair& pair,
                                  ProcessResult& result);
    std::vector<TransitionRecord> proactive_audit(DualStore& store, const ExchangePair& context,
                                                  ProcessResult& result);

    ProcessResult process_dialogue(const std::string& dialogue_id,
                                   const std::vector<Turn>& turns);

    const PipelineConfig& config() const { return config_; }

private:
    bool user_mentions(const ExchangePair& pair, const std::string& content,
                       const std::string& core_content) const;

    JudgeGateway* judge_;
    const EmbeddingProvider* embedder_;
    PipelineConfig config_;
};

/// Known standardized core_content patterns from the extraction contract.
bool is_listed_core_pattern(const std::string& core_content);

ojson snapshot_to_json(const StoreSnapshot& s);

}  // namespace dialeval
