#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialeval/errors.hpp"
#include "dialeval/json_util.hpp"

namespace dialeval {

// ---------------------------------------------------------------------------
// Goal lifecycle
// ---------------------------------------------------------------------------

enum class GoalStatus {
    not_mentioned,
    open,
    pending,
    completed,
    failed,
    abandoned,
};

inline constexpr int kGoalStatusCount = 6;

/// COMPLETED, FAILED and ABANDONED are absorbing.
bool is_terminal(GoalStatus s);

/// Serialized (lowercase) form, as it appears in dataset files.
std::string_view to_string(GoalStatus s);

/// Case-insensitive parse; throws SchemaError on unknown text.
GoalStatus parse_goal_status(std::string_view text);

enum class TransitionKind {
    legal,      ///< a real state change permitted by the matrix
    no_change,  ///< from == to; not a transition, reported distinctly
    illegal,
};

TransitionKind classify_transition(GoalStatus from, GoalStatus to);

/// True iff (from, to) is a permitted state *change*. Identity pairs are
/// no-ops, not transitions, so this returns false for them; use
/// classify_transition when the distinction matters.
bool is_legal_transition(GoalStatus from, GoalStatus to);

struct StatusEvent {
    int turn_index = 0;  // 1-based
    GoalStatus new_status = GoalStatus::not_mentioned;

    bool operator==(const StatusEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Goal {
    std::string id;
    std::string domain;
    std::string intent;
    std::vector<std::string> slots;
    std::map<std::string, std::string> slot_values;
    std::vector<std::string> dependencies;
    std::optional<std::string> parent_id;
    std::string content;
    std::string core_content;  ///< standardized short form, e.g. "book hotel"
    GoalStatus status = GoalStatus::not_mentioned;
    std::vector<StatusEvent> status_history;

    // Per-goal annotation labels (trajectory schema).
    std::string classification_method;  // "pre_defined" | "model_based" | ""
    bool dependency_label = false;
    bool defectiveness_label = false;

    ojson extra = ojson::object();  ///< unknown fields, preserved on round-trip
};

enum class ComplexityClass { medium, complex_ };

std::string_view to_string(ComplexityClass c);
ComplexityClass parse_complexity_class(std::string_view text);

struct DialogueMetadata {
    int num_goals = 0;
    std::optional<int> estimated_turns;  // trajectory files
    std::optional<int> num_turns;        // dialogue files
    bool async_execution = false;
    bool interleaving = false;
    bool proactivity = false;
    ojson extra = ojson::object();
};

struct Trajectory {
    std::string dialogue_id;
    ComplexityClass complexity_class = ComplexityClass::medium;
    DialogueMetadata metadata;
    std::vector<Goal> goal_list;
    ojson extra = ojson::object();
};

enum class Speaker { user, system };

std::string_view to_string(Speaker s);
Speaker parse_speaker(std::string_view text);

struct GoalStatusChange {
    std::string goal_id;
    GoalStatus new_status = GoalStatus::not_mentioned;

    bool operator==(const GoalStatusChange&) const = default;
};

struct Turn {
    int turn_id = 0;  // 1-based
    Speaker speaker = Speaker::user;
    std::string utterance;
    std::vector<GoalStatusChange> goal_status_changes;
    std::map<std::string, GoalStatus> all_goals;
    ojson extra = ojson::object();
};

struct Dialogue {
    std::string dialogue_id;
    ComplexityClass complexity_class = ComplexityClass::medium;
    DialogueMetadata metadata;
    std::vector<Goal> goal_list;
    std::vector<Turn> turns;
    ojson extra = ojson::object();
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Applies a status change to a goal at the given (1-based) turn.
/// A change to the current status is a no-op and returns the goal unchanged.
/// Throws NonMonotonicTurnError when turn_index is not past the last recorded
/// event, IllegalTransitionError when the change is not in the matrix.
Goal apply_status_change(Goal goal, int turn_index, GoalStatus new_status);

/// Reconstructs each goal's status trajectory by folding the per-turn
/// goal_status_changes, checking every all_goals snapshot along the way.
/// Throws SnapshotMismatchError / IllegalTransitionError / SchemaError on the
/// first inconsistency.
std::map<std::string, std::vector<StatusEvent>> replay_dialogue(const Dialogue& d);

/// One dataset-validation finding, with coordinates.
struct Violation {
    std::string dialogue_id;
    int turn_id = 0;            // 0 when not turn-scoped
    std::string goal_id;        // empty when not goal-scoped
    std::string kind;           // e.g. "illegal_transition", "snapshot_mismatch"
    std::string detail;
};

/// Collecting variant of schema + replay + transition checking: gathers every
/// violation instead of stopping at the first. Also counts how often the
/// NOT_MENTIONED -> PENDING transition occurs so the matrix choice stays
/// auditable.
struct ValidationResult {
    std::vector<Violation> violations;
    int not_mentioned_to_pending_count = 0;
    int turns_checked = 0;
};

ValidationResult validate_dialogue(const Dialogue& d);

/// Throws SchemaError unless the dialogue passes structural validation
/// (alternating speakers starting with USER, sequential turn ids, all_goals
/// covering the goal list, dependency references resolvable).
void require_valid_schema(const Dialogue& d);

// ---------------------------------------------------------------------------
// JSON (de)serialization — field names match the dataset schema exactly;
// unknown fields are preserved on round-trip.
// ---------------------------------------------------------------------------

ojson goal_to_json(const Goal& g);
Goal goal_from_json(const ojson& j);

ojson trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const ojson& j);

ojson dialogue_to_json(const Dialogue& d);
Dialogue dialogue_from_json(const ojson& j);

}  // namespace dialeval
