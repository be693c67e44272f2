#include "dialeval/goal_model.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

namespace dialeval {

namespace {

std::string lower_ascii(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

bool is_terminal(GoalStatus s) {
    return s == GoalStatus::completed || s == GoalStatus::failed || s == GoalStatus::abandoned;
}

std::string_view to_string(GoalStatus s) {
    switch (s) {
        case GoalStatus::not_mentioned: return "not_mentioned";
        case GoalStatus::open: return "open";
        case GoalStatus::pending: return "pending";
        case GoalStatus::completed: return "completed";
        case GoalStatus::failed: return "failed";
        case GoalStatus::abandoned: return "abandoned";
    }
    return "not_mentioned";
}

GoalStatus parse_goal_status(std::string_view text) {
    const std::string t = lower_ascii(text);
    if (t == "not_mentioned") return GoalStatus::not_mentioned;
    if (t == "open") return GoalStatus::open;
    if (t == "pending") return GoalStatus::pending;
    if (t == "completed") return GoalStatus::completed;
    if (t == "failed") return GoalStatus::failed;
    if (t == "abandoned") return GoalStatus::abandoned;
    throw SchemaError("unknown goal status: '" + std::string(text) + "'");
}

TransitionKind classify_transition(GoalStatus from, GoalStatus to) {
    if (from == to) return TransitionKind::no_change;
    return is_legal_transition(from, to) ? TransitionKind::legal : TransitionKind::illegal;
}

bool is_legal_transition(GoalStatus from, GoalStatus to) {
    if (from == to) return false;  // identity is a no-op, not a transition
    switch (from) {
        case GoalStatus::not_mentioned:
            return to == GoalStatus::open || to == GoalStatus::pending;
        case GoalStatus::open:
            return to == GoalStatus::pending || to == GoalStatus::completed ||
                   to == GoalStatus::failed || to == GoalStatus::abandoned;
        case GoalStatus::pending:
            return to == GoalStatus::completed || to == GoalStatus::failed ||
                   to == GoalStatus::abandoned;
        case GoalStatus::completed:
        case GoalStatus::failed:
        case GoalStatus::abandoned:
            return false;  // terminal states are absorbing
    }
    return false;
}

std::string_view to_string(ComplexityClass c) {
    return c == ComplexityClass::medium ? "medium" : "complex";
}

ComplexityClass parse_complexity_class(std::string_view text) {
    const std::string t = lower_ascii(text);
    if (t == "medium") return ComplexityClass::medium;
    if (t == "complex") return ComplexityClass::complex_;
    throw SchemaError("unknown complexity class: '" + std::string(text) + "'");
}

std::string_view to_string(Speaker s) {
    return s == Speaker::user ? "USER" : "SYSTEM";
}

Speaker parse_speaker(std::string_view text) {
    const std::string t = lower_ascii(text);
    if (t == "user") return Speaker::user;
    if (t == "system") return Speaker::system;
    throw SchemaError("unknown speaker: '" + std::string(text) + "'");
}

Goal apply_status_change(Goal goal, int turn_index, GoalStatus new_status) {
    const int last_turn = goal.status_history.empty() ? 0 : goal.status_history.back().turn_index;
    if (turn_index <= last_turn) {
        throw NonMonotonicTurnError(goal.id, turn_index, last_turn);
    }
    switch (classify_transition(goal.status, new_status)) {
        case TransitionKind::no_change:
            return goal;
        case TransitionKind::illegal:
            throw IllegalTransitionError(goal.id, std::string(to_string(goal.status)),
                                         std::string(to_string(new_status)));
        case TransitionKind::legal:
            break;
    }
    goal.status = new_status;
    goal.status_history.push_back(StatusEvent{turn_index, new_status});
    return goal;
}

namespace {

/// Shared fold over a dialogue's turns. The sink receives every violation;
/// returning false from it stops the fold.
struct FoldResult {
    std::map<std::string, std::vector<StatusEvent>> histories;
    int not_mentioned_to_pending = 0;
};

FoldResult fold_dialogue(const Dialogue& d,
                         const std::function<bool(const Violation&)>& sink) {
    FoldResult result;
    std::map<std::string, GoalStatus> statuses;
    std::set<std::string> goal_ids;
    for (const Goal& g : d.goal_list) {
        statuses[g.id] = GoalStatus::not_mentioned;
        result.histories[g.id] = {};
        goal_ids.insert(g.id);
    }

    auto report = [&](int turn_id, const std::string& goal_id, const char* kind,
                      std::string detail) {
        return sink(Violation{d.dialogue_id, turn_id, goal_id, kind, std::move(detail)});
    };

    for (const Turn& turn : d.turns) {
        for (const GoalStatusChange& change : turn.goal_status_changes) {
            auto it = statuses.find(change.goal_id);
            if (it == statuses.end()) {
                if (!report(turn.turn_id, change.goal_id, "unknown_goal",
                            "status change names a goal absent from goal_list"))
                    return result;
                continue;
            }
            switch (classify_transition(it->second, change.new_status)) {
                case TransitionKind::no_change:
                    break;  // echoed status; not an event
                case TransitionKind::illegal:
                    if (!report(turn.turn_id, change.goal_id, "illegal_transition",
                                std::string(to_string(it->second)) + " -> " +
                                    std::string(to_string(change.new_status))))
                        return result;
                    break;
                case TransitionKind::legal:
                    if (it->second == GoalStatus::not_mentioned &&
                        change.new_status == GoalStatus::pending) {
                        ++result.not_mentioned_to_pending;
                    }
                    it->second = change.new_status;
                    result.histories[change.goal_id].push_back(
                        StatusEvent{turn.turn_id, change.new_status});
                    break;
            }
        }

        // Snapshot coherence: the fold must reproduce all_goals exactly.
        for (const auto& [goal_id, status] : statuses) {
            auto found = turn.all_goals.find(goal_id);
            if (found == turn.all_goals.end()) {
                if (!report(turn.turn_id, goal_id, "snapshot_mismatch",
                            "all_goals is missing goal '" + goal_id + "'"))
                    return result;
            } else if (found->second != status) {
                if (!report(turn.turn_id, goal_id, "snapshot_mismatch",
                            "fold gives " + std::string(to_string(status)) +
                                ", snapshot says " + std::string(to_string(found->second))))
                    return result;
            }
        }
        for (const auto& [goal_id, status] : turn.all_goals) {
            if (!goal_ids.count(goal_id)) {
                if (!report(turn.turn_id, goal_id, "snapshot_mismatch",
                            "all_goals lists goal '" + goal_id + "' absent from goal_list"))
                    return result;
            }
        }
    }
    return result;
}

}  // namespace

std::map<std::string, std::vector<StatusEvent>> replay_dialogue(const Dialogue& d) {
    require_valid_schema(d);
    std::optional<Violation> first;
    FoldResult result = fold_dialogue(d, [&](const Violation& v) {
        first = v;
        return false;  // stop at the first inconsistency
    });
    if (first) {
        if (first->kind == "illegal_transition") {
            const auto arrow = first->detail.find(" -> ");
            throw IllegalTransitionError(first->goal_id, first->detail.substr(0, arrow),
                                         first->detail.substr(arrow + 4));
        }
        if (first->kind == "unknown_goal") {
            throw SchemaError("turn " + std::to_string(first->turn_id) +
                              " changes unknown goal '" + first->goal_id + "'");
        }
        throw SnapshotMismatchError(first->turn_id, first->detail);
    }
    return std::move(result.histories);
}

ValidationResult validate_dialogue(const Dialogue& d) {
    ValidationResult out;
    auto add = [&](int turn_id, std::string goal_id, std::string kind, std::string detail) {
        out.violations.push_back(Violation{d.dialogue_id, turn_id, std::move(goal_id),
                                           std::move(kind), std::move(detail)});
    };

    std::set<std::string> goal_ids;
    for (const Goal& g : d.goal_list) {
        if (!goal_ids.insert(g.id).second) {
            add(0, g.id, "duplicate_goal_id", "goal id appears more than once");
        }
    }
    for (const Goal& g : d.goal_list) {
        for (const std::string& dep : g.dependencies) {
            if (dep == g.id) add(0, g.id, "self_dependency", "goal depends on itself");
            else if (!goal_ids.count(dep))
                add(0, g.id, "dangling_dependency", "dependency '" + dep + "' not in goal_list");
        }
        for (const auto& [slot, value] : g.slot_values) {
            if (std::find(g.slots.begin(), g.slots.end(), slot) == g.slots.end())
                add(0, g.id, "unknown_slot", "slot_values key '" + slot + "' not in slots");
            if (value.empty())
                add(0, g.id, "empty_slot_value", "slot '" + slot + "' has an empty value");
        }
    }
    if (d.metadata.num_goals != static_cast<int>(d.goal_list.size())) {
        add(0, "", "metadata_mismatch",
            "metadata.num_goals=" + std::to_string(d.metadata.num_goals) + " but goal_list has " +
                std::to_string(d.goal_list.size()) + " goals");
    }
    if (d.metadata.num_turns && *d.metadata.num_turns != static_cast<int>(d.turns.size())) {
        add(0, "", "metadata_mismatch",
            "metadata.num_turns=" + std::to_string(*d.metadata.num_turns) + " but dialogue has " +
                std::to_string(d.turns.size()) + " turns");
    }

    for (size_t i = 0; i < d.turns.size(); ++i) {
        const Turn& turn = d.turns[i];
        const int expected_id = static_cast<int>(i) + 1;
        if (turn.turn_id != expected_id) {
            add(turn.turn_id, "", "turn_id_gap",
                "expected turn_id " + std::to_string(expected_id));
        }
        const Speaker expected = (i % 2 == 0) ? Speaker::user : Speaker::system;
        if (turn.speaker != expected) {
            add(turn.turn_id, "", "speaker_order",
                std::string("expected ") + std::string(to_string(expected)));
        }
    }

    FoldResult fold = fold_dialogue(d, [&](const Violation& v) {
        out.violations.push_back(v);
        return true;  // keep collecting
    });
    out.not_mentioned_to_pending_count = fold.not_mentioned_to_pending;
    out.turns_checked = static_cast<int>(d.turns.size());

    // History monotonicity of the folded result is structural (turn ids grow),
    // but per-goal histories embedded in goal_list are caller data: check them.
    for (const Goal& g : d.goal_list) {
        for (size_t i = 1; i < g.status_history.size(); ++i) {
            if (g.status_history[i].turn_index <= g.status_history[i - 1].turn_index) {
                add(g.status_history[i].turn_index, g.id, "non_monotonic_history",
                    "status_history turn indices must strictly increase");
            }
        }
    }
    return out;
}

void require_valid_schema(const Dialogue& d) {
    std::set<std::string> goal_ids;
    for (const Goal& g : d.goal_list) {
        if (g.id.empty()) throw SchemaError("goal with empty id in '" + d.dialogue_id + "'");
        if (!goal_ids.insert(g.id).second)
            throw SchemaError("duplicate goal id '" + g.id + "' in '" + d.dialogue_id + "'");
    }
    for (const Goal& g : d.goal_list) {
        for (const std::string& dep : g.dependencies) {
            if (dep == g.id)
                throw SchemaError("goal '" + g.id + "' depends on itself");
            if (!goal_ids.count(dep))
                throw SchemaError("goal '" + g.id + "' depends on unknown goal '" + dep + "'");
        }
    }
    for (size_t i = 0; i < d.turns.size(); ++i) {
        const Turn& turn = d.turns[i];
        if (turn.turn_id != static_cast<int>(i) + 1)
            throw SchemaError("turn ids must be sequential starting at 1 in '" + d.dialogue_id +
                              "'");
        const Speaker expected = (i % 2 == 0) ? Speaker::user : Speaker::system;
        if (turn.speaker != expected)
            throw SchemaError("speakers must alternate starting with USER in '" + d.dialogue_id +
                              "' (turn " + std::to_string(turn.turn_id) + ")");
        // Each snapshot covers the full goal set, nothing more.
        for (const std::string& id : goal_ids)
            if (!turn.all_goals.count(id))
                throw SchemaError("turn " + std::to_string(turn.turn_id) + " snapshot lacks goal '" +
                                  id + "' in '" + d.dialogue_id + "'");
        for (const auto& [id, status] : turn.all_goals)
            if (!goal_ids.count(id))
                throw SchemaError("turn " + std::to_string(turn.turn_id) +
                                  " snapshot names unknown goal '" + id + "' in '" +
                                  d.dialogue_id + "'");
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

/// Copies every key of `extra` that is not already present in `j`.
void merge_extra(ojson& j, const ojson& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        if (!j.contains(it.key())) j[it.key()] = it.value();
    }
}

/// Pulls unknown keys of `j` (those not in `known`) into an extra object.
ojson collect_extra(const ojson& j, std::initializer_list<std::string_view> known) {
    ojson extra = ojson::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (std::string_view k : known)
            if (it.key() == k) { is_known = true; break; }
        if (!is_known) extra[it.key()] = it.value();
    }
    return extra;
}

ojson metadata_to_json(const DialogueMetadata& m, bool dialogue_shape) {
    ojson j = ojson::object();
    j["num_goals"] = m.num_goals;
    if (dialogue_shape) {
        if (m.num_turns) j["num_turns"] = *m.num_turns;
        // The generation target survives alongside the realized count.
        if (m.estimated_turns) j["estimated_turns"] = *m.estimated_turns;
    } else {
        if (m.estimated_turns) j["estimated_turns"] = *m.estimated_turns;
    }
    j["async_execution"] = m.async_execution;
    j["interleaving"] = m.interleaving;
    j["proactivity"] = m.proactivity;
    merge_extra(j, m.extra);
    return j;
}

DialogueMetadata metadata_from_json(const ojson& j) {
    DialogueMetadata m;
    m.num_goals = j.value("num_goals", 0);
    if (j.contains("estimated_turns")) m.estimated_turns = j["estimated_turns"].get<int>();
    if (j.contains("num_turns")) m.num_turns = j["num_turns"].get<int>();
    m.async_execution = j.value("async_execution", false);
    m.interleaving = j.value("interleaving", false);
    m.proactivity = j.value("proactivity", false);
    m.extra = collect_extra(j, {"num_goals", "estimated_turns", "num_turns", "async_execution",
                                "interleaving", "proactivity"});
    return m;
}

}  // namespace

ojson goal_to_json(const Goal& g) {
    ojson j = ojson::object();
    j["id"] = g.id;
    j["domain"] = g.domain;
    j["intent"] = g.intent;
    j["slots"] = g.slots;
    j["slot_values"] = g.slot_values;
    j["dependencies"] = g.dependencies;
    if (g.parent_id) j["parent_id"] = *g.parent_id;
    j["content"] = g.content;
    j["core_content"] = g.core_content;
    if (!g.classification_method.empty()) j["classification_method"] = g.classification_method;
    j["dependency_label"] = g.dependency_label;
    j["defectiveness_label"] = g.defectiveness_label;
    if (!g.status_history.empty() || g.status != GoalStatus::not_mentioned) {
        j["status"] = std::string(to_string(g.status));
        ojson history = ojson::array();
        for (const StatusEvent& e : g.status_history) {
            history.push_back({{"turn_index", e.turn_index},
                               {"new_status", std::string(to_string(e.new_status))}});
        }
        j["status_history"] = history;
    }
    merge_extra(j, g.extra);
    return j;
}

Goal goal_from_json(const ojson& j) {
    Goal g;
    g.id = j.value("id", "");
    g.domain = j.value("domain", "");
    g.intent = j.value("intent", "");
    if (j.contains("slots")) g.slots = j["slots"].get<std::vector<std::string>>();
    if (j.contains("slot_values"))
        g.slot_values = j["slot_values"].get<std::map<std::string, std::string>>();
    if (j.contains("dependencies"))
        g.dependencies = j["dependencies"].get<std::vector<std::string>>();
    if (j.contains("parent_id") && !j["parent_id"].is_null())
        g.parent_id = j["parent_id"].get<std::string>();
    g.content = j.value("content", "");
    g.core_content = j.value("core_content", "");
    g.classification_method = j.value("classification_method", "");
    g.dependency_label = j.value("dependency_label", false);
    g.defectiveness_label = j.value("defectiveness_label", false);
    if (j.contains("status")) g.status = parse_goal_status(j["status"].get<std::string>());
    if (j.contains("status_history")) {
        for (const auto& e : j["status_history"]) {
            g.status_history.push_back(StatusEvent{
                e.at("turn_index").get<int>(),
                parse_goal_status(e.at("new_status").get<std::string>())});
        }
    }
    g.extra = collect_extra(
        j, {"id", "domain", "intent", "slots", "slot_values", "dependencies", "parent_id",
            "content", "core_content", "classification_method", "dependency_label",
            "defectiveness_label", "status", "status_history"});
    return g;
}

ojson trajectory_to_json(const Trajectory& t) {
    ojson j = ojson::object();
    j["dialogue_id"] = t.dialogue_id;
    j["complexity_class"] = std::string(to_string(t.complexity_class));
    j["metadata"] = metadata_to_json(t.metadata, /*dialogue_shape=*/false);
    ojson goals = ojson::array();
    for (const Goal& g : t.goal_list) goals.push_back(goal_to_json(g));
    j["goal_list"] = goals;
    merge_extra(j, t.extra);
    return j;
}

Trajectory trajectory_from_json(const ojson& j) {
    Trajectory t;
    t.dialogue_id = j.value("dialogue_id", "");
    t.complexity_class = parse_complexity_class(j.value("complexity_class", "medium"));
    if (j.contains("metadata")) t.metadata = metadata_from_json(j["metadata"]);
    if (j.contains("goal_list"))
        for (const auto& g : j["goal_list"]) t.goal_list.push_back(goal_from_json(g));
    t.extra = collect_extra(j, {"dialogue_id", "complexity_class", "metadata", "goal_list"});
    return t;
}

namespace {

ojson turn_to_json(const Turn& t) {
    ojson j = ojson::object();
    j["turn_id"] = t.turn_id;
    j["speaker"] = std::string(to_string(t.speaker));
    j["utterance"] = t.utterance;
    ojson changes = ojson::array();
    for (const GoalStatusChange& c : t.goal_status_changes) {
        changes.push_back({{"goal_id", c.goal_id},
                           {"new_status", std::string(to_string(c.new_status))}});
    }
    j["goal_status_changes"] = changes;
    ojson all = ojson::object();
    for (const auto& [id, status] : t.all_goals) all[id] = std::string(to_string(status));
    j["all_goals"] = all;
    merge_extra(j, t.extra);
    return j;
}

Turn turn_from_json(const ojson& j) {
    Turn t;
    t.turn_id = j.value("turn_id", 0);
    t.speaker = parse_speaker(j.value("speaker", "USER"));
    t.utterance = j.value("utterance", "");
    if (j.contains("goal_status_changes")) {
        for (const auto& c : j["goal_status_changes"]) {
            t.goal_status_changes.push_back(GoalStatusChange{
                c.at("goal_id").get<std::string>(),
                parse_goal_status(c.at("new_status").get<std::string>())});
        }
    }
    if (j.contains("all_goals")) {
        for (auto it = j["all_goals"].begin(); it != j["all_goals"].end(); ++it) {
            t.all_goals[it.key()] = parse_goal_status(it.value().get<std::string>());
        }
    }
    t.extra = collect_extra(j, {"turn_id", "speaker", "utterance", "goal_status_changes",
                                "all_goals"});
    return t;
}

}  // namespace

ojson dialogue_to_json(const Dialogue& d) {
    ojson j = ojson::object();
    j["dialogue_id"] = d.dialogue_id;
    j["complexity_class"] = std::string(to_string(d.complexity_class));
    DialogueMetadata meta = d.metadata;
    meta.num_turns = static_cast<int>(d.turns.size());
    j["metadata"] = metadata_to_json(meta, /*dialogue_shape=*/true);
    ojson goals = ojson::array();
    for (const Goal& g : d.goal_list) goals.push_back(goal_to_json(g));
    j["goal_list"] = goals;
    ojson turns = ojson::array();
    for (const Turn& t : d.turns) turns.push_back(turn_to_json(t));
    j["turns"] = turns;
    merge_extra(j, d.extra);
    return j;
}

Dialogue dialogue_from_json(const ojson& j) {
    for (const char* key : {"dialogue_id", "goal_list", "turns"})
        if (!j.contains(key))
            throw SchemaError(std::string("dialogue object lacks required key '") + key + "'");
    Dialogue d;
    d.dialogue_id = j.value("dialogue_id", "");
    d.complexity_class = parse_complexity_class(j.value("complexity_class", "medium"));
    if (j.contains("metadata")) d.metadata = metadata_from_json(j["metadata"]);
    for (const auto& g : j["goal_list"]) d.goal_list.push_back(goal_from_json(g));
    for (const auto& t : j["turns"]) d.turns.push_back(turn_from_json(t));
    d.extra = collect_extra(j, {"dialogue_id", "complexity_class", "metadata", "goal_list",
                                "turns"});
    return d;
}

}  // namespace dialeval
