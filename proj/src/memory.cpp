#include "dialeval/memory.hpp"

#include <algorithm>
#include <set>

namespace dialeval {

std::string_view to_string(RelationKind k) {
    return k == RelationKind::link ? "link" : "dependency";
}

std::string_view to_string(TransitionOrigin o) {
    switch (o) {
        case TransitionOrigin::extraction: return "extraction";
        case TransitionOrigin::update: return "update";
        case TransitionOrigin::audit: return "audit";
    }
    return "extraction";
}

// ---------------------------------------------------------------------------
// DualStore
// ---------------------------------------------------------------------------

DualStore::DualStore(int embedding_dim) : embedding_dim_(embedding_dim) {}

std::string DualStore::insert(MemoryGoal goal, std::vector<double> embedding) {
    if (static_cast<int>(embedding.size()) != embedding_dim_) {
        throw SchemaError("embedding dimension mismatch on insert");
    }
    if (goal.status == GoalStatus::not_mentioned) {
        throw SchemaError("store-resident goals never carry not_mentioned");
    }
    std::string id = "m" + std::to_string(next_id_++);
    goal.id = id;
    order_.push_back(id);
    matrix_.insert(matrix_.end(), embedding.begin(), embedding.end());
    vectors_[id] = std::move(embedding);
    goals_[id] = std::move(goal);
    return id;
}

bool DualStore::contains(const std::string& id) const { return goals_.count(id) > 0; }

MemoryGoal& DualStore::get(const std::string& id) {
    auto it = goals_.find(id);
    if (it == goals_.end()) throw UnknownIdError(id);
    return it->second;
}

const MemoryGoal& DualStore::get(const std::string& id) const {
    auto it = goals_.find(id);
    if (it == goals_.end()) throw UnknownIdError(id);
    return it->second;
}

const std::vector<double>& DualStore::embedding_of(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw UnknownIdError(id);
    return it->second;
}

void DualStore::refresh_embedding(const std::string& id, std::vector<double> embedding) {
    if (static_cast<int>(embedding.size()) != embedding_dim_) {
        throw SchemaError("embedding dimension mismatch on refresh");
    }
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw UnknownIdError(id);
    for (size_t row = 0; row < order_.size(); ++row) {
        if (order_[row] == id) {
            std::copy(embedding.begin(), embedding.end(),
                      matrix_.begin() + static_cast<long>(row * embedding.size()));
            break;
        }
    }
    it->second = std::move(embedding);
}

std::vector<std::pair<std::string, double>> DualStore::retrieve_top_k(
    const std::vector<double>& query, int k) const {
    std::vector<std::pair<std::string, double>> out;
    if (order_.empty() || k <= 0) return out;
    const std::vector<ScoredIndex> hits =
        top_k_parallel(matrix_, embedding_dim_, static_cast<int>(order_.size()), query, k);
    out.reserve(hits.size());
    for (const ScoredIndex& hit : hits) {
        out.push_back({order_[static_cast<size_t>(hit.index)], hit.score});
    }
    return out;
}

double DualStore::similarity(const std::string& id, const std::vector<double>& query) const {
    return cosine_similarity(embedding_of(id), query);
}

bool DualStore::dependency_path_exists(const std::string& from, const std::string& to) const {
    // DFS over dependency edges only.
    std::vector<std::string> stack{from};
    std::set<std::string> seen{from};
    while (!stack.empty()) {
        const std::string node = stack.back();
        stack.pop_back();
        if (node == to) return true;
        for (const RelationEdge& e : relations_) {
            if (e.kind == RelationKind::dependency && e.from == node && !seen.count(e.to)) {
                seen.insert(e.to);
                stack.push_back(e.to);
            }
        }
    }
    return false;
}

bool DualStore::add_relation(const std::string& from, const std::string& to, RelationKind kind,
                             std::string* diagnostic) {
    if (!contains(from)) throw UnknownIdError(from);
    if (!contains(to)) throw UnknownIdError(to);
    if (from == to) {
        if (diagnostic) *diagnostic = "self-relation on '" + from + "' dropped";
        return false;
    }
    for (const RelationEdge& e : relations_) {
        if (e.from == from && e.to == to && e.kind == kind) return true;  // already present
    }
    if (kind == RelationKind::dependency && dependency_path_exists(to, from)) {
        // from -> to would close a directed cycle; keep the semantic signal
        // as an untyped link instead.
        relations_.push_back({from, to, RelationKind::link});
        if (diagnostic) {
            *diagnostic = "dependency " + from + " -> " + to +
                          " would create a cycle; downgraded to link";
        }
        return false;
    }
    relations_.push_back({from, to, kind});
    return true;
}

std::vector<std::string> DualStore::dependencies_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const RelationEdge& e : relations_) {
        if (e.kind == RelationKind::dependency && e.from == id) out.push_back(e.to);
    }
    return out;
}

bool DualStore::bijection_holds() const {
    if (goals_.size() != vectors_.size() || goals_.size() != order_.size()) return false;
    if (matrix_.size() != order_.size() * static_cast<size_t>(embedding_dim_)) return false;
    for (const std::string& id : order_) {
        if (!goals_.count(id) || !vectors_.count(id)) return false;
    }
    return true;
}

bool DualStore::dependencies_acyclic() const {
    // Kahn's algorithm over dependency edges.
    std::map<std::string, int> indegree;
    for (const std::string& id : order_) indegree[id] = 0;
    for (const RelationEdge& e : relations_) {
        if (e.kind == RelationKind::dependency) ++indegree[e.to];
    }
    std::vector<std::string> queue;
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) queue.push_back(id);
    }
    size_t processed = 0;
    while (!queue.empty()) {
        const std::string node = queue.back();
        queue.pop_back();
        ++processed;
        for (const RelationEdge& e : relations_) {
            if (e.kind == RelationKind::dependency && e.from == node) {
                if (--indegree[e.to] == 0) queue.push_back(e.to);
            }
        }
    }
    return processed == indegree.size();
}

ojson DualStore::to_json() const {
    ojson j = ojson::object();
    ojson goals = ojson::array();
    for (const std::string& id : order_) {
        const MemoryGoal& g = goals_.at(id);
        ojson row = ojson::object();
        row["id"] = g.id;
        row["content"] = g.content;
        row["core_content"] = g.core_content;
        row["status"] = std::string(to_string(g.status));
        ojson history = ojson::array();
        for (const StatusEvent& e : g.status_history) {
            history.push_back({{"turn_index", e.turn_index},
                               {"new_status", std::string(to_string(e.new_status))}});
        }
        row["status_history"] = history;
        row["slot_values"] = g.slot_values;
        row["dependencies"] = dependencies_of(id);
        if (g.parent_id) row["parent_id"] = *g.parent_id;
        row["core_pattern_listed"] = g.core_pattern_listed;
        row["inserted_at_turn"] = g.inserted_at_turn;
        goals.push_back(row);
    }
    j["goals"] = goals;
    ojson rels = ojson::array();
    for (const RelationEdge& e : relations_) {
        rels.push_back({{"from", e.from}, {"to", e.to}, {"kind", std::string(to_string(e.kind))}});
    }
    j["relations"] = rels;
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

bool is_listed_core_pattern(const std::string& core_content) {
    static const std::set<std::string> kPatterns = {
        "book hotel",      "book flight", "book ticket",
        "check account",   "search restaurant", "book restaurant",
    };
    return kPatterns.count(core_content) > 0;
}

std::vector<ExchangePair> group_into_pairs(const std::vector<Turn>& turns) {
    std::vector<ExchangePair> pairs;
    for (size_t i = 0; i < turns.size(); i += 2) {
        ExchangePair pair;
        pair.pair_index = static_cast<int>(pairs.size()) + 1;
        pair.user_utterance = turns[i].utterance;
        pair.last_utterance_turn_id = turns[i].turn_id;
        if (i + 1 < turns.size()) {
            pair.system_response = turns[i + 1].utterance;
            pair.last_utterance_turn_id = turns[i + 1].turn_id;
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

MemoryPipeline::MemoryPipeline(JudgeGateway* judge, const EmbeddingProvider* embedder,
                               PipelineConfig config)
    : judge_(judge), embedder_(embedder), config_(config) {}

std::vector<CandidateGoal> MemoryPipeline::extract_goals(const ExchangePair& pair) {
    JudgeRequest request;
    request.template_id = TemplateId::extract_goals;
    request.variables = {{"user_utterance", pair.user_utterance},
                         {"system_response", pair.system_response}};
    const JudgeResponse response = judge_->dispatch(request);

    std::vector<CandidateGoal> candidates;
    for (const auto& item : response.parsed) {
        CandidateGoal c;
        c.goal_content = item.at("goal_content").get<std::string>();
        c.core_content = item.at("core_content").get<std::string>();
        c.status = parse_goal_status(item.at("status").get<std::string>());
        c.pattern_listed = is_listed_core_pattern(c.core_content);
        if (item.contains("slot_values") && item["slot_values"].is_object()) {
            c.slot_values =
                item["slot_values"].get<std::map<std::string, std::string>>();
        }
        if (item.contains("dependencies") && item["dependencies"].is_array()) {
            c.dependency_refs = item["dependencies"].get<std::vector<std::string>>();
        }
        candidates.push_back(std::move(c));
    }
    return candidates;
}

ExistenceOutcome MemoryPipeline::existence_check(const CandidateGoal& candidate,
                                                 const std::vector<double>& embedding,
                                                 const DualStore& store) {
    ExistenceOutcome outcome;
    if (store.size() == 0) return outcome;  // short-circuit: no judge calls

    const auto neighbors = store.retrieve_top_k(embedding, config_.k);
    for (const auto& [id, score] : neighbors) {
        const MemoryGoal& stored = store.get(id);
        JudgeRequest request;
        request.template_id = TemplateId::existence_check;
        request.variables = {{"candidate_content", candidate.goal_content},
                             {"candidate_core_content", candidate.core_content},
                             {"stored_content", stored.content},
                             {"stored_core_content", stored.core_content}};
        const JudgeResponse response = judge_->dispatch(request);
        ++outcome.judge_calls;

        const bool matched = response.parsed.at("match").get<bool>();
        const double confidence = response.confidence.value_or(1.0);
        if (matched && confidence >= config_.tau) {
            outcome.match = true;
            outcome.matched_id = id;
            return outcome;
        }
    }
    return outcome;
}

namespace {

/// Resolves a dependency reference (core_content or id) against the store.
std::optional<std::string> resolve_ref(const DualStore& store, const std::string& ref) {
    if (store.contains(ref)) return ref;
    for (const std::string& id : store.insertion_order()) {
        if (store.get(id).core_content == ref) return id;
    }
    return std::nullopt;
}

void apply_candidate_dependencies(const CandidateGoal& candidate, const std::string& id,
                                  DualStore& store, std::vector<std::string>& diagnostics) {
    for (const std::string& ref : candidate.dependency_refs) {
        const auto target = resolve_ref(store, ref);
        if (!target) {
            diagnostics.push_back("dependency reference '" + ref + "' for " + id +
                                  " matches no stored goal; dropped");
            continue;
        }
        if (*target == id) continue;
        std::string note;
        store.add_relation(id, *target, RelationKind::dependency, &note);
        if (!note.empty()) diagnostics.push_back(note);
    }
}

}  // namespace

void MemoryPipeline::update_goal(const std::string& matched_id, const CandidateGoal& candidate,
                                 DualStore& store, const ExchangePair& pair,
                                 ProcessResult& result) {
    MemoryGoal& stored = store.get(matched_id);

    switch (classify_transition(stored.status, candidate.status)) {
        case TransitionKind::no_change:
            break;
        case TransitionKind::illegal:
            result.diagnostics.push_back(
                "turn " + std::to_string(pair.pair_index) + ": illegal transition " +
                std::string(to_string(stored.status)) + " -> " +
                std::string(to_string(candidate.status)) + " for " + matched_id + "; retained");
            break;
        case TransitionKind::legal: {
            TransitionRecord record;
            record.goal_id = matched_id;
            record.from = stored.status;
            record.to = candidate.status;
            record.turn_index = pair.pair_index;
            record.origin = TransitionOrigin::update;
            record.user_mentioned_goal =
                user_mentions(pair, stored.content, stored.core_content);
            stored.status = candidate.status;
            stored.status_history.push_back(StatusEvent{pair.pair_index, candidate.status});
            result.transitions.push_back(record);
            break;
        }
    }

    for (const auto& [slot, value] : candidate.slot_values) {
        auto it = stored.slot_values.find(slot);
        if (it != stored.slot_values.end() && it->second != value) {
            result.diagnostics.push_back("turn " + std::to_string(pair.pair_index) + ": slot '" +
                                         slot + "' of " + matched_id + " overridden ('" +
                                         it->second + "' -> '" + value + "')");
        }
        stored.slot_values[slot] = value;
    }

    if (!candidate.goal_content.empty() && candidate.goal_content != stored.content) {
        stored.content = candidate.goal_content;
        store.refresh_embedding(matched_id, embedder_->embed(stored.content));
    }

    apply_candidate_dependencies(candidate, matched_id, store, result.diagnostics);
}

std::string MemoryPipeline::insert_and_evolve(const CandidateGoal& candidate,
                                              std::vector<double> embedding, DualStore& store,
                                              const ExchangePair& pair, ProcessResult& result) {
    // Related set first (rel = cosine on stored embeddings), judged before the
    // insert so the candidate itself is not its own neighbor.
    std::vector<std::pair<std::string, double>> related;
    for (const std::string& id : store.insertion_order()) {
        const double rel = store.similarity(id, embedding);
        if (rel >= config_.delta) related.push_back({id, rel});
    }
    std::stable_sort(related.begin(), related.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (static_cast<int>(related.size()) > config_.k) {
        related.resize(static_cast<size_t>(config_.k));
    }

    MemoryGoal goal;
    goal.content = candidate.goal_content;
    goal.core_content = candidate.core_content;
    goal.status = candidate.status;
    goal.status_history = {StatusEvent{pair.pair_index, candidate.status}};
    goal.slot_values = candidate.slot_values;
    goal.core_pattern_listed = candidate.pattern_listed;
    goal.inserted_at_turn = pair.pair_index;
    const std::string id = store.insert(std::move(goal), std::move(embedding));
    ++result.insert_count;

    TransitionRecord record;
    record.goal_id = id;
    record.from = GoalStatus::not_mentioned;
    record.to = candidate.status;
    record.turn_index = pair.pair_index;
    record.origin = TransitionOrigin::extraction;
    record.user_mentioned_goal =
        user_mentions(pair, candidate.goal_content, candidate.core_content);
    result.transitions.push_back(record);

    if (!related.empty()) {
        std::string context;
        for (const auto& [rid, rel] : related) {
            const MemoryGoal& r = store.get(rid);
            context += rid + ": " + r.content + " (core: " + r.core_content + ")\n";
        }
        JudgeRequest request;
        request.template_id = TemplateId::evolve_relations;
        request.variables = {{"new_goal_content", candidate.goal_content},
                             {"new_goal_core_content", candidate.core_content},
                             {"related_goals_context", context}};
        const JudgeResponse response = judge_->dispatch(request);
        ++result.relation_judge_calls;

        for (const auto& [rid, rel] : related) {
            if (!response.parsed.contains(rid)) continue;
            const std::string kind = response.parsed[rid].get<std::string>();
            if (kind == "none") continue;
            std::string note;
            store.add_relation(id, rid,
                               kind == "dependency" ? RelationKind::dependency
                                                    : RelationKind::link,
                               &note);
            if (!note.empty()) result.diagnostics.push_back(note);
        }
    }

    apply_candidate_dependencies(candidate, id, store, result.diagnostics);
    return id;
}

std::vector<TransitionRecord> MemoryPipeline::proactive_audit(DualStore& store,
                                                              const ExchangePair& context,
                                                              ProcessResult& result) {
    std::vector<TransitionRecord> applied;
    for (const std::string& id : store.insertion_order()) {
        MemoryGoal& goal = store.get(id);
        if (is_terminal(goal.status)) continue;  // terminals never touched

        JudgeRequest request;
        request.template_id = TemplateId::classify_status;
        request.variables = {{"goal_content", goal.content},
                             {"user_utterance", context.user_utterance},
                             {"system_response", context.system_response}};
        GoalStatus judged;
        try {
            const JudgeResponse response = judge_->dispatch(request);
            judged = parse_goal_status(response.parsed.at("status").get<std::string>());
        } catch (const Error& e) {
            result.diagnostics.push_back("audit of " + id + " skipped: " + e.what());
            continue;  // one goal's failure does not abort the audit
        }

        switch (classify_transition(goal.status, judged)) {
            case TransitionKind::no_change:
                break;
            case TransitionKind::illegal:
                result.diagnostics.push_back(
                    "audit: illegal transition " + std::string(to_string(goal.status)) + " -> " +
                    std::string(to_string(judged)) + " for " + id + "; retained");
                break;
            case TransitionKind::legal: {
                TransitionRecord record;
                record.goal_id = id;
                record.from = goal.status;
                record.to = judged;
                record.turn_index = context.pair_index;
                record.origin = TransitionOrigin::audit;
                record.user_mentioned_goal = false;
                goal.status = judged;
                goal.status_history.push_back(StatusEvent{context.pair_index, judged});
                applied.push_back(record);
                result.transitions.push_back(record);
                break;
            }
        }
    }
    ++result.audit_runs;
    return applied;
}

bool MemoryPipeline::user_mentions(const ExchangePair& pair, const std::string& content,
                                   const std::string& core_content) const {
    const std::string user = normalize_text(pair.user_utterance);
    const std::string core = normalize_text(core_content);
    if (!core.empty() && user.find(core) != std::string::npos) return true;
    const double sim =
        cosine_similarity(embedder_->embed(pair.user_utterance), embedder_->embed(content));
    return sim >= config_.mention_tau;
}

namespace {

StoreSnapshot snapshot_store(const DualStore& store, const ExchangePair& pair) {
    StoreSnapshot snap;
    snap.pair_index = pair.pair_index;
    snap.last_utterance_turn_id = pair.last_utterance_turn_id;
    snap.goal_ids = store.insertion_order();
    for (const std::string& id : snap.goal_ids) {
        const MemoryGoal& g = store.get(id);
        snap.statuses[id] = g.status;
        snap.core_contents[id] = g.core_content;
        snap.slot_values[id] = g.slot_values;
    }
    snap.relations = store.relations();
    return snap;
}

}  // namespace

ProcessResult MemoryPipeline::process_dialogue(const std::string& dialogue_id,
                                               const std::vector<Turn>& turns) {
    ProcessResult result{dialogue_id, DualStore(config_.embedding_dim), {}, {}, {}, 0, 0, 0, 0};
    const std::vector<ExchangePair> pairs = group_into_pairs(turns);

    for (const ExchangePair& pair : pairs) {
        judge_->set_context(dialogue_id, pair.pair_index);

        try {
            const std::vector<CandidateGoal> candidates = extract_goals(pair);
            for (const CandidateGoal& candidate : candidates) {
                if (candidate.status == GoalStatus::not_mentioned ||
                    candidate.status == GoalStatus::abandoned) {
                    result.diagnostics.push_back(
                        "turn " + std::to_string(pair.pair_index) + ": candidate '" +
                        candidate.core_content + "' carries extraction-invalid status " +
                        std::string(to_string(candidate.status)) + "; dropped");
                    continue;
                }
                const std::vector<double> embedding = embedder_->embed(candidate.goal_content);
                const ExistenceOutcome outcome =
                    existence_check(candidate, embedding, result.store);
                if (outcome.match) {
                    ++result.match_count;
                    update_goal(outcome.matched_id, candidate, result.store, pair, result);
                } else {
                    insert_and_evolve(candidate, embedding, result.store, pair, result);
                }
            }

            const bool scheduled = config_.audit_period > 0 &&
                                   pair.pair_index % config_.audit_period == 0;
            const bool final_pair = pair.pair_index == static_cast<int>(pairs.size());
            if (scheduled || final_pair) {
                proactive_audit(result.store, pair, result);
            }
        } catch (const Error& e) {
            throw Error(e.category(), dialogue_id + " turn " +
                                          std::to_string(pair.pair_index) + ": " + e.what());
        }

        result.snapshots.push_back(snapshot_store(result.store, pair));
    }
    return result;
}

ojson snapshot_to_json(const StoreSnapshot& s) {
    ojson j = ojson::object();
    j["pair_index"] = s.pair_index;
    j["last_utterance_turn_id"] = s.last_utterance_turn_id;
    ojson goals = ojson::array();
    for (const std::string& id : s.goal_ids) {
        ojson row = ojson::object();
        row["id"] = id;
        row["core_content"] = s.core_contents.at(id);
        row["status"] = std::string(to_string(s.statuses.at(id)));
        row["slot_values"] = s.slot_values.at(id);
        goals.push_back(row);
    }
    j["goals"] = goals;
    ojson rels = ojson::array();
    for (const RelationEdge& e : s.relations) {
        rels.push_back({{"from", e.from}, {"to", e.to}, {"kind", std::string(to_string(e.kind))}});
    }
    j["relations"] = rels;
    return j;
}

}  // namespace dialeval
