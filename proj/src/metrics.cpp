#include "dialeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "dialeval/errors.hpp"
#include "dialeval/json_util.hpp"
#include "dialeval/templates.hpp"

namespace dialeval {

namespace {

// Kahn topological check over the dependency map; ids absent from
// final_statuses are still graph nodes if referenced.
void require_acyclic(const std::map<std::string, std::vector<std::string>>& dependencies) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& [id, deps] : dependencies) {
        indegree.try_emplace(id, 0);
        for (const auto& dep : deps) {
            indegree.try_emplace(dep, 0);
            ++indegree[id];
            dependents[dep].push_back(id);
        }
    }
    std::deque<std::string> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.push_back(id);
    size_t seen = 0;
    while (!ready.empty()) {
        std::string id = ready.front();
        ready.pop_front();
        ++seen;
        auto it = dependents.find(id);
        if (it == dependents.end()) continue;
        for (const auto& nxt : it->second)
            if (--indegree[nxt] == 0) ready.push_back(nxt);
    }
    if (seen != indegree.size()) throw CyclicDependenciesError();
}

}  // namespace

Rational dgcr(const std::map<std::string, GoalStatus>& final_statuses,
              const std::map<std::string, std::vector<std::string>>& dependencies,
              EligibilityMode mode) {
    require_acyclic(dependencies);
    long long completed_eligible = 0;
    long long decided_eligible = 0;
    for (const auto& [id, status] : final_statuses) {
        bool eligible = true;
        auto dit = dependencies.find(id);
        if (dit != dependencies.end()) {
            for (const auto& dep : dit->second) {
                auto sit = final_statuses.find(dep);
                GoalStatus dep_status =
                    sit == final_statuses.end() ? GoalStatus::not_mentioned : sit->second;
                bool satisfied = mode == EligibilityMode::strict
                                     ? dep_status == GoalStatus::completed
                                     : is_terminal(dep_status);
                if (!satisfied) {
                    eligible = false;
                    break;
                }
            }
        }
        if (!eligible) continue;
        if (status == GoalStatus::completed) {
            ++completed_eligible;
            ++decided_eligible;
        } else if (status == GoalStatus::failed) {
            ++decided_eligible;
        }
    }
    return Rational{completed_eligible, decided_eligible};
}

Rational naive_completion_rate(const std::map<std::string, GoalStatus>& final_statuses) {
    long long completed = 0;
    long long decided = 0;
    for (const auto& [id, status] : final_statuses) {
        if (status == GoalStatus::completed) {
            ++completed;
            ++decided;
        } else if (status == GoalStatus::failed) {
            ++decided;
        }
    }
    return Rational{completed, decided};
}

std::optional<double> ntc(const std::map<std::string, std::vector<StatusEvent>>& histories) {
    double total = 0.0;
    int completed = 0;
    for (const auto& [id, events] : histories) {
        int initiation = -1;
        int completion = -1;
        for (const auto& ev : events) {
            if (initiation < 0 &&
                (ev.new_status == GoalStatus::open || ev.new_status == GoalStatus::pending ||
                 ev.new_status == GoalStatus::completed))
                initiation = ev.turn_index;
            if (ev.new_status == GoalStatus::completed) {
                completion = ev.turn_index;
                break;
            }
        }
        if (completion < 0) continue;
        total += completion - initiation;
        ++completed;
    }
    if (completed == 0) return std::nullopt;
    return total / completed;
}

GoalAlignment align_goals(const std::vector<std::string>& predicted_core,
                          const std::vector<std::string>& gold_core,
                          const EmbeddingProvider* embedder, double tau_align) {
    GoalAlignment out;
    std::vector<bool> pred_used(predicted_core.size(), false);
    std::vector<bool> gold_used(gold_core.size(), false);

    std::vector<std::string> pred_norm(predicted_core.size());
    std::vector<std::string> gold_norm(gold_core.size());
    for (size_t i = 0; i < predicted_core.size(); ++i) pred_norm[i] = normalize_text(predicted_core[i]);
    for (size_t j = 0; j < gold_core.size(); ++j) gold_norm[j] = normalize_text(gold_core[j]);

    // Pass 1: exact matches, first-come order on both sides.
    for (size_t i = 0; i < pred_norm.size(); ++i) {
        for (size_t j = 0; j < gold_norm.size(); ++j) {
            if (gold_used[j] || pred_norm[i] != gold_norm[j]) continue;
            out.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            pred_used[i] = true;
            gold_used[j] = true;
            break;
        }
    }

    // Pass 2: embedding matches above threshold, best similarity first.
    if (embedder != nullptr) {
        struct Cand {
            double sim;
            int pred;
            int gold;
        };
        std::vector<std::vector<double>> pred_vecs(pred_norm.size());
        std::vector<std::vector<double>> gold_vecs(gold_norm.size());
        std::vector<Cand> cands;
        for (size_t i = 0; i < pred_norm.size(); ++i) {
            if (pred_used[i]) continue;
            pred_vecs[i] = embedder->embed(predicted_core[i]);
        }
        for (size_t j = 0; j < gold_norm.size(); ++j) {
            if (gold_used[j]) continue;
            gold_vecs[j] = embedder->embed(gold_core[j]);
        }
        for (size_t i = 0; i < pred_norm.size(); ++i) {
            if (pred_used[i]) continue;
            for (size_t j = 0; j < gold_norm.size(); ++j) {
                if (gold_used[j]) continue;
                double sim = cosine_similarity(pred_vecs[i], gold_vecs[j]);
                if (sim >= tau_align)
                    cands.push_back({sim, static_cast<int>(i), static_cast<int>(j)});
            }
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            if (a.pred != b.pred) return a.pred < b.pred;
            return a.gold < b.gold;
        });
        for (const auto& c : cands) {
            if (pred_used[c.pred] || gold_used[c.gold]) continue;
            out.pairs.emplace_back(c.pred, c.gold);
            pred_used[c.pred] = true;
            gold_used[c.gold] = true;
        }
    }

    std::stable_sort(out.pairs.begin(), out.pairs.end());
    for (size_t i = 0; i < pred_used.size(); ++i)
        if (!pred_used[i]) out.unmatched_predicted.push_back(static_cast<int>(i));
    for (size_t j = 0; j < gold_used.size(); ++j)
        if (!gold_used[j]) out.unmatched_gold.push_back(static_cast<int>(j));
    return out;
}

Prf detection_prf(const GoalAlignment& alignment, size_t predicted_count, size_t gold_count) {
    Prf out;
    if (predicted_count == 0 && gold_count == 0) {
        out.precision = out.recall = out.f1 = 1.0;
        return out;
    }
    double matched = static_cast<double>(alignment.pairs.size());
    out.precision = predicted_count == 0 ? 0.0 : matched / static_cast<double>(predicted_count);
    out.recall = gold_count == 0 ? 0.0 : matched / static_cast<double>(gold_count);
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

std::optional<double> status_tracking_acc(const GoalAlignment& alignment,
                                          const std::vector<GoalStatus>& predicted_statuses,
                                          const std::vector<GoalStatus>& gold_statuses) {
    if (alignment.pairs.empty()) return std::nullopt;
    int agree = 0;
    for (const auto& [p, g] : alignment.pairs) {
        if (predicted_statuses.at(static_cast<size_t>(p)) ==
            gold_statuses.at(static_cast<size_t>(g)))
            ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(alignment.pairs.size());
}

namespace {

// Snapshot whose exchange pair covers utterance turn t: pairs are 1-based and
// each spans two utterance turns, so the covering pair is ceil(t / 2).
const StoreSnapshot* snapshot_for_turn(const std::vector<StoreSnapshot>& snapshots, int turn_id) {
    int pair_index = (turn_id + 1) / 2;
    for (const auto& snap : snapshots)
        if (snap.pair_index == pair_index) return &snap;
    // Gold turn beyond the recorded pairs: fall back to the last snapshot.
    return snapshots.empty() ? nullptr : &snapshots.back();
}

// Id of the stored goal aligned to a gold core_content, or "".
std::string find_store_goal(const StoreSnapshot& snap, const std::string& gold_core,
                            const EmbeddingProvider* embedder, double tau_align) {
    std::string want = normalize_text(gold_core);
    for (const auto& id : snap.goal_ids)
        if (normalize_text(snap.core_contents.at(id)) == want) return id;
    if (embedder == nullptr) return {};
    auto gold_vec = embedder->embed(gold_core);
    std::string best;
    double best_sim = tau_align;
    for (const auto& id : snap.goal_ids) {
        double sim = cosine_similarity(embedder->embed(snap.core_contents.at(id)), gold_vec);
        if (sim > best_sim || (best.empty() && sim >= tau_align)) {
            best = id;
            best_sim = sim;
        }
    }
    return best;
}

}  // namespace

std::optional<double> memory_recall_accuracy(const std::vector<StoreSnapshot>& snapshots,
                                             const Dialogue& gold,
                                             const EmbeddingProvider* embedder, double tau_align,
                                             RecallBreakdown* breakdown) {
    RecallBreakdown local;
    RecallBreakdown& b = breakdown != nullptr ? *breakdown : local;
    b = RecallBreakdown{};

    std::map<std::string, const Goal*> gold_goals;
    for (const auto& g : gold.goal_list) gold_goals[g.id] = &g;

    // Status probes: each gold status-change turn asks "what was goal X's
    // status at turn t", answered from the snapshot covering t.
    for (const auto& turn : gold.turns) {
        for (const auto& change : turn.goal_status_changes) {
            auto git = gold_goals.find(change.goal_id);
            if (git == gold_goals.end()) continue;
            ++b.status_probes;
            const StoreSnapshot* snap = snapshot_for_turn(snapshots, turn.turn_id);
            if (snap == nullptr) continue;
            std::string id = find_store_goal(*snap, git->second->core_content, embedder,
                                             tau_align);
            if (id.empty()) continue;
            if (snap->statuses.at(id) == change.new_status) ++b.status_correct;
        }
    }

    // Slot probes: each annotated slot value asks "what is slot S of goal X",
    // answered from the final store state.
    const StoreSnapshot* final_snap = snapshots.empty() ? nullptr : &snapshots.back();
    for (const auto& g : gold.goal_list) {
        for (const auto& [slot, value] : g.slot_values) {
            ++b.slot_probes;
            if (final_snap == nullptr) continue;
            std::string id = find_store_goal(*final_snap, g.core_content, embedder, tau_align);
            if (id.empty()) continue;
            const auto& stored = final_snap->slot_values.at(id);
            auto vit = stored.find(slot);
            if (vit != stored.end() && normalize_text(vit->second) == normalize_text(value))
                ++b.slot_correct;
        }
    }

    if (b.total() == 0) return std::nullopt;
    return static_cast<double>(b.correct()) / static_cast<double>(b.total());
}

std::optional<double> proactivity_effectiveness(const std::vector<TransitionRecord>& transitions,
                                                const DualStore& store, JudgeGateway* judge,
                                                int* candidate_count) {
    int candidates = 0;
    int scored = 0;
    int appropriate = 0;
    for (const auto& tr : transitions) {
        bool proactive = tr.origin == TransitionOrigin::audit ||
                         (tr.origin != TransitionOrigin::extraction && !tr.user_mentioned_goal);
        if (!proactive) continue;
        ++candidates;
        if (judge == nullptr) continue;
        std::string content = store.contains(tr.goal_id) ? store.get(tr.goal_id).content : tr.goal_id;
        JudgeRequest req;
        req.template_id = TemplateId::score_quality;
        req.variables = {
            {"criterion",
             "Was it appropriate to move this goal from " + std::string(to_string(tr.from)) +
                 " to " + std::string(to_string(tr.to)) +
                 " without the user explicitly asking? Score 1 if appropriate, 0 if not."},
            {"scale", "0 or 1"},
            {"content", content},
        };
        try {
            JudgeResponse resp = judge->dispatch(req);
            ++scored;
            if (resp.parsed.at("score").get<double>() >= 0.5) ++appropriate;
        } catch (const Error&) {
            // Judge failures are isolated per event: the candidate stays
            // counted but contributes no score.
        }
    }
    if (candidate_count != nullptr) *candidate_count = candidates;
    if (scored == 0) return std::nullopt;
    return static_cast<double>(appropriate) / static_cast<double>(scored);
}

QualityScores quality_scores(const Dialogue& d, JudgeGateway* judge) {
    QualityScores out;
    if (judge == nullptr) return out;
    auto pairs = group_into_pairs(d.turns);
    if (!pairs.empty()) {
        // Any judge failure marks the metric unavailable; the run continues.
        try {
            int relevant = 0;
            for (const auto& pair : pairs) {
                JudgeRequest req;
                req.template_id = TemplateId::score_quality;
                req.variables = {
                    {"criterion",
                     "Is the system response relevant and helpful for the user request? "
                     "Score 1 for yes, 0 for no."},
                    {"scale", "0 or 1"},
                    {"content",
                     "USER: " + pair.user_utterance + "\nSYSTEM: " + pair.system_response},
                };
                JudgeResponse resp = judge->dispatch(req);
                if (resp.parsed.at("score").get<double>() >= 0.5) ++relevant;
            }
            out.turn_quality = static_cast<double>(relevant) / static_cast<double>(pairs.size());
        } catch (const Error&) {
            out.turn_quality = std::nullopt;
        }
    }
    std::string transcript;
    for (const auto& turn : d.turns) {
        transcript += turn.speaker == Speaker::user ? "USER: " : "SYSTEM: ";
        transcript += turn.utterance;
        transcript += '\n';
    }
    JudgeRequest req;
    req.template_id = TemplateId::score_quality;
    req.variables = {
        {"criterion", "Rate the overall coherence of this dialogue."},
        {"scale", "1 to 5"},
        {"content", transcript},
    };
    try {
        JudgeResponse resp = judge->dispatch(req);
        out.dialogue_quality = resp.parsed.at("score").get<double>();
    } catch (const Error&) {
        out.dialogue_quality = std::nullopt;
    }
    return out;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<size_t> order(values.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        // Ranks are 1-based; ties share the average of their rank span.
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    return pearson(average_ranks(x), average_ranks(y));
}

std::vector<CorrelationRow> correlations(
    const std::vector<std::pair<std::string, std::vector<std::optional<double>>>>& series,
    const std::vector<std::optional<double>>& target) {
    std::vector<CorrelationRow> out;
    for (const auto& [name, values] : series) {
        CorrelationRow row;
        row.metric = name;
        std::vector<double> xs;
        std::vector<double> ys;
        size_t n = std::min(values.size(), target.size());
        for (size_t i = 0; i < n; ++i) {
            if (!values[i].has_value() || !target[i].has_value()) continue;
            xs.push_back(*values[i]);
            ys.push_back(*target[i]);
        }
        row.n = static_cast<int>(xs.size());
        if (row.n >= 3) {
            row.pearson_r = pearson(xs, ys);
            row.spearman_rho = spearman(xs, ys);
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<EfficiencyRow> efficiency_report(const CallLedger& ledger,
                                             const std::map<std::string, std::string>& classes) {
    struct TurnKey {
        std::string dialogue_id;
        int turn_index;
        bool operator<(const TurnKey& o) const {
            if (dialogue_id != o.dialogue_id) return dialogue_id < o.dialogue_id;
            return turn_index < o.turn_index;
        }
    };
    struct TurnAgg {
        double latency = 0.0;
        long long input_tokens = 0;
        long long output_tokens = 0;
    };
    std::map<TurnKey, TurnAgg> turns;
    for (const auto& entry : ledger.entries()) {
        TurnAgg& agg = turns[{entry.dialogue_id, entry.turn_index}];
        agg.latency += entry.latency_ms;
        agg.input_tokens += entry.input_tokens;
        agg.output_tokens += entry.output_tokens;
    }
    if (turns.empty()) return {};

    struct ClassAgg {
        int count = 0;
        double latency_sum = 0.0;
        double latency_min = 0.0;
        double latency_max = 0.0;
        long long input_sum = 0;
        long long output_sum = 0;

        void add(const TurnAgg& t) {
            if (count == 0) {
                latency_min = latency_max = t.latency;
            } else {
                latency_min = std::min(latency_min, t.latency);
                latency_max = std::max(latency_max, t.latency);
            }
            ++count;
            latency_sum += t.latency;
            input_sum += t.input_tokens;
            output_sum += t.output_tokens;
        }
    };
    std::map<std::string, ClassAgg> by_class;
    ClassAgg all;
    for (const auto& [key, agg] : turns) {
        all.add(agg);
        auto cit = classes.find(key.dialogue_id);
        if (cit != classes.end()) by_class[cit->second].add(agg);
    }

    auto to_row = [](const std::string& name, const ClassAgg& agg) {
        EfficiencyRow row;
        row.complexity = name;
        row.turn_count = agg.count;
        row.latency_mean = agg.latency_sum / agg.count;
        row.latency_min = agg.latency_min;
        row.latency_max = agg.latency_max;
        row.input_tokens_mean = static_cast<double>(agg.input_sum) / agg.count;
        row.output_tokens_mean = static_cast<double>(agg.output_sum) / agg.count;
        return row;
    };
    std::vector<EfficiencyRow> out;
    for (const char* name : {"medium", "complex"}) {
        auto it = by_class.find(name);
        if (it != by_class.end()) out.push_back(to_row(name, it->second));
    }
    out.push_back(to_row("all", all));
    return out;
}

}  // namespace dialeval
