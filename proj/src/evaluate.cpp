#include "dialeval/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dialeval/errors.hpp"

namespace dialeval {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> series_names() {
    return {"ntc_mean", "memory_recall_acc", "proactivity_effectiveness", "turn_quality",
            "dialogue_quality"};
}

std::optional<double> series_value(const MetricReport& r, const std::string& name) {
    if (name == "ntc_mean") return r.ntc_mean;
    if (name == "memory_recall_acc") return r.memory_recall_acc;
    if (name == "proactivity_effectiveness") return r.proactivity;
    if (name == "turn_quality") return r.turn_quality;
    if (name == "dialogue_quality") return r.dialogue_quality;
    return std::nullopt;
}

std::vector<CorrelationRow> class_correlations(const std::vector<MetricReport>& reports,
                                               const std::string& complexity) {
    std::vector<std::optional<double>> target;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> series;
    for (const auto& name : series_names()) series.emplace_back(name, std::vector<std::optional<double>>{});
    for (const auto& r : reports) {
        if (r.complexity != complexity) continue;
        target.push_back(r.dgcr_value.defined() ? std::optional<double>(r.dgcr_value.value())
                                                : std::nullopt);
        for (auto& [name, values] : series) values.push_back(series_value(r, name));
    }
    return correlations(series, target);
}

// Gold statuses after folding every status change up to and including turn_id.
std::map<std::string, GoalStatus> gold_state_at(const Dialogue& d, int turn_id) {
    std::map<std::string, GoalStatus> state;
    for (const auto& g : d.goal_list) state[g.id] = GoalStatus::not_mentioned;
    for (const auto& turn : d.turns) {
        if (turn.turn_id > turn_id) break;
        for (const auto& change : turn.goal_status_changes) state[change.goal_id] = change.new_status;
    }
    return state;
}

// Latest snapshot whose exchange pair is complete at utterance turn_id.
const StoreSnapshot* snapshot_covering(const std::vector<StoreSnapshot>& snapshots, int turn_id) {
    int pair = (turn_id + 1) / 2;
    const StoreSnapshot* best = nullptr;
    for (const auto& s : snapshots)
        if (s.pair_index <= pair && (best == nullptr || s.pair_index > best->pair_index))
            best = &s;
    return best;
}

struct CheckpointEval {
    Prf prf;
    std::optional<double> status_acc;
};

CheckpointEval eval_at_turn(const Dialogue& gold, const std::vector<StoreSnapshot>& snapshots,
                            const EmbeddingProvider& embedder, double tau_align, int turn_id) {
    auto state = gold_state_at(gold, turn_id);
    std::vector<std::string> gold_cores;
    std::vector<GoalStatus> gold_statuses;
    for (const auto& g : gold.goal_list) {
        GoalStatus s = state.at(g.id);
        if (s == GoalStatus::not_mentioned) continue;  // not yet detectable
        gold_cores.push_back(g.core_content);
        gold_statuses.push_back(s);
    }
    std::vector<std::string> pred_cores;
    std::vector<GoalStatus> pred_statuses;
    if (const StoreSnapshot* snap = snapshot_covering(snapshots, turn_id); snap != nullptr) {
        for (const auto& id : snap->goal_ids) {
            pred_cores.push_back(snap->core_contents.at(id));
            pred_statuses.push_back(snap->statuses.at(id));
        }
    }
    GoalAlignment alignment = align_goals(pred_cores, gold_cores, &embedder, tau_align);
    CheckpointEval out;
    out.prf = detection_prf(alignment, pred_cores.size(), gold_cores.size());
    out.status_acc = status_tracking_acc(alignment, pred_statuses, gold_statuses);
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::data, "cannot write " + path.string());
    out << content;
}

ojson transitions_to_json(const std::vector<TransitionRecord>& transitions) {
    ojson arr = ojson::array();
    for (const auto& tr : transitions) {
        arr.push_back({{"goal_id", tr.goal_id},
                       {"from", std::string(to_string(tr.from))},
                       {"to", std::string(to_string(tr.to))},
                       {"turn_index", tr.turn_index},
                       {"origin", std::string(to_string(tr.origin))},
                       {"user_mentioned_goal", tr.user_mentioned_goal}});
    }
    return arr;
}

}  // namespace

std::vector<std::string> discover_dataset_files(const std::string& path) {
    fs::path p(path);
    if (fs::is_regular_file(p)) return {p.string()};
    if (!fs::is_directory(p)) throw MissingFileError(path);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(p)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() != ".json") continue;
        if (entry.path().filename() == "manifest.json") continue;
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

MetricReport evaluate_dialogue(const Dialogue& gold, const ProcessResult& result,
                               JudgeGateway& judge, const EmbeddingProvider& embedder,
                               const RunConfig& cfg) {
    MetricReport rep;
    rep.dialogue_id = gold.dialogue_id;
    rep.complexity = to_string(gold.complexity_class);
    rep.turn_count = static_cast<int>(gold.turns.size());
    rep.diagnostics = result.diagnostics;

    // Task success metrics over the predicted store state.
    std::map<std::string, GoalStatus> statuses;
    std::map<std::string, std::vector<std::string>> dependencies;
    std::map<std::string, std::vector<StatusEvent>> histories;
    for (const auto& id : result.store.insertion_order()) {
        const MemoryGoal& mg = result.store.get(id);
        statuses[id] = mg.status;
        dependencies[id] = result.store.dependencies_of(id);
        histories[id] = mg.status_history;
    }
    rep.dgcr_value = dgcr(statuses, dependencies, eligibility_mode(cfg));
    rep.naive_rate = naive_completion_rate(statuses);
    rep.ntc_mean = ntc(histories);

    rep.memory_recall_acc = memory_recall_accuracy(result.snapshots, gold, &embedder,
                                                   cfg.tau_align, &rep.recall_breakdown);
    rep.proactivity = proactivity_effectiveness(result.transitions, result.store, &judge,
                                                &rep.proactive_candidates);

    // Online curve at 10% progress steps; the 100% checkpoint doubles as the
    // final-state detection and status-tracking numbers.
    int total_turns = static_cast<int>(gold.turns.size());
    for (int p = 10; p <= 100; p += 10) {
        int turn_id = total_turns == 0 ? 0 : (p * total_turns + 99) / 100;
        CheckpointEval cp = eval_at_turn(gold, result.snapshots, embedder, cfg.tau_align, turn_id);
        OnlineCheckpoint point;
        point.progress_percent = p;
        point.detection_f1 = cp.prf.f1;
        point.status_acc = cp.status_acc;
        rep.online_curve.push_back(point);
        if (p == 100) {
            rep.detection = cp.prf;
            rep.status_tracking = cp.status_acc;
        }
    }

    QualityScores quality = quality_scores(gold, &judge);
    rep.turn_quality = quality.turn_quality;
    rep.dialogue_quality = quality.dialogue_quality;
    return rep;
}

EvaluationSummary run_evaluation(const std::string& dataset_path, const RunConfig& cfg) {
    std::vector<std::string> files = discover_dataset_files(dataset_path);

    std::unique_ptr<JudgeBackend> prototype = make_backend(cfg);
    HashedBagEmbedder embedder(cfg.embedding_dim);
    eligibility_mode(cfg);  // validate early: a bad mode is a usage error

    struct Slot {
        bool ok = false;
        std::string dialogue_id;
        MetricReport report;
        ojson store_json;
        std::vector<LedgerEntry> ledger_entries;
        ErrorCategory fail_category = ErrorCategory::data;
        std::string fail_message;
    };
    std::vector<Slot> slots(files.size());
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) {
            Slot& slot = slots[i];
            slot.dialogue_id = fs::path(files[i]).stem().string();
            try {
                std::ifstream in(files[i]);
                if (!in) throw MissingFileError(files[i]);
                ojson j;
                try {
                    j = ojson::parse(in);
                } catch (const ojson::parse_error& e) {
                    throw SchemaError(files[i] + ": " + e.what());
                }
                Dialogue gold = dialogue_from_json(j);
                if (!gold.dialogue_id.empty()) slot.dialogue_id = gold.dialogue_id;
                replay_dialogue(gold);  // gold must be internally coherent

                CallLedger ledger;
                JudgeGateway gateway(prototype->clone(), &ledger);
                MemoryPipeline pipeline(&gateway, &embedder, pipeline_config(cfg));
                ProcessResult result = pipeline.process_dialogue(gold.dialogue_id, gold.turns);

                gateway.set_context(gold.dialogue_id, 0);
                MetricReport report = evaluate_dialogue(gold, result, gateway, embedder, cfg);
                for (const auto& entry : ledger.entries()) {
                    report.latency_total_ms += entry.latency_ms;
                    report.input_tokens += entry.input_tokens;
                    report.output_tokens += entry.output_tokens;
                }
                report.judge_calls = static_cast<int>(ledger.size());

                ojson store_json = ojson::object();
                store_json["dialogue_id"] = gold.dialogue_id;
                store_json["store"] = result.store.to_json();
                ojson snaps = ojson::array();
                for (const auto& s : result.snapshots) snaps.push_back(snapshot_to_json(s));
                store_json["snapshots"] = snaps;
                store_json["transitions"] = transitions_to_json(result.transitions);
                store_json["match_count"] = result.match_count;
                store_json["insert_count"] = result.insert_count;
                store_json["relation_judge_calls"] = result.relation_judge_calls;
                store_json["audit_runs"] = result.audit_runs;
                store_json["diagnostics"] = result.diagnostics;

                slot.report = std::move(report);
                slot.store_json = std::move(store_json);
                slot.ledger_entries = ledger.entries();
                slot.ok = true;
            } catch (const Error& e) {
                slot.fail_category = e.category();
                slot.fail_message = e.what();
            } catch (const std::exception& e) {
                slot.fail_category = ErrorCategory::data;
                slot.fail_message = e.what();
            }
        }
    };

    int worker_count = std::max(1, cfg.workers);
    if (worker_count == 1 || files.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(worker_count));
        for (int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    EvaluationSummary summary;
    summary.total = static_cast<int>(files.size());
    CallLedger run_ledger;
    std::map<std::string, std::string> classes;
    for (const auto& slot : slots) {
        if (slot.ok) {
            ++summary.succeeded;
            summary.reports.push_back(slot.report);
            classes[slot.dialogue_id] = slot.report.complexity;
        } else {
            summary.failures.push_back({slot.dialogue_id, slot.fail_category, slot.fail_message});
        }
        for (const auto& entry : slot.ledger_entries) run_ledger.append(entry);
    }
    summary.efficiency = efficiency_report(run_ledger, classes);
    summary.medium_correlations = class_correlations(summary.reports, "medium");
    summary.complex_correlations = class_correlations(summary.reports, "complex");

    fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir / "reports");
    fs::create_directories(out_dir / "stores");
    for (const auto& slot : slots) {
        if (!slot.ok) continue;
        write_text(out_dir / "reports" / (slot.dialogue_id + ".json"),
                   metric_report_to_json(slot.report).dump(2) + "\n");
        write_text(out_dir / "stores" / (slot.dialogue_id + ".json"),
                   slot.store_json.dump(2) + "\n");
    }
    write_text(out_dir / "aggregate.csv", aggregate_csv(summary.reports));
    write_text(out_dir / "online_curve.csv", online_curve_csv(summary.reports));
    write_text(out_dir / "correlations.csv",
               correlations_csv(summary.medium_correlations, summary.complex_correlations));
    write_text(out_dir / "efficiency.csv", efficiency_csv(summary.efficiency));
    write_text(out_dir / "comparison.csv", comparison_csv(summary.reports));
    write_text(out_dir / "ledger.json", run_ledger.to_json().dump(2) + "\n");
    write_text(out_dir / "config_snapshot.json", config_snapshot(cfg).dump(2) + "\n");

    ojson summary_json = ojson::object();
    summary_json["total"] = summary.total;
    summary_json["succeeded"] = summary.succeeded;
    ojson failures = ojson::array();
    for (const auto& f : summary.failures) {
        failures.push_back({{"dialogue_id", f.dialogue_id},
                            {"category", static_cast<int>(f.category)},
                            {"message", f.message}});
    }
    summary_json["failures"] = failures;
    write_text(out_dir / "summary.json", summary_json.dump(2) + "\n");

    return summary;
}

}  // namespace dialeval
