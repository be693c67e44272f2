#include "dialeval/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dialeval/errors.hpp"
#include "dialeval/rng.hpp"

namespace dialeval {

namespace {

std::string zero4(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", n);
    return buf;
}

void require_acyclic_goals(const std::vector<Goal>& goals) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& g : goals) indegree.try_emplace(g.id, 0);
    for (const auto& g : goals) {
        for (const auto& dep : g.dependencies) {
            ++indegree[g.id];
            dependents[dep].push_back(g.id);
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

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCategory::data, "cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string iso_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

ojson generation_config_to_json(const GenerationConfig& cfg) {
    const ComplexityCriteria& c = cfg.criteria;
    ojson j = ojson::object();
    j["total_dialogues"] = cfg.total_dialogues;
    if (cfg.medium_quota) j["medium_quota"] = *cfg.medium_quota;
    if (cfg.complex_quota) j["complex_quota"] = *cfg.complex_quota;
    j["medium_ratio"] = c.medium_ratio;
    j["complex_ratio"] = c.complex_ratio;
    j["draw_medium_goals"] = {c.draw_medium_goals_min, c.draw_medium_goals_max};
    j["draw_medium_turns"] = {c.draw_medium_turns_min, c.draw_medium_turns_max};
    j["draw_complex_goals"] = {c.draw_complex_goals_min, c.draw_complex_goals_max};
    j["draw_complex_turns"] = {c.draw_complex_turns_min, c.draw_complex_turns_max};
    j["medium_goals"] = {c.medium_goals_min, c.medium_goals_max};
    j["medium_turns"] = {c.medium_turns_min, c.medium_turns_max};
    j["medium_max_dependencies"] = c.medium_max_dependencies;
    j["complex_goals_min"] = c.complex_goals_min;
    j["complex_turns_min"] = c.complex_turns_min;
    j["complex_min_dependencies"] = c.complex_min_dependencies;
    j["seed"] = cfg.seed;
    j["qc_max_rounds"] = cfg.qc_max_rounds;
    j["qc_failure_tolerance"] = cfg.qc_failure_tolerance;
    j["id_prefix"] = cfg.id_prefix;
    return j;
}

std::string generation_config_hash(const GenerationConfig& cfg) {
    uint64_t h = fnv1a64(generation_config_to_json(cfg).dump());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ojson manifest_to_json(const DatasetManifest& m) {
    ojson j = ojson::object();
    j["counts"] = {{"medium", m.medium_count}, {"complex", m.complex_count}};
    j["dialogue_ids"] = m.dialogue_ids;
    j["files"] = m.files;
    j["generated_at"] = m.generated_at.empty() ? ojson(nullptr) : ojson(m.generated_at);
    j["config_hash"] = m.config_hash;
    j["qc"] = {{"pass", m.qc_pass_count}, {"fail", m.qc_fail_count}};
    j["discarded"] = m.discarded_count;
    j["attempts"] = m.attempts;
    j["notes"] = m.notes;
    return j;
}

Trajectory annotate_trajectory(const std::vector<std::string>& goals, JudgeGateway& judge,
                               const AnnotateOptions& opts) {
    if (goals.empty())
        throw Error(ErrorCategory::usage, "annotate_trajectory: empty goal set");

    std::string goal_lines;
    for (const auto& g : goals) {
        goal_lines += "- ";
        goal_lines += g;
        goal_lines += '\n';
    }
    if (!goal_lines.empty()) goal_lines.pop_back();

    JudgeRequest produce;
    produce.template_id = TemplateId::annotate_trajectory;
    produce.variables = {
        {"num_goals", std::to_string(goals.size())},
        {"goals", goal_lines},
    };
    JudgeRequest check;
    check.template_id = TemplateId::qc_trajectory;
    check.variables = {
        {"num_goals", std::to_string(goals.size())},
        {"complexity", opts.qc_complexity ? std::string(to_string(*opts.qc_complexity))
                                          : std::string("unclassified")},
        {"goals_text", kProducedSentinel},
    };
    JudgeResponse resp = judge.run_with_qc(produce, check, opts.qc_max_rounds);

    Trajectory t;
    t.dialogue_id = opts.dialogue_id;
    for (const auto& gj : resp.parsed["goal_list"]) {
        if (!gj.is_object()) throw SchemaError("annotation goal_list entry is not an object");
        Goal g = goal_from_json(gj);
        if (g.id.empty()) g.id = "g" + std::to_string(t.goal_list.size() + 1);
        // Trajectories are pre-dialogue state.
        g.status = GoalStatus::not_mentioned;
        g.status_history.clear();
        if (!g.dependencies.empty()) g.dependency_label = true;
        t.goal_list.push_back(std::move(g));
    }
    if (t.goal_list.empty()) throw SchemaError("annotation produced no goals");

    std::set<std::string> ids;
    for (const auto& g : t.goal_list)
        if (!ids.insert(g.id).second) throw SchemaError("duplicate goal id '" + g.id + "'");
    for (const auto& g : t.goal_list) {
        for (const auto& dep : g.dependencies) {
            if (dep == g.id) throw SchemaError("goal '" + g.id + "' depends on itself");
            if (!ids.count(dep))
                throw SchemaError("goal '" + g.id + "' depends on unknown id '" + dep + "'");
        }
    }
    require_acyclic_goals(t.goal_list);

    std::set<std::string> sampled(goals.begin(), goals.end());
    std::set<std::string> annotated;
    for (const auto& g : t.goal_list) annotated.insert(g.domain + "." + g.intent);
    if (annotated != sampled) {
        std::string detail = "annotation goal set does not match the sampled set; got {";
        for (const auto& k : annotated) detail += k + " ";
        detail += "} want {";
        for (const auto& k : sampled) detail += k + " ";
        detail += "}";
        throw SchemaError(detail);
    }

    t.metadata.num_goals = static_cast<int>(t.goal_list.size());
    if (opts.estimated_turns > 0) t.metadata.estimated_turns = opts.estimated_turns;
    if (resp.parsed.contains("metadata") && resp.parsed["metadata"].is_object()) {
        const ojson& m = resp.parsed["metadata"];
        t.metadata.async_execution = m.value("async_execution", false);
        t.metadata.interleaving = m.value("interleaving", false);
        t.metadata.proactivity = m.value("proactivity", false);
    }

    ComplexityDecision decision = classify_complexity(t, &judge, opts.criteria);
    t.complexity_class = decision.complexity;
    for (auto& g : t.goal_list) g.classification_method = to_string(decision.method);
    return t;
}

std::vector<Turn> parse_transcript(const std::string& raw) {
    std::vector<Turn> turns;
    size_t pos = 0;
    int line_no = 0;
    while (pos <= raw.size()) {
        size_t end = raw.find('\n', pos);
        std::string line = raw.substr(pos, end == std::string::npos ? std::string::npos
                                                                    : end - pos);
        pos = end == std::string::npos ? raw.size() + 1 : end + 1;
        ++line_no;

        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        Speaker speaker;
        size_t skip;
        if (line.rfind("USER:", 0) == 0) {
            speaker = Speaker::user;
            skip = 5;
        } else if (line.rfind("SYSTEM:", 0) == 0) {
            speaker = Speaker::system;
            skip = 7;
        } else {
            throw MalformedTranscriptError("line " + std::to_string(line_no) +
                                           " has no USER:/SYSTEM: label: '" + line + "'");
        }
        if (turns.empty() && speaker != Speaker::user)
            throw MalformedTranscriptError("transcript must start with USER");
        if (!turns.empty() && turns.back().speaker == speaker)
            throw MalformedTranscriptError("consecutive " +
                                           std::string(to_string(speaker)) + " turns at line " +
                                           std::to_string(line_no));
        Turn t;
        t.turn_id = static_cast<int>(turns.size()) + 1;
        t.speaker = speaker;
        size_t ub = line.find_first_not_of(" \t", skip);
        t.utterance = ub == std::string::npos ? "" : line.substr(ub);
        turns.push_back(std::move(t));
    }
    if (turns.empty()) throw MalformedTranscriptError("transcript has no labeled turns");
    return turns;
}

std::vector<Turn> generate_dialogue_turns(const Trajectory& t, JudgeGateway& judge,
                                          const ComplexityCriteria& criteria,
                                          std::vector<std::string>* diagnostics,
                                          int max_retries) {
    bool medium = t.complexity_class == ComplexityClass::medium;
    int fallback_turns = medium
                             ? (criteria.draw_medium_turns_min + criteria.draw_medium_turns_max) / 2
                             : (criteria.draw_complex_turns_min + criteria.draw_complex_turns_max) / 2;
    int estimated = t.metadata.estimated_turns.value_or(fallback_turns);

    std::string goal_descriptions;
    std::string combined_guidance;
    for (const auto& g : t.goal_list) {
        if (!goal_descriptions.empty()) goal_descriptions += "; ";
        goal_descriptions += g.id + ": " + g.content;
        for (const auto& dep : g.dependencies)
            combined_guidance += dep + " must finish before " + g.id + " can start.\n";
    }
    if (combined_guidance.empty())
        combined_guidance = "Goals are independent; order them naturally.";

    std::string attrs;
    if (t.metadata.async_execution) attrs += "async_execution, ";
    if (t.metadata.interleaving) attrs += "interleaving, ";
    if (t.metadata.proactivity) attrs += "proactivity, ";
    if (attrs.empty())
        attrs = "none";
    else
        attrs.resize(attrs.size() - 2);

    JudgeRequest req;
    req.template_id = TemplateId::generate_dialogue;
    req.variables = {
        {"complexity", std::string(to_string(t.complexity_class))},
        {"estimated_turns", std::to_string(estimated)},
        {"goal_descriptions", goal_descriptions},
        {"agentic_attrs", attrs},
        {"combined_guidance", combined_guidance},
        {"outcome_guidance",
         "Goals may complete, fail, or be abandoned as the conversation develops."},
    };

    std::vector<Turn> turns;
    for (int attempt = 0;; ++attempt) {
        JudgeResponse resp = judge.dispatch(req);
        try {
            turns = parse_transcript(resp.raw_text);
            break;
        } catch (const MalformedTranscriptError& e) {
            if (attempt >= max_retries)
                throw MalformedTranscriptError(std::string(e.what()) + " (after " +
                                               std::to_string(attempt + 1) + " attempts)");
        }
    }

    int n = static_cast<int>(turns.size());
    bool in_range = medium ? (n >= criteria.medium_turns_min && n <= criteria.medium_turns_max)
                           : n >= criteria.complex_turns_min;
    if (!in_range && diagnostics != nullptr)
        diagnostics->push_back(t.dialogue_id + ": " + std::to_string(n) +
                               " turns outside the " +
                               std::string(to_string(t.complexity_class)) + " range");
    return turns;
}

Dialogue annotate_status(const Trajectory& t, const std::vector<Turn>& turns,
                         JudgeGateway& judge, std::vector<std::string>* diagnostics) {
    std::vector<Goal> goals = t.goal_list;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < goals.size(); ++i) {
        goals[i].status = GoalStatus::not_mentioned;
        goals[i].status_history.clear();
        index[goals[i].id] = i;
    }

    Dialogue d;
    d.dialogue_id = t.dialogue_id;
    d.complexity_class = t.complexity_class;
    d.metadata = t.metadata;
    d.turns = turns;

    for (auto& turn : d.turns) {
        judge.set_context(d.dialogue_id, turn.turn_id);
        turn.goal_status_changes.clear();

        std::string descriptions;
        std::string terminals;
        ojson status_template = ojson::object();
        for (const auto& g : goals) {
            descriptions += g.id + " (" + g.core_content + "): " + g.content +
                            " [current: " + std::string(to_string(g.status)) + "]\n";
            if (is_terminal(g.status))
                terminals += g.id + ": " + std::string(to_string(g.status)) + "\n";
            status_template[g.id] = std::string(to_string(g.status));
        }
        if (terminals.empty()) terminals = "(none)\n";

        JudgeRequest req;
        req.template_id = TemplateId::annotate_status;
        req.variables = {
            {"last_turn", std::string(to_string(turn.speaker)) + ": " + turn.utterance},
            {"goal_descriptions", descriptions},
            {"terminal_states", terminals},
            {"json_template", status_template.dump()},
        };
        JudgeResponse resp = judge.dispatch(req);

        for (auto it = resp.parsed.begin(); it != resp.parsed.end(); ++it) {
            if (!index.count(it.key())) {
                if (diagnostics != nullptr)
                    diagnostics->push_back(d.dialogue_id + " turn " +
                                           std::to_string(turn.turn_id) +
                                           ": judge referenced unknown goal '" + it.key() + "'");
            }
        }
        for (auto& g : goals) {
            if (!resp.parsed.contains(g.id)) continue;  // missing = unchanged
            GoalStatus target = parse_goal_status(resp.parsed[g.id].get<std::string>());
            TransitionKind kind = classify_transition(g.status, target);
            if (kind == TransitionKind::no_change) continue;
            if (kind == TransitionKind::illegal) {
                if (diagnostics != nullptr)
                    diagnostics->push_back(
                        d.dialogue_id + " turn " + std::to_string(turn.turn_id) + ": rejected " +
                        g.id + " " + std::string(to_string(g.status)) + " -> " +
                        std::string(to_string(target)) + ", prior status retained");
                continue;
            }
            g = apply_status_change(std::move(g), turn.turn_id, target);
            turn.goal_status_changes.push_back({g.id, target});
        }

        turn.all_goals.clear();
        for (const auto& g : goals) turn.all_goals[g.id] = g.status;
    }

    d.goal_list = goals;
    d.metadata.num_turns = static_cast<int>(d.turns.size());
    d.metadata.num_goals = static_cast<int>(d.goal_list.size());
    replay_dialogue(d);  // every emitted dialogue must replay cleanly
    return d;
}

DatasetManifest run_pipeline(const CooccurrenceGraph& g, const GenerationConfig& cfg,
                             JudgeGateway& judge) {
    const ComplexityCriteria& criteria = cfg.criteria;
    int medium_quota;
    int complex_quota;
    if (cfg.medium_quota || cfg.complex_quota) {
        medium_quota = cfg.medium_quota.value_or(0);
        complex_quota = cfg.complex_quota.value_or(0);
    } else {
        double ratio_sum = criteria.medium_ratio + criteria.complex_ratio;
        medium_quota = static_cast<int>(
            std::llround(cfg.total_dialogues * criteria.medium_ratio / ratio_sum));
        complex_quota = cfg.total_dialogues - medium_quota;
    }
    int total = medium_quota + complex_quota;
    if (total < 0 || medium_quota < 0 || complex_quota < 0)
        throw Error(ErrorCategory::usage, "run_pipeline: negative dialogue quota");

    std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.config_hash = generation_config_hash(cfg);
    if (cfg.emit_timestamp) manifest.generated_at = iso_utc_now();
    if (total == 0) {
        atomic_write(out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
        return manifest;
    }

    int max_attempts = 20 * total;
    int attempt = 0;
    while (manifest.medium_count < medium_quota || manifest.complex_count < complex_quota) {
        if (attempt >= max_attempts) throw UnsatisfiableError(total, max_attempts);
        std::mt19937_64 rng(substream_seed(cfg.seed, static_cast<uint64_t>(attempt)));
        ++attempt;

        bool medium_open = manifest.medium_count < medium_quota;
        bool complex_open = manifest.complex_count < complex_quota;
        bool target_medium;
        if (medium_open && complex_open) {
            double medium_share =
                criteria.medium_ratio / (criteria.medium_ratio + criteria.complex_ratio);
            target_medium = draw_unit(rng) < medium_share;
        } else {
            target_medium = medium_open;
        }
        int goals_n = target_medium
                          ? draw_int(rng, criteria.draw_medium_goals_min,
                                     criteria.draw_medium_goals_max)
                          : draw_int(rng, criteria.draw_complex_goals_min,
                                     criteria.draw_complex_goals_max);
        int turns_n = target_medium
                          ? draw_int(rng, criteria.draw_medium_turns_min,
                                     criteria.draw_medium_turns_max)
                          : draw_int(rng, criteria.draw_complex_turns_min,
                                     criteria.draw_complex_turns_max);
        uint64_t walk_seed = rng();

        std::string id = cfg.id_prefix + "_" +
                         zero4(manifest.medium_count + manifest.complex_count + 1);
        judge.set_context(id, 0);

        SampleResult sample;
        try {
            sample = sample_trajectory(g, goals_n, walk_seed);
        } catch (const UnsatisfiableError&) {
            manifest.notes.push_back(id + ": walk could not gather " +
                                     std::to_string(goals_n) + " goals, resampling");
            continue;
        }

        Trajectory trajectory;
        AnnotateOptions opts;
        opts.estimated_turns = turns_n;
        opts.qc_complexity = target_medium ? ComplexityClass::medium : ComplexityClass::complex_;
        opts.qc_max_rounds = cfg.qc_max_rounds;
        opts.criteria = criteria;
        opts.dialogue_id = id;
        try {
            trajectory = annotate_trajectory(sample.goals, judge, opts);
        } catch (const QcExhaustedError&) {
            ++manifest.qc_fail_count;
            manifest.notes.push_back(id + ": trajectory rejected by quality control, resampling");
            continue;
        } catch (const Error& e) {
            throw Error(e.category(), id + ": " + e.what());
        }

        bool is_medium = trajectory.complexity_class == ComplexityClass::medium;
        if ((is_medium && !medium_open) || (!is_medium && !complex_open)) {
            ++manifest.discarded_count;
            manifest.notes.push_back(id + ": classified " +
                                     std::string(to_string(trajectory.complexity_class)) +
                                     " but that quota is met, discarding");
            continue;
        }

        Dialogue dialogue;
        try {
            auto turns = generate_dialogue_turns(trajectory, judge, criteria, &manifest.notes);
            dialogue = annotate_status(trajectory, turns, judge, &manifest.notes);
        } catch (const Error& e) {
            throw Error(e.category(), id + ": " + e.what());
        }

        std::string filename = id + ".json";
        atomic_write(out_dir / filename, dialogue_to_json(dialogue).dump(2) + "\n");
        manifest.dialogue_ids.push_back(id);
        manifest.files.push_back(filename);
        ++manifest.qc_pass_count;
        if (is_medium)
            ++manifest.medium_count;
        else
            ++manifest.complex_count;
    }

    manifest.attempts = attempt;
    atomic_write(out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    return manifest;
}

}  // namespace dialeval
