#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dialeval/embedding.hpp"
#include "dialeval/errors.hpp"
#include "dialeval/memory.hpp"

using namespace dialeval;

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n2 = 0;
    for (double x : v) n2 += x * x;
    double n = std::sqrt(n2);
    if (n > 0)
        for (double& x : v) x /= n;
    return v;
}

MemoryGoal mem_goal(const std::string& content, const std::string& core,
                    GoalStatus status = GoalStatus::open) {
    MemoryGoal g;
    g.content = content;
    g.core_content = core;
    g.status = status;
    return g;
}

Turn make_turn(int id, Speaker sp, std::string text) {
    Turn t;
    t.turn_id = id;
    t.speaker = sp;
    t.utterance = std::move(text);
    return t;
}

std::unique_ptr<JudgeGateway> gateway(std::vector<ScriptEntry> entries, CallLedger* ledger) {
    return std::make_unique<JudgeGateway>(std::make_unique<ScriptedBackend>(std::move(entries)),
                                          ledger);
}

}  // namespace

TEST_CASE("dual store keeps both sides in bijection") {
    DualStore store(4);
    CHECK(store.bijection_holds());
    std::string a = store.insert(mem_goal("goal one", "book flight"), {1, 0, 0, 0});
    std::string b = store.insert(mem_goal("goal two", "book hotel"), {0, 1, 0, 0});
    CHECK(a == "m1");
    CHECK(b == "m2");
    CHECK(store.size() == 2);
    CHECK(store.bijection_holds());
    CHECK(store.insertion_order() == std::vector<std::string>{"m1", "m2"});
    CHECK(store.get("m1").content == "goal one");
    CHECK(store.embedding_of("m2") == std::vector<double>{0, 1, 0, 0});

    CHECK_THROWS_AS(store.get("m9"), UnknownIdError);
    CHECK_THROWS_AS(store.insert(mem_goal("x", "y"), {1, 0}), SchemaError);
    CHECK_THROWS_AS(store.insert(mem_goal("x", "y", GoalStatus::not_mentioned), {0, 0, 0, 1}),
                    SchemaError);

    store.refresh_embedding("m1", {0, 0, 1, 0});
    CHECK(store.bijection_holds());
    CHECK(store.embedding_of("m1") == std::vector<double>{0, 0, 1, 0});
    auto hits = store.retrieve_top_k({0, 0, 1, 0}, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].first == "m1");
}

TEST_CASE("relation edges: dedupe, self-drop and cycle downgrade") {
    DualStore store(2);
    store.insert(mem_goal("a", "a"), {1, 0});
    store.insert(mem_goal("b", "b"), {0, 1});
    store.insert(mem_goal("c", "c"), {1, 0});

    std::string note;
    CHECK(store.add_relation("m1", "m2", RelationKind::dependency, &note));
    CHECK(store.add_relation("m2", "m3", RelationKind::dependency, &note));
    CHECK(store.relations().size() == 2);
    CHECK(store.dependencies_acyclic());

    SUBCASE("duplicate edge is accepted but not re-added") {
        CHECK(store.add_relation("m1", "m2", RelationKind::dependency, &note));
        CHECK(store.relations().size() == 2);
    }
    SUBCASE("self-relation is refused") {
        note.clear();
        CHECK_FALSE(store.add_relation("m1", "m1", RelationKind::link, &note));
        CHECK(note.find("self-relation") != std::string::npos);
        CHECK(store.relations().size() == 2);
    }
    SUBCASE("closing dependency is downgraded to a link") {
        note.clear();
        CHECK_FALSE(store.add_relation("m3", "m1", RelationKind::dependency, &note));
        CHECK(note.find("downgraded to link") != std::string::npos);
        REQUIRE(store.relations().size() == 3);
        CHECK(store.relations().back() == RelationEdge{"m3", "m1", RelationKind::link});
        CHECK(store.dependencies_acyclic());
        // Link edges never block future dependencies in the other direction.
        CHECK(store.dependencies_of("m3").empty());
    }
    SUBCASE("unknown endpoints throw") {
        CHECK_THROWS_AS(store.add_relation("m1", "m8", RelationKind::link, &note),
                        UnknownIdError);
    }
}

TEST_CASE("store retrieval agrees with a brute-force cosine scan") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0, 1);
    const int dim = 16;
    for (int trial = 0; trial < 20; ++trial) {
        DualStore store(dim);
        int n = 3 + int(rng() % 60);
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < n; ++i) {
            std::vector<double> v(dim);
            for (double& x : v) x = nd(rng);
            v = unit(v);
            rows.push_back(v);
            store.insert(mem_goal("g" + std::to_string(i), "core"), v);
        }
        std::vector<double> q(dim);
        for (double& x : q) x = nd(rng);
        q = unit(q);
        int k = 1 + int(rng() % 8);

        std::vector<std::pair<int, double>> scored;
        for (int i = 0; i < n; ++i) {
            double dot = 0;
            for (int j = 0; j < dim; ++j) dot += rows[i][j] * q[j];
            scored.push_back({i, dot});
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

        auto got = store.retrieve_top_k(q, k);
        REQUIRE(int(got.size()) == std::min(k, n));
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].first == "m" + std::to_string(scored[i].first + 1));
            CHECK(got[i].second == doctest::Approx(scored[i].second));
        }
    }
}

TEST_CASE("retrieval ties resolve to the earlier-inserted goal") {
    DualStore store(2);
    store.insert(mem_goal("a", "a"), {1, 0});
    store.insert(mem_goal("b", "b"), {0, 1});
    store.insert(mem_goal("c", "c"), {1, 0});  // exact tie with m1
    auto got = store.retrieve_top_k({1, 0}, 3);
    REQUIRE(got.size() == 3);
    CHECK(got[0].first == "m1");
    CHECK(got[1].first == "m3");
    CHECK(got[2].first == "m2");
}

TEST_CASE("turns group into exchange pairs") {
    std::vector<Turn> turns = {
        make_turn(1, Speaker::user, "u1"),   make_turn(2, Speaker::system, "s1"),
        make_turn(3, Speaker::user, "u2"),   make_turn(4, Speaker::system, "s2"),
        make_turn(5, Speaker::user, "u3"),
    };
    auto pairs = group_into_pairs(turns);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].pair_index == 1);
    CHECK(pairs[0].user_utterance == "u1");
    CHECK(pairs[0].system_response == "s1");
    CHECK(pairs[0].last_utterance_turn_id == 2);
    CHECK(pairs[1].last_utterance_turn_id == 4);
    CHECK(pairs[2].system_response.empty());
    CHECK(pairs[2].last_utterance_turn_id == 5);
    CHECK(group_into_pairs({}).empty());
}

TEST_CASE("existence check short-circuits on an empty store") {
    // The backend has no existence_check entry, so any judge call would throw
    // NoScriptEntryError; a clean return proves none was made.
    CallLedger ledger;
    auto gw = gateway({}, &ledger);
    HashedBagEmbedder embedder(32);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 0.6, 5, 32, 0.85});

    DualStore store(32);
    CandidateGoal candidate;
    candidate.goal_content = "book a flight";
    candidate.core_content = "book flight";
    ExistenceOutcome outcome =
        pipeline.existence_check(candidate, embedder.embed(candidate.goal_content), store);
    CHECK_FALSE(outcome.match);
    CHECK(outcome.judge_calls == 0);
    CHECK(ledger.size() == 0);
}

TEST_CASE("existence match requires confidence at or above tau") {
    std::vector<ScriptEntry> entries = {
        {TemplateId::existence_check, "", {R"({"match": true, "confidence": 0.7})"}, {}},
    };
    HashedBagEmbedder embedder(32);
    CandidateGoal candidate;
    candidate.goal_content = "book a flight to Osaka";
    candidate.core_content = "book flight";
    auto embedding = embedder.embed(candidate.goal_content);

    auto run_with_tau = [&](double tau) {
        CallLedger ledger;
        auto gw = gateway(entries, &ledger);
        MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, tau, 0.6, 5, 32, 0.85});
        DualStore store(32);
        store.insert(mem_goal("book a flight to Osaka", "book flight"), embedding);
        return pipeline.existence_check(candidate, embedding, store);
    };

    ExistenceOutcome lo = run_with_tau(0.6);
    CHECK(lo.match);
    CHECK(lo.matched_id == "m1");
    CHECK(lo.judge_calls == 1);

    ExistenceOutcome hi = run_with_tau(0.8);
    CHECK_FALSE(hi.match);
    CHECK(hi.judge_calls == 1);  // the sole neighbor was judged, then rejected
}

TEST_CASE("relation evolution is gated by delta") {
    std::vector<ScriptEntry> entries = {
        {TemplateId::evolve_relations, "", {R"({"m1": "link"})"}, {}},
    };
    HashedBagEmbedder embedder(32);

    auto run_with_delta = [&](double delta) {
        CallLedger ledger;
        auto gw = gateway(entries, &ledger);
        MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, delta, 5, 32, 0.85});
        ProcessResult result{"t", DualStore(32), {}, {}, {}, 0, 0, 0, 0};
        result.store.insert(mem_goal("book a flight now", "book flight"),
                            embedder.embed("book a flight now"));
        CandidateGoal candidate;
        candidate.goal_content = "book a flight now";  // cosine 1.0 against m1
        candidate.core_content = "book flight";
        ExchangePair pair;
        pair.pair_index = 1;
        pipeline.insert_and_evolve(candidate, embedder.embed(candidate.goal_content),
                                   result.store, pair, result);
        return std::pair<int, size_t>(result.relation_judge_calls,
                                      result.store.relations().size());
    };

    auto [calls_lo, rels_lo] = run_with_delta(0.0);
    CHECK(calls_lo == 1);
    CHECK(rels_lo == 1);

    auto [calls_hi, rels_hi] = run_with_delta(1.01);
    CHECK(calls_hi == 0);
    CHECK(rels_hi == 0);
}

TEST_CASE("full pipeline trace over a scripted three-pair dialogue") {
    // Hand-derived expectation: pair 1 inserts the flight goal, pair 2 inserts
    // the hotel goal (judged dependent on the flight), pair 3 re-extracts the
    // flight goal as completed, which dedupes onto m1 and tries to add a
    // dependency back onto m2, closing a cycle that must downgrade to a link.
    std::vector<ScriptEntry> entries = {
        {TemplateId::extract_goals, "flight please",
         {R"([{"goal_content": "book a flight to Osaka", "core_content": "book flight",
               "status": "open", "slot_values": {"destination": "Osaka"}}])"},
         {}},
        {TemplateId::extract_goals, "hotel too",
         {R"([{"goal_content": "reserve a hotel in Osaka", "core_content": "book hotel",
               "status": "open"}])"},
         {}},
        {TemplateId::extract_goals, "finished the book flight",
         {R"([{"goal_content": "book a flight to Osaka", "core_content": "book flight",
               "status": "completed", "dependencies": ["book hotel"]}])"},
         {}},
        {TemplateId::extract_goals, "", {"[]"}, {}},
        {TemplateId::existence_check, "reserve a hotel", {R"({"match": false})"}, {}},
        {TemplateId::existence_check, "", {R"({"match": true, "confidence": 0.95})"}, {}},
        {TemplateId::evolve_relations, "", {R"({"m1": "dependency"})"}, {}},
        {TemplateId::classify_status, "", {R"({"status": "open"})"}, {}},
    };

    std::vector<Turn> turns = {
        make_turn(1, Speaker::user, "flight please, to Osaka"),
        make_turn(2, Speaker::system, "done, looking"),
        make_turn(3, Speaker::user, "and a hotel too"),
        make_turn(4, Speaker::system, "noted"),
        make_turn(5, Speaker::user, "i finished the book flight task"),
        make_turn(6, Speaker::system, "great"),
    };

    CallLedger ledger;
    auto gw = gateway(entries, &ledger);
    HashedBagEmbedder embedder(64);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 0.0, 5, 64, 0.85});
    ProcessResult result = pipeline.process_dialogue("dlg_trace", turns);

    CHECK(result.dialogue_id == "dlg_trace");
    CHECK(result.insert_count == 2);
    CHECK(result.match_count == 1);
    CHECK(result.relation_judge_calls == 1);
    CHECK(result.audit_runs == 1);  // final pair only (period 5 never fires)
    CHECK(result.store.size() == 2);
    CHECK(result.store.bijection_holds());
    CHECK(result.store.dependencies_acyclic());

    CHECK(result.store.get("m1").status == GoalStatus::completed);
    CHECK(result.store.get("m1").slot_values.at("destination") == "Osaka");
    CHECK(result.store.get("m2").status == GoalStatus::open);

    // Relations: evolve added m2 -> m1 dependency; the later m1 -> m2
    // dependency closes the cycle and lands as a link.
    REQUIRE(result.store.relations().size() == 2);
    CHECK(result.store.relations()[0] == RelationEdge{"m2", "m1", RelationKind::dependency});
    CHECK(result.store.relations()[1] == RelationEdge{"m1", "m2", RelationKind::link});
    bool saw_downgrade = false;
    for (const std::string& d : result.diagnostics) {
        if (d.find("downgraded to link") != std::string::npos) saw_downgrade = true;
    }
    CHECK(saw_downgrade);

    REQUIRE(result.transitions.size() == 3);
    CHECK(result.transitions[0].goal_id == "m1");
    CHECK(result.transitions[0].origin == TransitionOrigin::extraction);
    CHECK(result.transitions[0].to == GoalStatus::open);
    CHECK(result.transitions[1].goal_id == "m2");
    CHECK(result.transitions[1].turn_index == 2);
    CHECK(result.transitions[2].goal_id == "m1");
    CHECK(result.transitions[2].origin == TransitionOrigin::update);
    CHECK(result.transitions[2].from == GoalStatus::open);
    CHECK(result.transitions[2].to == GoalStatus::completed);
    // Pair 3's user turn names the goal's core pattern verbatim.
    CHECK(result.transitions[2].user_mentioned_goal);

    REQUIRE(result.snapshots.size() == 3);
    CHECK(result.snapshots[0].pair_index == 1);
    CHECK(result.snapshots[0].goal_ids == std::vector<std::string>{"m1"});
    CHECK(result.snapshots[0].last_utterance_turn_id == 2);
    CHECK(result.snapshots[2].statuses.at("m1") == GoalStatus::completed);
    CHECK(result.snapshots[2].statuses.at("m2") == GoalStatus::open);
    CHECK(result.snapshots[2].relations.size() == 2);
    CHECK(result.snapshots[2].slot_values.at("m1").at("destination") == "Osaka");

    // Every ledger entry carries the dialogue id and a real pair index.
    CHECK(ledger.size() > 0);
    for (const LedgerEntry& e : ledger.entries()) {
        CHECK(e.dialogue_id == "dlg_trace");
        CHECK(e.turn_index >= 1);
        CHECK(e.turn_index <= 3);
    }
}

TEST_CASE("extraction-invalid statuses are dropped with a diagnostic") {
    std::vector<ScriptEntry> entries = {
        {TemplateId::extract_goals, "",
         {R"([{"goal_content": "give up on the trip", "core_content": "cancel trip",
               "status": "abandoned"}])"},
         {}},
    };
    CallLedger ledger;
    auto gw = gateway(entries, &ledger);
    HashedBagEmbedder embedder(32);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 0.6, 5, 32, 0.85});
    ProcessResult result = pipeline.process_dialogue(
        "dlg_drop", {make_turn(1, Speaker::user, "whatever"),
                     make_turn(2, Speaker::system, "ok")});
    CHECK(result.store.size() == 0);
    CHECK(result.insert_count == 0);
    REQUIRE(result.transitions.empty());
    bool saw_drop = false;
    for (const std::string& d : result.diagnostics) {
        if (d.find("extraction-invalid") != std::string::npos) saw_drop = true;
    }
    CHECK(saw_drop);
}

TEST_CASE("proactive audit runs on the configured schedule") {
    // Period 3 over 7 pairs: scheduled at pairs 3 and 6, plus the final pair.
    std::vector<ScriptEntry> entries = {
        {TemplateId::extract_goals, "", {"[]"}, {}},
    };
    CallLedger ledger;
    auto gw = gateway(entries, &ledger);
    HashedBagEmbedder embedder(32);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 0.6, 3, 32, 0.85});

    std::vector<Turn> turns;
    for (int i = 1; i <= 14; ++i) {
        turns.push_back(make_turn(i, i % 2 == 1 ? Speaker::user : Speaker::system,
                                  "turn " + std::to_string(i)));
    }
    ProcessResult result = pipeline.process_dialogue("dlg_audit", turns);
    CHECK(result.audit_runs == 3);
    CHECK(result.snapshots.size() == 7);
}

TEST_CASE("audit applies judged transitions and skips terminals") {
    std::vector<ScriptEntry> entries = {
        {TemplateId::extract_goals, "start",
         {R"([{"goal_content": "book a flight", "core_content": "book flight", "status": "open"},
              {"goal_content": "book a hotel", "core_content": "book hotel", "status": "completed"}])"},
         {}},
        {TemplateId::extract_goals, "", {"[]"}, {}},
        {TemplateId::existence_check, "", {R"({"match": false})"}, {}},
        {TemplateId::evolve_relations, "", {R"({})"}, {}},
        // Only non-terminal goals are audited, so this fires for m1 alone.
        {TemplateId::classify_status, "", {R"({"status": "completed"})"}, {}},
    };
    CallLedger ledger;
    auto gw = gateway(entries, &ledger);
    HashedBagEmbedder embedder(32);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 2.0, 2, 32, 0.85});

    std::vector<Turn> turns = {
        make_turn(1, Speaker::user, "start both goals"),
        make_turn(2, Speaker::system, "on it"),
        make_turn(3, Speaker::user, "nothing new"),
        make_turn(4, Speaker::system, "ok"),
    };
    ProcessResult result = pipeline.process_dialogue("dlg_audit2", turns);

    // Audit fires at pair 2 (schedule and final coincide; one run).
    CHECK(result.audit_runs == 1);
    CHECK(result.store.get("m1").status == GoalStatus::completed);
    CHECK(result.store.get("m2").status == GoalStatus::completed);

    int audit_transitions = 0;
    for (const TransitionRecord& t : result.transitions) {
        if (t.origin == TransitionOrigin::audit) {
            ++audit_transitions;
            CHECK(t.goal_id == "m1");
            CHECK(t.from == GoalStatus::open);
            CHECK(t.to == GoalStatus::completed);
            CHECK(t.turn_index == 2);
            CHECK_FALSE(t.user_mentioned_goal);
        }
    }
    CHECK(audit_transitions == 1);

    // Exactly one classify_status dispatch: m2 was terminal already.
    int classify_calls = 0;
    for (const LedgerEntry& e : ledger.entries()) {
        if (e.template_id == TemplateId::classify_status) ++classify_calls;
    }
    CHECK(classify_calls == 1);
}

TEST_CASE("pipeline errors carry dialogue and pair coordinates") {
    // No script entries at all: the first extraction dispatch fails.
    CallLedger ledger;
    auto gw = gateway({}, &ledger);
    HashedBagEmbedder embedder(32);
    MemoryPipeline pipeline(gw.get(), &embedder, PipelineConfig{5, 0.8, 0.6, 5, 32, 0.85});
    try {
        pipeline.process_dialogue("dlg_err", {make_turn(1, Speaker::user, "hi")});
        FAIL("expected Error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("dlg_err") != std::string::npos);
        CHECK(msg.find("turn 1") != std::string::npos);
        CHECK(e.category() == ErrorCategory::backend);
    }
}

TEST_CASE("embedder determinism and cosine basics") {
    HashedBagEmbedder embedder(64);
    CHECK(embedder.dimension() == 64);
    auto a = embedder.embed("book a flight");
    auto b = embedder.embed("book a flight");
    CHECK(a == b);
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0));
    auto zero = embedder.embed("");
    CHECK(cosine_similarity(a, zero) == 0.0);
    CHECK(cosine_similarity(zero, zero) == 0.0);
    // Case-insensitive tokenization.
    CHECK(cosine_similarity(embedder.embed("Book A Flight"), a) == doctest::Approx(1.0));
}
