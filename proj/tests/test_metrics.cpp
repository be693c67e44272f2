#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dialeval/embedding.hpp"
#include "dialeval/errors.hpp"
#include "dialeval/metrics.hpp"

using namespace dialeval;

namespace {

using StatusMap = std::map<std::string, GoalStatus>;
using DepMap = std::map<std::string, std::vector<std::string>>;

// Brute-force restatement of the completion-rate definition: a goal counts
// when its prerequisites are satisfied; of those, completed over decided.
Rational dgcr_oracle(const StatusMap& statuses, const DepMap& deps, EligibilityMode mode) {
    long long completed = 0, decided = 0;
    for (const auto& [id, status] : statuses) {
        bool eligible = true;
        auto it = deps.find(id);
        if (it != deps.end()) {
            for (const std::string& dep : it->second) {
                auto ds = statuses.find(dep);
                GoalStatus dstat = ds == statuses.end() ? GoalStatus::not_mentioned : ds->second;
                bool ok = mode == EligibilityMode::strict ? dstat == GoalStatus::completed
                                                          : is_terminal(dstat);
                if (!ok) {
                    eligible = false;
                    break;
                }
            }
        }
        if (!eligible) continue;
        if (status == GoalStatus::completed) {
            ++completed;
            ++decided;
        } else if (status == GoalStatus::failed) {
            ++decided;
        }
    }
    return Rational{completed, decided};
}

GoalStatus random_status(std::mt19937_64& rng) {
    static const GoalStatus all[] = {
        GoalStatus::not_mentioned, GoalStatus::open,   GoalStatus::pending,
        GoalStatus::completed,     GoalStatus::failed, GoalStatus::abandoned,
    };
    return all[rng() % 6];
}

}  // namespace

TEST_CASE("dgcr hand cases") {
    SUBCASE("independent goals: completed over decided") {
        StatusMap s = {{"a", GoalStatus::completed},
                       {"b", GoalStatus::failed},
                       {"c", GoalStatus::pending}};
        Rational r = dgcr(s, {});
        CHECK(r == Rational{1, 2});
        CHECK(naive_completion_rate(s) == Rational{1, 2});
    }
    SUBCASE("failed dependency excludes the dependent goal") {
        // b failed only because a failed first: b is not decided on its own
        // merits, so dGCR ignores it while the naive rate does not.
        StatusMap s = {{"a", GoalStatus::failed}, {"b", GoalStatus::failed}};
        DepMap d = {{"b", {"a"}}};
        CHECK(dgcr(s, d) == Rational{0, 1});
        CHECK(naive_completion_rate(s) == Rational{0, 2});
    }
    SUBCASE("strict vs lenient eligibility") {
        StatusMap s = {{"a", GoalStatus::failed}, {"b", GoalStatus::completed}};
        DepMap d = {{"b", {"a"}}};
        // Strict: a not completed, b ineligible, only a remains -> 0/1.
        CHECK(dgcr(s, d, EligibilityMode::strict) == Rational{0, 1});
        // Lenient: a terminal, b eligible -> 1/2.
        CHECK(dgcr(s, d, EligibilityMode::lenient) == Rational{1, 2});
    }
    SUBCASE("no decided goals: undefined, not zero") {
        StatusMap s = {{"a", GoalStatus::open}, {"b", GoalStatus::abandoned}};
        Rational r = dgcr(s, {});
        CHECK_FALSE(r.defined());
        CHECK(r.den == 0);
    }
    SUBCASE("dependency on a goal missing from the map counts as unmet") {
        StatusMap s = {{"b", GoalStatus::completed}};
        DepMap d = {{"b", {"ghost"}}};
        CHECK_FALSE(dgcr(s, d).defined());
    }
    SUBCASE("cyclic dependencies are rejected") {
        StatusMap s = {{"a", GoalStatus::completed}, {"b", GoalStatus::completed}};
        DepMap d = {{"a", {"b"}}, {"b", {"a"}}};
        CHECK_THROWS_AS(dgcr(s, d), CyclicDependenciesError);
    }
}

TEST_CASE("dgcr matches the brute-force oracle on random instances") {
    std::mt19937_64 rng(515151);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 1 + int(rng() % 10);
        StatusMap statuses;
        DepMap deps;
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) {
            std::string id = "g" + std::to_string(i);
            ids.push_back(id);
            statuses[id] = random_status(rng);
        }
        // Random DAG: edges only from higher to lower index.
        for (int i = 1; i < n; ++i) {
            int edges = int(rng() % std::min(i + 1, 3));
            std::set<int> chosen;
            while (int(chosen.size()) < edges) chosen.insert(int(rng() % i));
            for (int j : chosen) deps[ids[i]].push_back(ids[j]);
        }
        EligibilityMode mode =
            rng() % 2 == 0 ? EligibilityMode::strict : EligibilityMode::lenient;
        CHECK(dgcr(statuses, deps, mode) == dgcr_oracle(statuses, deps, mode));
    }
}

TEST_CASE("ntc averages completion minus initiation") {
    std::map<std::string, std::vector<StatusEvent>> h;
    h["a"] = {{2, GoalStatus::open}, {5, GoalStatus::completed}};          // span 3
    h["b"] = {{1, GoalStatus::pending}, {9, GoalStatus::completed}};       // span 8
    h["c"] = {{3, GoalStatus::open}, {4, GoalStatus::failed}};             // not completed
    h["d"] = {{6, GoalStatus::completed}};                                 // span 0
    auto got = ntc(h);
    REQUIRE(got.has_value());
    CHECK(*got == doctest::Approx((3.0 + 8.0 + 0.0) / 3.0));

    SUBCASE("no completions: undefined") {
        CHECK_FALSE(ntc({{"x", {{1, GoalStatus::open}}}}).has_value());
        CHECK_FALSE(ntc({}).has_value());
    }
    SUBCASE("initiation is the first open/pending even when statuses evolve") {
        std::map<std::string, std::vector<StatusEvent>> one;
        one["a"] = {{2, GoalStatus::open}, {4, GoalStatus::pending}, {7, GoalStatus::completed}};
        CHECK(*ntc(one) == doctest::Approx(5.0));
    }
}

TEST_CASE("goal alignment: exact pass before embedding pass") {
    HashedBagEmbedder embedder(64);

    SUBCASE("exact normalized matches pair up first-come") {
        GoalAlignment a = align_goals({"Book Flight", "book hotel"},
                                      {"book hotel", "book flight"}, &embedder, 0.85);
        REQUIRE(a.pairs.size() == 2);
        CHECK(a.pairs[0] == std::pair<int, int>{0, 1});
        CHECK(a.pairs[1] == std::pair<int, int>{1, 0});
        CHECK(a.unmatched_predicted.empty());
        CHECK(a.unmatched_gold.empty());
    }
    SUBCASE("embedding pass catches near-misses above tau") {
        // Shared tokens push cosine above a midrange tau.
        GoalAlignment a = align_goals({"book flight osaka"}, {"book flight"}, &embedder, 0.5);
        REQUIRE(a.pairs.size() == 1);
        CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
    }
    SUBCASE("below tau stays unmatched") {
        GoalAlignment a =
            align_goals({"book flight"}, {"completely unrelated thing"}, &embedder, 0.85);
        CHECK(a.pairs.empty());
        CHECK(a.unmatched_predicted == std::vector<int>{0});
        CHECK(a.unmatched_gold == std::vector<int>{0});
    }
    SUBCASE("one-to-one: a gold goal matches at most one prediction") {
        GoalAlignment a = align_goals({"book flight", "book flight"},
                                      {"book flight"}, &embedder, 0.85);
        CHECK(a.pairs.size() == 1);
        CHECK(a.unmatched_predicted.size() == 1);
    }
    SUBCASE("tau 1.0 with distinct strings leaves embedding pass empty") {
        GoalAlignment a = align_goals({"book a flight"}, {"flight booking"}, &embedder, 1.0);
        CHECK(a.pairs.empty());
    }
}

TEST_CASE("detection prf conventions") {
    HashedBagEmbedder embedder(64);
    SUBCASE("both empty is perfect") {
        GoalAlignment a = align_goals({}, {}, &embedder, 0.85);
        Prf p = detection_prf(a, 0, 0);
        CHECK(p.precision == 1.0);
        CHECK(p.recall == 1.0);
        CHECK(p.f1 == 1.0);
    }
    SUBCASE("empty predicted against non-empty gold is zero") {
        GoalAlignment a = align_goals({}, {"book flight"}, &embedder, 0.85);
        Prf p = detection_prf(a, 0, 1);
        CHECK(p.precision == 0.0);
        CHECK(p.recall == 0.0);
        CHECK(p.f1 == 0.0);
    }
    SUBCASE("partial match arithmetic") {
        GoalAlignment a =
            align_goals({"book flight", "weird thing"}, {"book flight", "book hotel"},
                        &embedder, 0.99);
        Prf p = detection_prf(a, 2, 2);
        CHECK(p.precision == doctest::Approx(0.5));
        CHECK(p.recall == doctest::Approx(0.5));
        CHECK(p.f1 == doctest::Approx(0.5));
    }
    SUBCASE("f1 is symmetric under swapping predicted and gold") {
        std::vector<std::string> lhs = {"book flight", "book hotel", "check account"};
        std::vector<std::string> rhs = {"book hotel", "search restaurant"};
        Prf ab = detection_prf(align_goals(lhs, rhs, &embedder, 0.9), lhs.size(), rhs.size());
        Prf ba = detection_prf(align_goals(rhs, lhs, &embedder, 0.9), rhs.size(), lhs.size());
        CHECK(ab.f1 == doctest::Approx(ba.f1));
        CHECK(ab.precision == doctest::Approx(ba.recall));
        CHECK(ab.recall == doctest::Approx(ba.precision));
    }
}

TEST_CASE("status tracking accuracy over aligned pairs") {
    HashedBagEmbedder embedder(64);
    GoalAlignment a =
        align_goals({"book flight", "book hotel"}, {"book flight", "book hotel"}, &embedder, 0.85);
    REQUIRE(a.pairs.size() == 2);
    auto acc = status_tracking_acc(a, {GoalStatus::completed, GoalStatus::open},
                                   {GoalStatus::completed, GoalStatus::pending});
    REQUIRE(acc.has_value());
    CHECK(*acc == doctest::Approx(0.5));

    GoalAlignment none = align_goals({}, {}, &embedder, 0.85);
    CHECK_FALSE(status_tracking_acc(none, {}, {}).has_value());
}

TEST_CASE("pearson and spearman identities") {
    SUBCASE("perfect linear relation") {
        std::vector<double> x = {1, 2, 3, 4, 5};
        std::vector<double> y = {2, 4, 6, 8, 10};
        CHECK(*pearson(x, y) == doctest::Approx(1.0));
        CHECK(*spearman(x, y) == doctest::Approx(1.0));
    }
    SUBCASE("pearson is affine-invariant") {
        std::mt19937_64 rng(99);
        std::vector<double> x, y;
        for (int i = 0; i < 30; ++i) {
            x.push_back(double(rng() % 1000) / 10.0);
            y.push_back(double(rng() % 1000) / 10.0);
        }
        std::vector<double> x2;
        for (double v : x) x2.push_back(3.5 * v - 120.0);
        CHECK(*pearson(x2, y) == doctest::Approx(*pearson(x, y)).epsilon(1e-12));
        std::vector<double> xneg;
        for (double v : x) xneg.push_back(-2.0 * v);
        CHECK(*pearson(xneg, y) == doctest::Approx(-*pearson(x, y)).epsilon(1e-12));
    }
    SUBCASE("spearman is invariant under monotone transforms") {
        std::vector<double> x = {1, 2, 3, 4, 5, 6};
        std::vector<double> y = {1.5, 0.7, 2.2, 5.0, 3.3, 6.1};
        std::vector<double> xsq;
        for (double v : x) xsq.push_back(v * v);  // monotone, nonlinear
        CHECK(*spearman(xsq, y) == doctest::Approx(*spearman(x, y)).epsilon(1e-12));
        // Pearson, by contrast, moves.
        CHECK(*pearson(xsq, y) != doctest::Approx(*pearson(x, y)).epsilon(1e-6));
    }
    SUBCASE("undefined cases") {
        CHECK_FALSE(pearson({1}, {2}).has_value());
        CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());  // zero variance
        CHECK_FALSE(spearman({}, {}).has_value());
    }
    SUBCASE("average ranks with ties") {
        auto r = average_ranks({10, 20, 20, 30});
        REQUIRE(r.size() == 4);
        CHECK(r[0] == doctest::Approx(1.0));
        CHECK(r[1] == doctest::Approx(2.5));
        CHECK(r[2] == doctest::Approx(2.5));
        CHECK(r[3] == doctest::Approx(4.0));
    }
    SUBCASE("spearman handles ties via average ranks") {
        std::vector<double> x = {1, 2, 2, 3};
        std::vector<double> y = {10, 20, 20, 30};
        CHECK(*spearman(x, y) == doctest::Approx(1.0));
    }
}

TEST_CASE("correlations require at least three defined pairs") {
    std::vector<std::optional<double>> target = {1.0, 2.0, 3.0, 4.0};
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> series;
    series.push_back({"full", {2.0, 4.0, 6.0, 8.0}});
    series.push_back({"gappy", {2.0, std::nullopt, 6.0, 8.0}});
    series.push_back({"sparse", {2.0, std::nullopt, std::nullopt, 8.0}});

    auto rows = correlations(series, target);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].metric == "full");
    CHECK(rows[0].n == 4);
    CHECK(*rows[0].pearson_r == doctest::Approx(1.0));
    CHECK(rows[1].n == 3);
    CHECK(*rows[1].pearson_r == doctest::Approx(1.0));
    CHECK(rows[2].n == 2);
    CHECK_FALSE(rows[2].pearson_r.has_value());
    CHECK_FALSE(rows[2].spearman_rho.has_value());
}

TEST_CASE("efficiency report aggregates per (dialogue, turn)") {
    CallLedger ledger;
    // d1 turn 1: two calls 10ms + 30ms; d1 turn 2: one call 20ms.
    ledger.append({"d1", 1, TemplateId::extract_goals, 100, 10, 10.0, false});
    ledger.append({"d1", 1, TemplateId::existence_check, 50, 5, 30.0, false});
    ledger.append({"d1", 2, TemplateId::extract_goals, 80, 8, 20.0, false});
    // d2 turn 1: one call 60ms.
    ledger.append({"d2", 1, TemplateId::extract_goals, 40, 4, 60.0, false});

    std::map<std::string, std::string> classes = {{"d1", "medium"}, {"d2", "complex"}};
    auto rows = efficiency_report(ledger, classes);
    REQUIRE(rows.size() == 3);

    CHECK(rows[0].complexity == "medium");
    CHECK(rows[0].turn_count == 2);
    CHECK(rows[0].latency_mean == doctest::Approx(30.0));  // (40 + 20) / 2
    CHECK(rows[0].latency_min == doctest::Approx(20.0));
    CHECK(rows[0].latency_max == doctest::Approx(40.0));

    CHECK(rows[1].complexity == "complex");
    CHECK(rows[1].turn_count == 1);
    CHECK(rows[1].latency_mean == doctest::Approx(60.0));

    CHECK(rows[2].complexity == "all");
    CHECK(rows[2].turn_count == 3);
    CHECK(rows[2].latency_mean == doctest::Approx((40.0 + 20.0 + 60.0) / 3));
    CHECK(rows[2].latency_max == doctest::Approx(60.0));
    CHECK(rows[2].input_tokens_mean == doctest::Approx((150.0 + 80.0 + 40.0) / 3));

    CHECK(efficiency_report(CallLedger{}, {}).empty());
}

TEST_CASE("proactivity effectiveness judges the right candidates") {
    HashedBagEmbedder embedder(32);
    DualStore store(32);
    store.insert({.id = "", .content = "book a flight", .core_content = "book flight"},
                 embedder.embed("book a flight"));
    store.insert({.id = "", .content = "book a hotel", .core_content = "book hotel"},
                 embedder.embed("book a hotel"));

    std::vector<TransitionRecord> transitions;
    // Audit-origin: always a candidate.
    transitions.push_back({"m1", GoalStatus::open, GoalStatus::completed, 4,
                           TransitionOrigin::audit, false});
    // Update with user mention: not proactive.
    transitions.push_back({"m2", GoalStatus::open, GoalStatus::pending, 2,
                           TransitionOrigin::update, true});
    // Update without mention: proactive candidate.
    transitions.push_back({"m2", GoalStatus::pending, GoalStatus::completed, 5,
                           TransitionOrigin::update, false});
    // Extraction events are never proactive candidates.
    transitions.push_back({"m1", GoalStatus::not_mentioned, GoalStatus::open, 1,
                           TransitionOrigin::extraction, false});

    std::vector<ScriptEntry> entries = {
        {TemplateId::score_quality, "", {R"({"score": 1})", R"({"score": 0})"}, {}},
    };
    CallLedger ledger;
    JudgeGateway gw(std::make_unique<ScriptedBackend>(entries), &ledger);

    int candidates = 0;
    auto eff = proactivity_effectiveness(transitions, store, &gw, &candidates);
    CHECK(candidates == 2);
    REQUIRE(eff.has_value());
    CHECK(*eff == doctest::Approx(0.5));  // scores 1 then 0
    CHECK(ledger.size() == 2);

    SUBCASE("no candidates leaves the metric undefined") {
        int none = 0;
        auto empty = proactivity_effectiveness(
            {{"m1", GoalStatus::not_mentioned, GoalStatus::open, 1,
              TransitionOrigin::extraction, false}},
            store, &gw, &none);
        CHECK(none == 0);
        CHECK_FALSE(empty.has_value());
    }
}

TEST_CASE("quality scores ask one relevance probe per pair plus one coherence probe") {
    Dialogue d;
    d.dialogue_id = "q";
    Turn t1;
    t1.turn_id = 1;
    t1.speaker = Speaker::user;
    t1.utterance = "hello";
    Turn t2 = t1;
    t2.turn_id = 2;
    t2.speaker = Speaker::system;
    t2.utterance = "hi";
    Turn t3 = t1;
    t3.turn_id = 3;
    t3.utterance = "book it";
    d.turns = {t1, t2, t3};  // two exchange pairs

    std::vector<ScriptEntry> entries = {
        {TemplateId::score_quality, "overall coherence", {R"({"score": 4})"}, {}},
        {TemplateId::score_quality, "", {R"({"score": 1})", R"({"score": 0})"}, {}},
    };
    CallLedger ledger;
    JudgeGateway gw(std::make_unique<ScriptedBackend>(entries), &ledger);
    QualityScores q = quality_scores(d, &gw);
    REQUIRE(q.turn_quality.has_value());
    CHECK(*q.turn_quality == doctest::Approx(0.5));
    REQUIRE(q.dialogue_quality.has_value());
    CHECK(*q.dialogue_quality == doctest::Approx(4.0));
    CHECK(ledger.size() == 3);

    SUBCASE("judge failure marks the score unavailable, not zero") {
        CallLedger ledger2;
        JudgeGateway broken(std::make_unique<ScriptedBackend>(std::vector<ScriptEntry>{}),
                            &ledger2);
        QualityScores qq = quality_scores(d, &broken);
        CHECK_FALSE(qq.turn_quality.has_value());
        CHECK_FALSE(qq.dialogue_quality.has_value());
    }
}

TEST_CASE("memory recall probes read snapshots and the final store") {
    HashedBagEmbedder embedder(64);

    // Gold: one goal, opened at turn 1, completed at turn 5, with one
    // annotated slot value.
    Dialogue gold;
    gold.dialogue_id = "g";
    Goal g;
    g.id = "g1";
    g.content = "book a flight to Osaka";
    g.core_content = "book flight";
    g.slot_values = {{"destination", "Osaka"}};
    g.status = GoalStatus::completed;
    gold.goal_list = {g};
    for (int i = 1; i <= 6; ++i) {
        Turn t;
        t.turn_id = i;
        t.speaker = i % 2 == 1 ? Speaker::user : Speaker::system;
        t.utterance = "turn";
        if (i == 1) t.goal_status_changes = {{"g1", GoalStatus::open}};
        if (i == 5) t.goal_status_changes = {{"g1", GoalStatus::completed}};
        gold.turns.push_back(t);
    }

    auto snapshot = [&](int pair, GoalStatus status, const std::string& dest) {
        StoreSnapshot s;
        s.pair_index = pair;
        s.last_utterance_turn_id = pair * 2;
        s.goal_ids = {"m1"};
        s.statuses["m1"] = status;
        s.core_contents["m1"] = "book flight";
        s.slot_values["m1"] = {{"destination", dest}};
        return s;
    };

    SUBCASE("perfect store answers every probe") {
        std::vector<StoreSnapshot> snaps = {snapshot(1, GoalStatus::open, "Osaka"),
                                            snapshot(2, GoalStatus::open, "Osaka"),
                                            snapshot(3, GoalStatus::completed, "Osaka")};
        RecallBreakdown b;
        auto acc = memory_recall_accuracy(snaps, gold, &embedder, 0.85, &b);
        REQUIRE(acc.has_value());
        CHECK(*acc == doctest::Approx(1.0));
        CHECK(b.status_probes == 2);  // turns 1 and 5
        CHECK(b.status_correct == 2);
        CHECK(b.slot_probes == 1);
        CHECK(b.slot_correct == 1);
    }
    SUBCASE("late status change misses the probe at its gold turn") {
        // Store only completed the goal at pair 3; the gold change at turn 5
        // is probed against the snapshot covering turn 5 (pair 3), so a store
        // that still says open there gets it wrong.
        std::vector<StoreSnapshot> snaps = {snapshot(1, GoalStatus::open, "Osaka"),
                                            snapshot(2, GoalStatus::open, "Osaka"),
                                            snapshot(3, GoalStatus::open, "Sapporo")};
        RecallBreakdown b;
        auto acc = memory_recall_accuracy(snaps, gold, &embedder, 0.85, &b);
        REQUIRE(acc.has_value());
        CHECK(b.status_probes == 2);
        CHECK(b.status_correct == 1);
        CHECK(b.slot_correct == 0);
        CHECK(*acc == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("no snapshots fails every probe") {
        RecallBreakdown b;
        auto acc = memory_recall_accuracy({}, gold, &embedder, 0.85, &b);
        REQUIRE(acc.has_value());
        CHECK(*acc == 0.0);
        CHECK(b.total() == 3);
        CHECK(b.correct() == 0);
    }
    SUBCASE("gold without changes or slots yields no probes") {
        Dialogue empty_gold;
        empty_gold.dialogue_id = "e";
        Goal plain;
        plain.id = "g1";
        plain.core_content = "book flight";
        empty_gold.goal_list = {plain};
        RecallBreakdown b;
        auto acc = memory_recall_accuracy({snapshot(1, GoalStatus::open, "x")}, empty_gold,
                                          &embedder, 0.85, &b);
        CHECK_FALSE(acc.has_value());
        CHECK(b.total() == 0);
    }
}
