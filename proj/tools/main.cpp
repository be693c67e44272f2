#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dialeval/config.hpp"
#include "dialeval/errors.hpp"
#include "dialeval/evaluate.hpp"
#include "dialeval/synthesis.hpp"

namespace {

using namespace dialeval;

std::string fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

int cmd_build_graph(const std::string& corpus_path, const std::string& out_path) {
    auto sequences = load_seed_corpus(corpus_path);
    CooccurrenceGraph graph = build_graph(sequences);
    GraphStats stats = compute_stats(graph);

    std::cout << "sequences: " << sequences.size() << "\n";
    std::cout << "nodes: " << stats.node_count << "\n";
    std::cout << "edges: " << stats.edge_count << "\n";
    std::cout << "density: " << (stats.density_defined ? fixed(stats.density, 4) : "undefined")
              << "\n";
    std::cout << "avg_degree: " << fixed(stats.avg_degree, 2) << "\n";
    std::cout << "min_degree: " << stats.min_degree << "\n";
    std::cout << "max_degree: " << stats.max_degree << "\n";
    std::cout << "components: " << stats.connected_component_count << "\n";

    if (!out_path.empty()) {
        ojson j = ojson::object();
        j["stats"] = stats_to_json(stats);
        j["graph"] = graph_to_json(graph);
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCategory::data, "cannot write " + out_path);
        out << j.dump(2) << "\n";
        std::cout << "graph written to " << out_path << "\n";
    }
    return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& corpus_path,
                 const std::string& graph_path) {
    CooccurrenceGraph graph;
    if (!graph_path.empty()) {
        std::ifstream in(graph_path);
        if (!in) throw MissingFileError(graph_path);
        ojson j = ojson::parse(in);
        graph = graph_from_json(j.contains("graph") ? j["graph"] : j);
    } else if (!corpus_path.empty()) {
        graph = build_graph(load_seed_corpus(corpus_path));
    } else {
        throw Error(ErrorCategory::usage, "generate requires --corpus or --graph");
    }

    CallLedger ledger;
    JudgeGateway gateway(make_backend(cfg), &ledger);
    DatasetManifest manifest = run_pipeline(graph, generation_config(cfg), gateway);

    std::cout << "generated " << (manifest.medium_count + manifest.complex_count)
              << " dialogues (medium " << manifest.medium_count << ", complex "
              << manifest.complex_count << ") in " << cfg.output_dir << "\n";
    std::cout << "qc: pass " << manifest.qc_pass_count << ", fail " << manifest.qc_fail_count
              << ", discarded " << manifest.discarded_count << ", attempts "
              << manifest.attempts << "\n";
    std::cout << "config_hash: " << manifest.config_hash << "\n";

    int qc_total = manifest.qc_pass_count + manifest.qc_fail_count;
    if (qc_total > 0) {
        double fraction = static_cast<double>(manifest.qc_fail_count) / qc_total;
        if (fraction > cfg.qc_failure_tolerance) {
            std::cerr << "error: QC failure fraction " << fixed(fraction, 4)
                      << " exceeds tolerance " << fixed(cfg.qc_failure_tolerance, 4) << "\n";
            return static_cast<int>(ErrorCategory::backend);
        }
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& dataset_path) {
    EvaluationSummary summary = run_evaluation(dataset_path, cfg);
    for (const auto& report : summary.reports)
        std::cout << report.dialogue_id << ": evaluated (" << report.complexity << ", "
                  << report.judge_calls << " judge calls)\n";
    for (const auto& failure : summary.failures)
        std::cout << failure.dialogue_id << ": FAILED " << failure.message << "\n";
    std::cout << "evaluated " << summary.succeeded << "/" << summary.total
              << " dialogues; reports in " << cfg.output_dir << "\n";
    if (summary.total > 0 && summary.succeeded == 0)
        return static_cast<int>(summary.failures.front().category);
    return 0;
}

int cmd_validate(const std::string& dataset_path) {
    std::vector<std::string> files = discover_dataset_files(dataset_path);
    int violation_count = 0;
    int checked = 0;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) {
            std::cout << file << ": unreadable\n";
            ++violation_count;
            continue;
        }
        ojson j = ojson::parse(in, nullptr, false);
        if (j.is_discarded()) {
            std::cout << file << ": malformed JSON\n";
            ++violation_count;
            continue;
        }
        Dialogue d;
        try {
            d = dialogue_from_json(j);
        } catch (const std::exception& e) {
            std::cout << file << ": unreadable dialogue: " << e.what() << "\n";
            ++violation_count;
            continue;
        }
        ++checked;
        ValidationResult result = validate_dialogue(d);
        for (const auto& v : result.violations) {
            std::cout << v.dialogue_id << " turn=" << v.turn_id << " goal=" << v.goal_id << " "
                      << v.kind << ": " << v.detail << "\n";
        }
        violation_count += static_cast<int>(result.violations.size());
    }
    std::cout << "checked " << checked << " dialogues, " << violation_count << " violations\n";
    return 0;  // violations are data, not tool failure
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal-lifecycle dialogue synthesis and evaluation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> backend;
    std::optional<std::string> script;
    std::optional<std::string> api_endpoint;
    std::optional<std::string> model;
    std::optional<std::string> api_key;
    std::optional<std::string> eligibility;
    std::optional<std::string> output_dir;
    std::optional<double> tau;
    std::optional<double> delta;
    std::optional<double> mention_tau;
    std::optional<double> tau_align;
    std::optional<double> qc_tolerance;
    std::optional<int> k;
    std::optional<int> audit_period;
    std::optional<int> workers;
    std::optional<int> total_dialogues;
    std::optional<int> medium_quota;
    std::optional<int> complex_quota;
    std::optional<int> qc_max_rounds;
    std::optional<uint64_t> seed;
    bool emit_timestamp = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--backend", backend, "judge backend")
        ->check(CLI::IsMember({"scripted", "http"}));
    app.add_option("--script", script, "scripted backend response file");
    app.add_option("--api-endpoint", api_endpoint, "HTTP backend endpoint URL");
    app.add_option("--model", model, "HTTP backend model name");
    app.add_option("--api-key", api_key, "HTTP backend API key");
    app.add_option("--tau", tau, "existence-match confidence threshold");
    app.add_option("--delta", delta, "relatedness threshold for relation evolution");
    app.add_option("--k", k, "retrieval depth");
    app.add_option("--audit-period", audit_period, "proactive audit period (exchange pairs)");
    app.add_option("--mention-tau", mention_tau, "user-mention embedding threshold");
    app.add_option("--tau-align", tau_align, "goal alignment embedding threshold");
    app.add_option("--eligibility", eligibility, "dGCR prerequisite mode")
        ->check(CLI::IsMember({"strict", "lenient"}));
    app.add_option("--seed", seed, "rng seed");
    app.add_option("--workers", workers, "parallel dialogue workers");
    app.add_option("--output-dir", output_dir, "output directory");
    app.add_option("--total", total_dialogues, "dialogues to generate");
    app.add_option("--medium-quota", medium_quota, "explicit medium-class quota");
    app.add_option("--complex-quota", complex_quota, "explicit complex-class quota");
    app.add_option("--qc-max-rounds", qc_max_rounds, "quality-control retry rounds");
    app.add_option("--qc-tolerance", qc_tolerance, "tolerated QC failure fraction");
    app.add_flag("--emit-timestamp", emit_timestamp,
                 "record a wall-clock timestamp in the manifest");

    // Backend/threshold options live on the parent app; fallthrough lets them
    // be written after the subcommand name as well.
    auto* build = app.add_subcommand("build-graph", "build the goal co-occurrence graph");
    build->fallthrough();
    std::string corpus_path;
    std::string graph_out;
    build->add_option("corpus", corpus_path, "seed corpus JSONL")->required();
    build->add_option("--out", graph_out, "write graph + stats JSON");

    auto* generate = app.add_subcommand("generate", "synthesize a dialogue dataset");
    generate->fallthrough();
    std::string gen_corpus;
    std::string gen_graph;
    generate->add_option("--corpus", gen_corpus, "seed corpus JSONL");
    generate->add_option("--graph", gen_graph, "prebuilt graph JSON (from build-graph --out)");

    auto* evaluate = app.add_subcommand("evaluate", "run the memory evaluator over a dataset");
    evaluate->fallthrough();
    std::string eval_dataset;
    evaluate->add_option("dataset", eval_dataset, "dataset directory or dialogue file")
        ->required();

    auto* validate = app.add_subcommand("validate", "schema + replay checks over a dataset");
    validate->fallthrough();
    std::string val_dataset;
    validate->add_option("dataset", val_dataset, "dataset directory or dialogue file")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(dialeval::ErrorCategory::usage);
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        apply_environment(cfg);

        auto flag = [&cfg](const char* key, auto& opt, auto& field) {
            if (!opt.has_value()) return;
            field = *opt;
            cfg.sources[key] = "flag";
        };
        flag("backend", backend, cfg.backend);
        flag("script", script, cfg.script_path);
        flag("api_endpoint", api_endpoint, cfg.api_endpoint);
        flag("model", model, cfg.model);
        flag("api_key", api_key, cfg.api_key);
        flag("tau", tau, cfg.tau);
        flag("delta", delta, cfg.delta);
        flag("k", k, cfg.k);
        flag("audit_period", audit_period, cfg.audit_period);
        flag("mention_tau", mention_tau, cfg.mention_tau);
        flag("tau_align", tau_align, cfg.tau_align);
        flag("eligibility", eligibility, cfg.eligibility);
        flag("seed", seed, cfg.seed);
        flag("workers", workers, cfg.workers);
        flag("output_dir", output_dir, cfg.output_dir);
        flag("total_dialogues", total_dialogues, cfg.total_dialogues);
        flag("qc_max_rounds", qc_max_rounds, cfg.qc_max_rounds);
        flag("qc_failure_tolerance", qc_tolerance, cfg.qc_failure_tolerance);
        if (medium_quota) {
            cfg.medium_quota = *medium_quota;
            cfg.sources["medium_quota"] = "flag";
        }
        if (complex_quota) {
            cfg.complex_quota = *complex_quota;
            cfg.sources["complex_quota"] = "flag";
        }
        if (emit_timestamp) {
            cfg.emit_timestamp = true;
            cfg.sources["emit_timestamp"] = "flag";
        }

        if (*build) return cmd_build_graph(corpus_path, graph_out);
        if (*generate) return cmd_generate(cfg, gen_corpus, gen_graph);
        if (*evaluate) return cmd_evaluate(cfg, eval_dataset);
        if (*validate) return cmd_validate(val_dataset);
        return static_cast<int>(dialeval::ErrorCategory::usage);
    } catch (const dialeval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(dialeval::ErrorCategory::data);
    }
}
