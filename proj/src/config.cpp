#include "dialeval/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "dialeval/errors.hpp"
#include "dialeval/rng.hpp"

namespace dialeval {

namespace {

void read_range(const ojson& j, const std::string& key, int& lo, int& hi) {
    const ojson& v = j.at(key);
    if (!v.is_array() || v.size() != 2)
        throw SchemaError("config key '" + key + "' must be a [min, max] pair");
    lo = v[0].get<int>();
    hi = v[1].get<int>();
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const ojson::parse_error& e) {
        throw SchemaError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw SchemaError("config file " + path + " must hold a JSON object");

    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const ojson& v = it.value();
        if (key == "backend")
            cfg.backend = v.get<std::string>();
        else if (key == "script")
            cfg.script_path = v.get<std::string>();
        else if (key == "api_endpoint")
            cfg.api_endpoint = v.get<std::string>();
        else if (key == "model")
            cfg.model = v.get<std::string>();
        else if (key == "timeout_seconds")
            cfg.timeout_seconds = v.get<int>();
        else if (key == "k")
            cfg.k = v.get<int>();
        else if (key == "tau")
            cfg.tau = v.get<double>();
        else if (key == "delta")
            cfg.delta = v.get<double>();
        else if (key == "audit_period")
            cfg.audit_period = v.get<int>();
        else if (key == "mention_tau")
            cfg.mention_tau = v.get<double>();
        else if (key == "embedding_dim")
            cfg.embedding_dim = v.get<int>();
        else if (key == "tau_align")
            cfg.tau_align = v.get<double>();
        else if (key == "eligibility")
            cfg.eligibility = v.get<std::string>();
        else if (key == "seed")
            cfg.seed = v.get<uint64_t>();
        else if (key == "total_dialogues")
            cfg.total_dialogues = v.get<int>();
        else if (key == "medium_quota")
            cfg.medium_quota = v.get<int>();
        else if (key == "complex_quota")
            cfg.complex_quota = v.get<int>();
        else if (key == "medium_ratio")
            cfg.criteria.medium_ratio = v.get<double>();
        else if (key == "complex_ratio")
            cfg.criteria.complex_ratio = v.get<double>();
        else if (key == "medium_goals")
            read_range(j, key, cfg.criteria.medium_goals_min, cfg.criteria.medium_goals_max);
        else if (key == "medium_turns")
            read_range(j, key, cfg.criteria.medium_turns_min, cfg.criteria.medium_turns_max);
        else if (key == "medium_max_dependencies")
            cfg.criteria.medium_max_dependencies = v.get<int>();
        else if (key == "complex_goals_min")
            cfg.criteria.complex_goals_min = v.get<int>();
        else if (key == "complex_turns_min")
            cfg.criteria.complex_turns_min = v.get<int>();
        else if (key == "complex_min_dependencies")
            cfg.criteria.complex_min_dependencies = v.get<int>();
        else if (key == "draw_medium_goals")
            read_range(j, key, cfg.criteria.draw_medium_goals_min,
                       cfg.criteria.draw_medium_goals_max);
        else if (key == "draw_medium_turns")
            read_range(j, key, cfg.criteria.draw_medium_turns_min,
                       cfg.criteria.draw_medium_turns_max);
        else if (key == "draw_complex_goals")
            read_range(j, key, cfg.criteria.draw_complex_goals_min,
                       cfg.criteria.draw_complex_goals_max);
        else if (key == "draw_complex_turns")
            read_range(j, key, cfg.criteria.draw_complex_turns_min,
                       cfg.criteria.draw_complex_turns_max);
        else if (key == "qc_max_rounds")
            cfg.qc_max_rounds = v.get<int>();
        else if (key == "judge_max_retries")
            cfg.judge_max_retries = v.get<int>();
        else if (key == "qc_failure_tolerance")
            cfg.qc_failure_tolerance = v.get<double>();
        else if (key == "emit_timestamp")
            cfg.emit_timestamp = v.get<bool>();
        else if (key == "workers")
            cfg.workers = v.get<int>();
        else if (key == "output_dir")
            cfg.output_dir = v.get<std::string>();
        else
            throw SchemaError("unknown config key '" + key + "' in " + path);
        cfg.sources[key] = "file";
    }
}

void apply_environment(RunConfig& cfg) {
    if (const char* v = std::getenv("DIALEVAL_API_ENDPOINT"); v != nullptr && *v != '\0') {
        cfg.api_endpoint = v;
        cfg.sources["api_endpoint"] = "env";
    }
    if (const char* v = std::getenv("DIALEVAL_API_KEY"); v != nullptr && *v != '\0') {
        cfg.api_key = v;
        cfg.sources["api_key"] = "env";
    }
    if (const char* v = std::getenv("DIALEVAL_MODEL"); v != nullptr && *v != '\0') {
        cfg.model = v;
        cfg.sources["model"] = "env";
    }
}

namespace {

ojson snapshot_values(const RunConfig& cfg) {
    const ComplexityCriteria& c = cfg.criteria;
    ojson j = ojson::object();
    j["backend"] = cfg.backend;
    j["script"] = cfg.script_path;
    j["api_endpoint"] = cfg.api_endpoint;
    j["api_key_set"] = !cfg.api_key.empty();
    j["model"] = cfg.model;
    j["timeout_seconds"] = cfg.timeout_seconds;
    j["k"] = cfg.k;
    j["tau"] = cfg.tau;
    j["delta"] = cfg.delta;
    j["audit_period"] = cfg.audit_period;
    j["mention_tau"] = cfg.mention_tau;
    j["embedding_dim"] = cfg.embedding_dim;
    j["tau_align"] = cfg.tau_align;
    j["eligibility"] = cfg.eligibility;
    j["seed"] = cfg.seed;
    j["total_dialogues"] = cfg.total_dialogues;
    j["medium_quota"] = cfg.medium_quota ? ojson(*cfg.medium_quota) : ojson(nullptr);
    j["complex_quota"] = cfg.complex_quota ? ojson(*cfg.complex_quota) : ojson(nullptr);
    j["medium_ratio"] = c.medium_ratio;
    j["complex_ratio"] = c.complex_ratio;
    j["medium_goals"] = {c.medium_goals_min, c.medium_goals_max};
    j["medium_turns"] = {c.medium_turns_min, c.medium_turns_max};
    j["medium_max_dependencies"] = c.medium_max_dependencies;
    j["complex_goals_min"] = c.complex_goals_min;
    j["complex_turns_min"] = c.complex_turns_min;
    j["complex_min_dependencies"] = c.complex_min_dependencies;
    j["draw_medium_goals"] = {c.draw_medium_goals_min, c.draw_medium_goals_max};
    j["draw_medium_turns"] = {c.draw_medium_turns_min, c.draw_medium_turns_max};
    j["draw_complex_goals"] = {c.draw_complex_goals_min, c.draw_complex_goals_max};
    j["draw_complex_turns"] = {c.draw_complex_turns_min, c.draw_complex_turns_max};
    j["qc_max_rounds"] = cfg.qc_max_rounds;
    j["judge_max_retries"] = cfg.judge_max_retries;
    j["qc_failure_tolerance"] = cfg.qc_failure_tolerance;
    j["emit_timestamp"] = cfg.emit_timestamp;
    j["workers"] = cfg.workers;
    j["output_dir"] = cfg.output_dir;
    return j;
}

}  // namespace

ojson config_snapshot(const RunConfig& cfg) {
    ojson j = snapshot_values(cfg);
    ojson sources = ojson::object();
    for (const auto& [key, source] : cfg.sources) sources[key] = source;
    j["sources"] = sources;
    return j;
}

std::string run_config_hash(const RunConfig& cfg) {
    uint64_t h = fnv1a64(snapshot_values(cfg).dump());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
    PipelineConfig p;
    p.k = cfg.k;
    p.tau = cfg.tau;
    p.delta = cfg.delta;
    p.audit_period = cfg.audit_period;
    p.embedding_dim = cfg.embedding_dim;
    p.mention_tau = cfg.mention_tau;
    return p;
}

GenerationConfig generation_config(const RunConfig& cfg) {
    GenerationConfig g;
    g.total_dialogues = cfg.total_dialogues;
    g.medium_quota = cfg.medium_quota;
    g.complex_quota = cfg.complex_quota;
    g.criteria = cfg.criteria;
    g.seed = cfg.seed;
    g.output_dir = cfg.output_dir;
    g.qc_max_rounds = cfg.qc_max_rounds;
    g.qc_failure_tolerance = cfg.qc_failure_tolerance;
    g.emit_timestamp = cfg.emit_timestamp;
    return g;
}

EligibilityMode eligibility_mode(const RunConfig& cfg) {
    if (cfg.eligibility == "strict") return EligibilityMode::strict;
    if (cfg.eligibility == "lenient") return EligibilityMode::lenient;
    throw Error(ErrorCategory::usage,
                "eligibility must be 'strict' or 'lenient', got '" + cfg.eligibility + "'");
}

std::unique_ptr<JudgeBackend> make_backend(const RunConfig& cfg) {
    if (cfg.backend == "scripted") {
        if (cfg.script_path.empty())
            throw Error(ErrorCategory::usage, "scripted backend requires --script PATH");
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(cfg.script_path));
    }
    if (cfg.backend == "http") {
        if (cfg.api_endpoint.empty())
            throw Error(ErrorCategory::usage,
                        "http backend requires an endpoint (flag or DIALEVAL_API_ENDPOINT)");
        HttpBackendConfig hc;
        hc.endpoint = cfg.api_endpoint;
        hc.model = cfg.model;
        hc.api_key = cfg.api_key;
        hc.timeout_seconds = cfg.timeout_seconds;
        return std::make_unique<HttpBackend>(hc);
    }
    throw Error(ErrorCategory::usage,
                "backend must be 'scripted' or 'http', got '" + cfg.backend + "'");
}

}  // namespace dialeval
