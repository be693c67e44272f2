#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "dialeval/graph.hpp"
#include "dialeval/judge.hpp"
#include "dialeval/memory.hpp"
#include "dialeval/metrics.hpp"
#include "dialeval/synthesis.hpp"

namespace dialeval {

/// Fully resolved run settings. Precedence: flags > environment > config
/// file > defaults; `sources` records where each key's value came from and
/// is written out with the snapshot as proof.
struct RunConfig {
    // Judge backend. The API key is taken from the environment or a flag,
    // never from the config file.
    std::string backend = "scripted";  ///< "scripted" | "http"
    std::string script_path;
    std::string api_endpoint;  ///< env DIALEVAL_API_ENDPOINT
    std::string api_key;       ///< env DIALEVAL_API_KEY
    std::string model;         ///< env DIALEVAL_MODEL
    int timeout_seconds = 30;

    // Memory pipeline thresholds.
    int k = 5;
    double tau = 0.8;
    double delta = 0.6;
    int audit_period = 5;
    double mention_tau = 0.85;
    int embedding_dim = 384;

    // Metric settings.
    double tau_align = 0.85;
    std::string eligibility = "strict";  ///< "strict" | "lenient"

    // Generation settings.
    uint64_t seed = 0;
    int total_dialogues = 4;
    std::optional<int> medium_quota;
    std::optional<int> complex_quota;
    ComplexityCriteria criteria;
    int qc_max_rounds = 3;
    int judge_max_retries = 3;
    double qc_failure_tolerance = 0.25;
    bool emit_timestamp = false;

    int workers = 1;
    std::string output_dir = "out";

    std::map<std::string, std::string> sources;  ///< key -> default|file|env|flag
};

/// Applies a flat JSON config file; recognized keys override defaults and
/// are marked source "file". Unknown keys raise SchemaError.
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Applies DIALEVAL_API_ENDPOINT / DIALEVAL_API_KEY / DIALEVAL_MODEL.
void apply_environment(RunConfig& cfg);

/// Full resolved view including the sources map; the API key is redacted to
/// a presence flag.
ojson config_snapshot(const RunConfig& cfg);

/// FNV hash of the snapshot minus sources (provenance does not change
/// behavior), hex-encoded.
std::string run_config_hash(const RunConfig& cfg);

PipelineConfig pipeline_config(const RunConfig& cfg);
GenerationConfig generation_config(const RunConfig& cfg);
EligibilityMode eligibility_mode(const RunConfig& cfg);

/// Builds the configured judge backend. Scripted requires script_path; http
/// requires api_endpoint. Throws usage Error when the requirement is unmet.
std::unique_ptr<JudgeBackend> make_backend(const RunConfig& cfg);

}  // namespace dialeval
