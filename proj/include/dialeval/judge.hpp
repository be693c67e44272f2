#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "dialeval/errors.hpp"
#include "dialeval/json_util.hpp"
#include "dialeval/templates.hpp"

namespace dialeval {

struct JudgeRequest {
    TemplateId template_id = TemplateId::qc_trajectory;
    std::map<std::string, std::string> variables;
    int max_retries = 3;
};

struct JudgeResponse {
    std::string raw_text;
    ojson parsed;  ///< structured payload per template contract
    std::optional<double> confidence;
    long input_tokens = 0;
    long output_tokens = 0;
    double latency_ms = 0.0;
    int attempts = 1;
    bool qc_passed = true;  ///< meaningful on run_with_qc results
    int qc_rounds = 0;
};

struct LedgerEntry {
    std::string dialogue_id;
    int turn_index = 0;  ///< 0 when not turn-scoped
    TemplateId template_id = TemplateId::qc_trajectory;
    long input_tokens = 0;
    long output_tokens = 0;
    double latency_ms = 0.0;
    bool tokens_estimated = false;  ///< whitespace fallback used
};

/// Append-only concurrent call log. Per-turn and per-dialogue aggregates are
/// sums over entries, so conservation is structural.
class CallLedger {
public:
    void append(LedgerEntry entry);
    void extend(const CallLedger& other);
    std::vector<LedgerEntry> entries() const;
    size_t size() const;

    long total_input_tokens() const;
    long total_output_tokens() const;

    ojson to_json() const;

private:
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
};

/// One model call result as a backend reports it. Token counts are optional:
/// absent means the gateway falls back to whitespace counting.
struct BackendResult {
    std::string text;
    std::optional<long> input_tokens;
    std::optional<long> output_tokens;
    double latency_ms = 0.0;
    std::optional<double> confidence;  ///< scripted entries may pin one
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual BackendResult complete(TemplateId id, const std::string& prompt) = 0;
    /// Fresh instance with identical configuration and reset call state, so
    /// each dialogue run owns an isolated backend.
    virtual std::unique_ptr<JudgeBackend> clone() const = 0;
    virtual std::string name() const = 0;
};

/// One canned-response rule: matches a template plus an optional regex over
/// the rendered prompt. An empty pattern is the per-template default, used
/// only when no patterned entry matches. Responses are consumed in order;
/// the last one repeats.
struct ScriptEntry {
    TemplateId template_id = TemplateId::qc_trajectory;
    std::string pattern;
    std::vector<std::string> responses;
    std::optional<double> confidence;
};

class ScriptedBackend : public JudgeBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries);
    static ScriptedBackend from_json(const ojson& j);
    static ScriptedBackend from_file(const std::string& path);

    BackendResult complete(TemplateId id, const std::string& prompt) override;
    std::unique_ptr<JudgeBackend> clone() const override;
    std::string name() const override { return "scripted"; }

private:
    std::vector<ScriptEntry> entries_;
    std::vector<std::regex> compiled_;
    std::vector<size_t> cursors_;
};

struct HttpBackendConfig {
    std::string endpoint;  ///< e.g. http://host:port/v1/chat/completions
    std::string model;
    std::string api_key;
    int timeout_seconds = 30;
};

/// Chat-completion JSON over HTTP. Parses choices[0].message.content and the
/// usage block when present.
class HttpBackend : public JudgeBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    BackendResult complete(TemplateId id, const std::string& prompt) override;
    std::unique_ptr<JudgeBackend> clone() const override;
    std::string name() const override { return "http"; }

private:
    HttpBackendConfig config_;
};

/// Sentinel: a check-request variable with this value receives the produced
/// artifact's raw text inside run_with_qc.
inline constexpr const char* kProducedSentinel = "$PRODUCED";

class JudgeGateway {
public:
    JudgeGateway(std::unique_ptr<JudgeBackend> backend, CallLedger* ledger);

    /// Tags subsequent ledger entries with (dialogue, turn) coordinates.
    void set_context(std::string dialogue_id, int turn_index);

    /// Render -> send -> parse, retrying the same prompt on parse failure up
    /// to max_retries extra attempts. Every attempt gets a ledger entry.
    JudgeResponse dispatch(const JudgeRequest& request);

    /// produce -> check loop until the check parses to PASS or max_rounds is
    /// exhausted (QcExhaustedError, FAIL verdicts attached).
    JudgeResponse run_with_qc(const JudgeRequest& produce, const JudgeRequest& check,
                              int max_rounds);

    JudgeBackend& backend() { return *backend_; }

private:
    std::unique_ptr<JudgeBackend> backend_;
    CallLedger* ledger_;
    std::string dialogue_id_;
    int turn_index_ = 0;
    std::mutex mutex_;
};

/// Per-template response validation and normalization, exposed for tests.
/// Returns std::nullopt when the raw text does not satisfy the template's
/// contract.
std::optional<ojson> parse_response(TemplateId id, const std::string& raw_text);

}  // namespace dialeval
