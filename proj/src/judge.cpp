#include "dialeval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <set>

#include <httplib.h>

#include "dialeval/goal_model.hpp"

namespace dialeval {

// ---------------------------------------------------------------------------
// CallLedger
// ---------------------------------------------------------------------------

void CallLedger::append(LedgerEntry entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

void CallLedger::extend(const CallLedger& other) {
    const std::vector<LedgerEntry> incoming = other.entries();
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.insert(entries_.end(), incoming.begin(), incoming.end());
}

std::vector<LedgerEntry> CallLedger::entries() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

size_t CallLedger::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

long CallLedger::total_input_tokens() const {
    std::lock_guard<std::mutex> lock(mutex_);
    long total = 0;
    for (const LedgerEntry& e : entries_) total += e.input_tokens;
    return total;
}

long CallLedger::total_output_tokens() const {
    std::lock_guard<std::mutex> lock(mutex_);
    long total = 0;
    for (const LedgerEntry& e : entries_) total += e.output_tokens;
    return total;
}

ojson CallLedger::to_json() const {
    ojson arr = ojson::array();
    for (const LedgerEntry& e : entries()) {
        ojson row = ojson::object();
        row["dialogue_id"] = e.dialogue_id;
        row["turn_index"] = e.turn_index;
        row["template_id"] = std::string(to_string(e.template_id));
        row["input_tokens"] = e.input_tokens;
        row["output_tokens"] = e.output_tokens;
        row["latency_ms"] = e.latency_ms;
        row["tokens_estimated"] = e.tokens_estimated;
        arr.push_back(row);
    }
    return arr;
}

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries)
    : entries_(std::move(entries)) {
    std::set<std::pair<int, std::string>> keys;
    for (const ScriptEntry& e : entries_) {
        if (e.responses.empty()) {
            throw SchemaError("script entry for template '" +
                              std::string(to_string(e.template_id)) + "' has no responses");
        }
        if (!keys.insert({static_cast<int>(e.template_id), e.pattern}).second) {
            throw SchemaError("duplicate script key (" + std::string(to_string(e.template_id)) +
                              ", \"" + e.pattern + "\")");
        }
    }
    compiled_.reserve(entries_.size());
    for (const ScriptEntry& e : entries_) {
        compiled_.emplace_back(e.pattern.empty() ? std::string(".*") : e.pattern,
                               std::regex::ECMAScript);
    }
    cursors_.assign(entries_.size(), 0);
}

ScriptedBackend ScriptedBackend::from_json(const ojson& j) {
    std::vector<ScriptEntry> entries;
    if (!j.contains("entries") || !j["entries"].is_array()) {
        throw SchemaError("script file must contain an \"entries\" array");
    }
    for (const auto& row : j["entries"]) {
        ScriptEntry e;
        e.template_id = parse_template_id(row.at("template").get<std::string>());
        e.pattern = row.value("pattern", "");
        if (row.contains("responses")) {
            e.responses = row["responses"].get<std::vector<std::string>>();
        } else if (row.contains("response")) {
            e.responses = {row["response"].get<std::string>()};
        }
        if (row.contains("confidence")) e.confidence = row["confidence"].get<double>();
        entries.push_back(std::move(e));
    }
    return ScriptedBackend(std::move(entries));
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    ojson j = ojson::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("script file is not valid JSON: " + path);
    return from_json(j);
}

BackendResult ScriptedBackend::complete(TemplateId id, const std::string& prompt) {
    // Patterned entries take precedence over the per-template default, in
    // script order; the default fires only when no pattern matches.
    int chosen = -1;
    int fallback = -1;
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].template_id != id) continue;
        if (entries_[i].pattern.empty()) {
            if (fallback < 0) fallback = static_cast<int>(i);
            continue;
        }
        if (std::regex_search(prompt, compiled_[i])) {
            chosen = static_cast<int>(i);
            break;
        }
    }
    if (chosen < 0) chosen = fallback;
    if (chosen < 0) {
        throw NoScriptEntryError("template " + std::string(to_string(id)) +
                                 ", prompt head: " + prompt.substr(0, 80));
    }

    ScriptEntry& entry = entries_[static_cast<size_t>(chosen)];
    size_t& cursor = cursors_[static_cast<size_t>(chosen)];
    const std::string& response = entry.responses[std::min(cursor, entry.responses.size() - 1)];
    ++cursor;

    BackendResult result;
    result.text = response;
    result.input_tokens = count_whitespace_tokens(prompt);
    result.output_tokens = count_whitespace_tokens(response);
    result.latency_ms = 0.0;
    result.confidence = entry.confidence;
    return result;
}

std::unique_ptr<JudgeBackend> ScriptedBackend::clone() const {
    return std::make_unique<ScriptedBackend>(entries_);
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw BackendUnavailableError("http backend requires an endpoint");
    }
}

BackendResult HttpBackend::complete(TemplateId, const std::string& prompt) {
    const size_t scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw BackendUnavailableError("endpoint must include a scheme: " + config_.endpoint);
    }
    const size_t path_start = config_.endpoint.find('/', scheme_end + 3);
    const std::string base = path_start == std::string::npos
                                 ? config_.endpoint
                                 : config_.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos
                                 ? std::string("/")
                                 : config_.endpoint.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    ojson body = ojson::object();
    body["model"] = config_.model;
    body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", prompt}}});

    const auto started = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
    const auto finished = std::chrono::steady_clock::now();

    if (!res) {
        throw BackendUnavailableError("http request to " + config_.endpoint +
                                      " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendUnavailableError("http backend returned status " +
                                      std::to_string(res->status));
    }

    ojson payload = ojson::parse(res->body, nullptr, false);
    if (payload.is_discarded()) {
        throw BackendUnavailableError("http backend returned non-JSON body");
    }

    BackendResult result;
    result.latency_ms =
        std::chrono::duration<double, std::milli>(finished - started).count();
    try {
        result.text = payload.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const ojson::exception&) {
        throw BackendUnavailableError("http backend response missing choices[0].message.content");
    }
    if (payload.contains("usage")) {
        const auto& usage = payload["usage"];
        if (usage.contains("prompt_tokens"))
            result.input_tokens = usage["prompt_tokens"].get<long>();
        if (usage.contains("completion_tokens"))
            result.output_tokens = usage["completion_tokens"].get<long>();
    }
    return result;
}

std::unique_ptr<JudgeBackend> HttpBackend::clone() const {
    return std::make_unique<HttpBackend>(config_);
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

namespace {

bool is_word_boundary(const std::string& text, size_t pos, size_t len) {
    const auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    if (pos > 0 && alpha(text[pos - 1])) return false;
    if (pos + len < text.size() && alpha(text[pos + len])) return false;
    return true;
}

std::optional<size_t> find_word(const std::string& text, const std::string& word) {
    size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        if (is_word_boundary(text, pos, word.size())) return pos;
        pos += word.size();
    }
    return std::nullopt;
}

std::optional<GoalStatus> try_parse_status(const std::string& text) {
    try {
        return parse_goal_status(text);
    } catch (const SchemaError&) {
        return std::nullopt;
    }
}

}  // namespace

std::optional<ojson> parse_response(TemplateId id, const std::string& raw_text) {
    switch (id) {
        case TemplateId::qc_trajectory: {
            // "Respond with exactly one word: PASS or FAIL". The earlier of
            // the two words wins when a model emits both.
            const auto pass = find_word(raw_text, "PASS");
            const auto fail = find_word(raw_text, "FAIL");
            if (pass && (!fail || *pass < *fail)) return ojson("PASS");
            if (fail) return ojson("FAIL");
            return std::nullopt;
        }
        case TemplateId::generate_dialogue:
            // Free-form transcript; structure is enforced by the parser in
            // the synthesis pipeline.
            return raw_text.empty() ? std::nullopt : std::optional<ojson>(ojson(raw_text));
        case TemplateId::extract_goals: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_array()) return std::nullopt;
            for (const auto& item : *payload) {
                if (!item.is_object()) return std::nullopt;
                if (!item.contains("goal_content") || !item.contains("core_content") ||
                    !item.contains("status"))
                    return std::nullopt;
                if (!try_parse_status(item["status"].get<std::string>())) return std::nullopt;
            }
            return payload;
        }
        case TemplateId::classify_status: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object() || !payload->contains("status"))
                return std::nullopt;
            if (!(*payload)["status"].is_string()) return std::nullopt;
            if (!try_parse_status((*payload)["status"].get<std::string>())) return std::nullopt;
            return payload;
        }
        case TemplateId::evolve_relations: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object()) return std::nullopt;
            for (auto it = payload->begin(); it != payload->end(); ++it) {
                if (!it.value().is_string()) return std::nullopt;
                const std::string rel = it.value().get<std::string>();
                if (rel != "link" && rel != "dependency" && rel != "none") return std::nullopt;
            }
            return payload;
        }
        case TemplateId::score_quality: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object() || !payload->contains("score"))
                return std::nullopt;
            if (!(*payload)["score"].is_number()) return std::nullopt;
            return payload;
        }
        case TemplateId::tiebreak_complexity: {
            auto payload = first_json_payload(raw_text);
            if (payload && payload->is_object() && payload->contains("complexity") &&
                (*payload)["complexity"].is_string()) {
                const std::string c = (*payload)["complexity"].get<std::string>();
                if (c == "medium" || c == "complex") return payload;
                return std::nullopt;
            }
            // Bare-word fallback.
            const std::string lowered = normalize_text(raw_text);
            if (lowered.find("complex") != std::string::npos)
                return ojson{{"complexity", "complex"}};
            if (lowered.find("medium") != std::string::npos)
                return ojson{{"complexity", "medium"}};
            return std::nullopt;
        }
        case TemplateId::existence_check: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object() || !payload->contains("match"))
                return std::nullopt;
            if (!(*payload)["match"].is_boolean()) return std::nullopt;
            if (payload->contains("confidence") && !(*payload)["confidence"].is_number())
                return std::nullopt;
            return payload;
        }
        case TemplateId::annotate_trajectory: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object() || !payload->contains("goal_list") ||
                !(*payload)["goal_list"].is_array())
                return std::nullopt;
            return payload;
        }
        case TemplateId::annotate_status: {
            auto payload = first_json_payload(raw_text);
            if (!payload || !payload->is_object()) return std::nullopt;
            for (auto it = payload->begin(); it != payload->end(); ++it) {
                if (!it.value().is_string()) return std::nullopt;
                if (!try_parse_status(it.value().get<std::string>())) return std::nullopt;
            }
            return payload;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// JudgeGateway
// ---------------------------------------------------------------------------

JudgeGateway::JudgeGateway(std::unique_ptr<JudgeBackend> backend, CallLedger* ledger)
    : backend_(std::move(backend)), ledger_(ledger) {}

void JudgeGateway::set_context(std::string dialogue_id, int turn_index) {
    std::lock_guard<std::mutex> lock(mutex_);
    dialogue_id_ = std::move(dialogue_id);
    turn_index_ = turn_index;
}

JudgeResponse JudgeGateway::dispatch(const JudgeRequest& request) {
    const std::string prompt = render_template(request.template_id, request.variables);

    std::string last_raw;
    const int max_attempts = request.max_retries + 1;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        BackendResult result;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            result = backend_->complete(request.template_id, prompt);

            if (ledger_) {
                LedgerEntry entry;
                entry.dialogue_id = dialogue_id_;
                entry.turn_index = turn_index_;
                entry.template_id = request.template_id;
                entry.tokens_estimated = !result.input_tokens || !result.output_tokens;
                entry.input_tokens =
                    result.input_tokens ? *result.input_tokens : count_whitespace_tokens(prompt);
                entry.output_tokens = result.output_tokens ? *result.output_tokens
                                                           : count_whitespace_tokens(result.text);
                entry.latency_ms = result.latency_ms;
                ledger_->append(entry);
            }
        }

        last_raw = result.text;
        if (auto parsed = parse_response(request.template_id, result.text)) {
            JudgeResponse response;
            response.raw_text = result.text;
            response.parsed = std::move(*parsed);
            response.confidence = result.confidence;
            if (!response.confidence && response.parsed.is_object() &&
                response.parsed.contains("confidence")) {
                response.confidence = response.parsed["confidence"].get<double>();
            }
            response.input_tokens =
                result.input_tokens ? *result.input_tokens : count_whitespace_tokens(prompt);
            response.output_tokens = result.output_tokens ? *result.output_tokens
                                                          : count_whitespace_tokens(result.text);
            response.latency_ms = result.latency_ms;
            response.attempts = attempt + 1;
            return response;
        }
    }
    throw ParseExhaustedError(std::string(to_string(request.template_id)), max_attempts,
                              last_raw);
}

JudgeResponse JudgeGateway::run_with_qc(const JudgeRequest& produce, const JudgeRequest& check,
                                        int max_rounds) {
    std::vector<std::string> verdicts;
    for (int round = 0; round < max_rounds; ++round) {
        JudgeResponse artifact = dispatch(produce);

        JudgeRequest bound = check;
        for (auto& [name, value] : bound.variables) {
            if (value == kProducedSentinel) value = artifact.raw_text;
        }
        JudgeResponse verdict = dispatch(bound);
        if (!verdict.parsed.is_string()) {
            throw SchemaError("run_with_qc check template must yield a PASS/FAIL verdict");
        }
        const std::string word = verdict.parsed.get<std::string>();
        verdicts.push_back(word);
        if (word == "PASS") {
            artifact.qc_passed = true;
            artifact.qc_rounds = round + 1;
            return artifact;
        }
    }
    throw QcExhaustedError(max_rounds, std::move(verdicts));
}

}  // namespace dialeval
