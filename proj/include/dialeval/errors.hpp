#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dialeval {

/// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory { usage = 1, data = 2, backend = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string message)
        : std::runtime_error(std::move(message)), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(std::string message)
        : Error(ErrorCategory::data, std::move(message)) {}
};

class IllegalTransitionError : public Error {
public:
    IllegalTransitionError(std::string goal_id, std::string from, std::string to)
        : Error(ErrorCategory::data,
                "illegal status transition " + from + " -> " + to + " for goal '" + goal_id + "'"),
          goal_id_(std::move(goal_id)), from_(std::move(from)), to_(std::move(to)) {}

    const std::string& goal_id() const noexcept { return goal_id_; }
    const std::string& from_status() const noexcept { return from_; }
    const std::string& to_status() const noexcept { return to_; }

private:
    std::string goal_id_, from_, to_;
};

class NonMonotonicTurnError : public Error {
public:
    NonMonotonicTurnError(const std::string& goal_id, int turn_index, int last_turn)
        : Error(ErrorCategory::data,
                "non-monotonic turn index " + std::to_string(turn_index) + " for goal '" + goal_id +
                    "' (last recorded turn " + std::to_string(last_turn) + ")") {}
};

class SnapshotMismatchError : public Error {
public:
    SnapshotMismatchError(int turn_id, std::string detail)
        : Error(ErrorCategory::data,
                "all_goals snapshot mismatch at turn " + std::to_string(turn_id) + ": " + detail),
          turn_id_(turn_id) {}

    int turn_id() const noexcept { return turn_id_; }

private:
    int turn_id_;
};

class EmptyCorpusError : public Error {
public:
    explicit EmptyCorpusError(std::string message = "seed corpus contains no goal sequences")
        : Error(ErrorCategory::data, std::move(message)) {}
};

class UnsatisfiableError : public Error {
public:
    UnsatisfiableError(int target_size, int step_budget)
        : Error(ErrorCategory::data,
                "could not collect a connected set of " + std::to_string(target_size) +
                    " goals within the step budget of " + std::to_string(step_budget)) {}
};

class UnboundPlaceholderError : public Error {
public:
    explicit UnboundPlaceholderError(const std::string& name)
        : Error(ErrorCategory::usage, "template placeholder '{" + name + "}' has no binding") {}
};

class NoScriptEntryError : public Error {
public:
    explicit NoScriptEntryError(const std::string& detail)
        : Error(ErrorCategory::backend, "no script entry matches request: " + detail) {}
};

class BackendUnavailableError : public Error {
public:
    explicit BackendUnavailableError(std::string message)
        : Error(ErrorCategory::backend, std::move(message)) {}
};

class ParseExhaustedError : public Error {
public:
    ParseExhaustedError(std::string template_name, int attempts, std::string raw_text)
        : Error(ErrorCategory::backend,
                "response for template " + template_name + " unparseable after " +
                    std::to_string(attempts) + " attempts"),
          raw_text_(std::move(raw_text)) {}

    const std::string& raw_text() const noexcept { return raw_text_; }

private:
    std::string raw_text_;
};

class QcExhaustedError : public Error {
public:
    QcExhaustedError(int rounds, std::vector<std::string> verdicts)
        : Error(ErrorCategory::backend,
                "quality control failed after " + std::to_string(rounds) + " rounds"),
          verdicts_(std::move(verdicts)) {}

    const std::vector<std::string>& verdicts() const noexcept { return verdicts_; }

private:
    std::vector<std::string> verdicts_;
};

class MalformedTranscriptError : public Error {
public:
    explicit MalformedTranscriptError(std::string message)
        : Error(ErrorCategory::data, std::move(message)) {}
};

class UnknownIdError : public Error {
public:
    explicit UnknownIdError(const std::string& id)
        : Error(ErrorCategory::data, "no goal with id '" + id + "' in store") {}
};

class CyclicDependenciesError : public Error {
public:
    explicit CyclicDependenciesError(std::string message = "dependency graph contains a cycle")
        : Error(ErrorCategory::data, std::move(message)) {}
};

class MissingFileError : public Error {
public:
    explicit MissingFileError(const std::string& path)
        : Error(ErrorCategory::data, "cannot open file: " + path) {}
};

class MalformedLineError : public Error {
public:
    MalformedLineError(const std::string& path, size_t line_number, const std::string& detail)
        : Error(ErrorCategory::data,
                path + ":" + std::to_string(line_number) + ": " + detail) {}
};

}  // namespace dialeval
