#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace dialeval {

/// Order-preserving JSON everywhere: dataset files keep the schema's key
/// order and reruns stay byte-identical.
using ojson = nlohmann::ordered_json;

/// Extracts the first balanced JSON object or array embedded in free text.
/// Models are told to "respond with only the JSON" but routinely wrap it in
/// prose or code fences; this is the lenient-extract half of lenient-extract /
/// strict-validate parsing.
std::optional<ojson> first_json_payload(std::string_view text);

/// Whitespace token count, used as the token accounting fallback when a
/// backend does not report usage.
long count_whitespace_tokens(std::string_view text);

/// Lowercases ASCII and collapses runs of whitespace to single spaces.
std::string normalize_text(std::string_view text);

/// Formats a double for CSV cells: fixed notation, up to six decimals,
/// trailing zeros trimmed. Deterministic for equal inputs.
std::string format_number(double value);

}  // namespace dialeval
