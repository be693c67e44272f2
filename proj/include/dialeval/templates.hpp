#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dialeval {

/// Every LLM touchpoint goes through one of these prompt templates.
enum class TemplateId {
    annotate_trajectory,
    generate_dialogue,
    annotate_status,
    qc_trajectory,
    extract_goals,
    classify_status,
    evolve_relations,
    score_quality,
    tiebreak_complexity,
    existence_check,
};

inline constexpr int kTemplateCount = 10;

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

struct PromptTemplate {
    TemplateId id;
    std::vector<std::string> placeholders;  ///< every {name} that must be bound
    std::string body;
};

const PromptTemplate& get_template(TemplateId id);

/// Substitutes every declared {placeholder}; literal braces elsewhere in the
/// body (JSON examples) are left untouched. Throws UnboundPlaceholderError
/// when a declared placeholder has no binding; extra variables are ignored.
std::string render_template(TemplateId id, const std::map<std::string, std::string>& variables);

}  // namespace dialeval
