#include "dialeval/templates.hpp"

#include <array>

#include "dialeval/errors.hpp"

namespace dialeval {

std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::annotate_trajectory: return "annotate_trajectory";
        case TemplateId::generate_dialogue: return "generate_dialogue";
        case TemplateId::annotate_status: return "annotate_status";
        case TemplateId::qc_trajectory: return "qc_trajectory";
        case TemplateId::extract_goals: return "extract_goals";
        case TemplateId::classify_status: return "classify_status";
        case TemplateId::evolve_relations: return "evolve_relations";
        case TemplateId::score_quality: return "score_quality";
        case TemplateId::tiebreak_complexity: return "tiebreak_complexity";
        case TemplateId::existence_check: return "existence_check";
    }
    return "unknown";
}

TemplateId parse_template_id(std::string_view text) {
    static const std::array<TemplateId, kTemplateCount> ids = {
        TemplateId::annotate_trajectory, TemplateId::generate_dialogue,
        TemplateId::annotate_status,     TemplateId::qc_trajectory,
        TemplateId::extract_goals,       TemplateId::classify_status,
        TemplateId::evolve_relations,    TemplateId::score_quality,
        TemplateId::tiebreak_complexity, TemplateId::existence_check,
    };
    for (const TemplateId id : ids) {
        if (text == to_string(id)) return id;
    }
    throw SchemaError("unknown template id: '" + std::string(text) + "'");
}

namespace {

const PromptTemplate kQcTrajectory{
    TemplateId::qc_trajectory,
    {"num_goals", "complexity", "goals_text"},
    R"(You are a quality judge for annotated goal trajectories.

Input:
TRAJECTORY ({num_goals} goals, {complexity} complexity):
{goals_text}

Task:
Assess whether this trajectory is ready for dialogue generation. Check:
- Goal descriptions are clear and specific
- Slot values are realistic (no placeholders)
- All required fields are present
- Annotations are logically consistent

Output format:
Respond with exactly one word: PASS or FAIL)"};

const PromptTemplate kGenerateDialogue{
    TemplateId::generate_dialogue,
    {"complexity", "estimated_turns", "goal_descriptions", "agentic_attrs", "combined_guidance",
     "outcome_guidance"},
    R"(Generate a realistic task-oriented dialogue between USER and SYSTEM.

Requirements:
- Complexity: {complexity}
- Length: {estimated_turns} turns
- Goals: {goal_descriptions}
- Attributes: {agentic_attrs}

{combined_guidance}
{outcome_guidance}

Dialogue Structure:
1. User introduces goals naturally throughout the conversation
2. System works on goals under realistic constraints and limitations
3. Natural obstacles, delays, and preference changes may occur
4. The dialogue ends at a natural stopping point
5. Goal completion may be partial or conditional, reflecting real-world scenarios

Natural Conversation Patterns:
- Users express needs and preferences as they arise
- System responds helpfully while handling practical constraints
- Users may add, revise, or abandon goals based on new information
- Availability, pricing, or technical limitations may surface
- Conversations conclude when users are satisfied or defer decisions

Format: Alternating USER/SYSTEM turns, starting with USER.)"};

const PromptTemplate kAnnotateStatus{
    TemplateId::annotate_status,
    {"last_turn", "goal_descriptions", "terminal_states", "json_template"},
    R"(You are tracking goal status in a task-oriented dialogue. Analyze only the current turn and update statuses based on what actually happens.

Current Turn to Analyze:
{last_turn}

Goals and Current Statuses:
{goal_descriptions}

Status Meanings:
- NOT_MENTIONED: goal exists but has not appeared in the dialogue
- OPEN: mentioned by the user, no action started
- PENDING: system is actively working on the goal
- COMPLETED: goal successfully finished
- FAILED: goal failed due to system or availability issues
- ABANDONED: user cancelled or changed their mind

Critical Rules:
1. Change a goal's status only if something definitive occurs in the current turn
2. PENDING goals may transition only to COMPLETED, FAILED, or ABANDONED
3. If no clear change occurs, preserve the existing status

Terminal States (Do Not Change):
{terminal_states}

Current Statuses (JSON Template):
{json_template}

Instruction:
Respond with only the JSON above, updating only goals whose status clearly changes in the current turn.)"};

const PromptTemplate kExtractGoals{
    TemplateId::extract_goals,
    {"user_utterance", "system_response"},
    R"(Extract user goals from this conversation turn. Use standardized core_content patterns.

Conversation Turn:
User: {user_utterance}
System: {system_response}

Core Content Patterns (examples):
- "book hotel" - hotels, rentals
- "book flight" - flights
- "book ticket" - bus, concert, train
- "check account" - balance, account information
- "search restaurant" - restaurant discovery
- "book restaurant" - reservations

Status Labels:
OPEN, PENDING, COMPLETED, FAILED

Output format (JSON array):
[ {"goal_content": "...", "core_content": "...", "status": "OPEN"}, ... ])"};

const PromptTemplate kClassifyStatus{
    TemplateId::classify_status,
    {"goal_content", "user_utterance", "system_response"},
    R"(Analyze this conversation turn and classify the status of the specific goal below.

Goal to classify:
"{goal_content}"

Conversation Turn:
User: {user_utterance}
System: {system_response}

Status Definitions:
- OPEN: mentioned, no action taken
- PENDING: system processing or requesting information
- COMPLETED: successfully achieved
- FAILED: explicitly failed
- ABANDONED: cancelled by the user

Transition Examples:
- "book a flight" -> OPEN
- "which dates?" -> PENDING
- "flight booked" -> COMPLETED
- "no flights available" -> FAILED
- "never mind" -> ABANDONED

Output format (JSON):
{"status": "STATUS"})"};

const PromptTemplate kEvolveRelations{
    TemplateId::evolve_relations,
    {"new_goal_content", "new_goal_core_content", "related_goals_context"},
    R"(Analyze relationships between a new goal and existing related goals.

New Goal:
Content: {new_goal_content}
Core Content: {new_goal_core_content}

Related Goals (top-k by semantic similarity):
{related_goals_context}

Task:
For each related goal, determine the relationship type:
- link: semantically related but independent
- dependency: new goal depends on the related goal
- none: no significant relationship

Output format (JSON):
{
  "goal_id_1": "relationship_type",
  "goal_id_2": "relationship_type"
})"};

const PromptTemplate kAnnotateTrajectory{
    TemplateId::annotate_trajectory,
    {"num_goals", "goals"},
    R"(Annotate the following sampled goal set for task-oriented dialogue generation.

Sampled Goals ({num_goals}):
{goals}

Task:
For every sampled goal produce:
- a clear natural-language description (content) and a standardized short form (core_content)
- realistic slot names and slot values (no placeholders)
- inter-goal dependencies where one goal requires another to finish first
- metadata flags: async_execution, interleaving, proactivity

Output format (JSON):
{
  "metadata": {"async_execution": false, "interleaving": false, "proactivity": false},
  "goal_list": [
    {"id": "g1", "domain": "...", "intent": "...", "slots": ["..."], "slot_values": {"...": "..."}, "dependencies": [], "content": "...", "core_content": "..."}
  ]
})"};

const PromptTemplate kScoreQuality{
    TemplateId::score_quality,
    {"criterion", "scale", "content"},
    R"(Score the following content for {criterion}.

Content:
{content}

Scale: {scale}

Output format (JSON):
{"score": 0})"};

const PromptTemplate kTiebreakComplexity{
    TemplateId::tiebreak_complexity,
    {"num_goals", "estimated_turns", "dependency_count", "domains", "attributes"},
    R"(Classify the complexity of this dialogue trajectory as medium or complex.

Trajectory:
- Goals: {num_goals}
- Estimated turns: {estimated_turns}
- Dependency count: {dependency_count}
- Domains: {domains}
- Attributes: {attributes}

Consider domain diversity, dependency depth, and behaviors.

Output format (JSON):
{"complexity": "medium"})"};

const PromptTemplate kExistenceCheck{
    TemplateId::existence_check,
    {"candidate_content", "candidate_core_content", "stored_content", "stored_core_content"},
    R"(Decide whether the candidate goal and the stored goal refer to the same user goal.

Candidate Goal:
Content: {candidate_content}
Core Content: {candidate_core_content}

Stored Goal:
Content: {stored_content}
Core Content: {stored_core_content}

Output format (JSON):
{"match": false, "confidence": 0.0})"};

}  // namespace

const PromptTemplate& get_template(TemplateId id) {
    switch (id) {
        case TemplateId::annotate_trajectory: return kAnnotateTrajectory;
        case TemplateId::generate_dialogue: return kGenerateDialogue;
        case TemplateId::annotate_status: return kAnnotateStatus;
        case TemplateId::qc_trajectory: return kQcTrajectory;
        case TemplateId::extract_goals: return kExtractGoals;
        case TemplateId::classify_status: return kClassifyStatus;
        case TemplateId::evolve_relations: return kEvolveRelations;
        case TemplateId::score_quality: return kScoreQuality;
        case TemplateId::tiebreak_complexity: return kTiebreakComplexity;
        case TemplateId::existence_check: return kExistenceCheck;
    }
    return kQcTrajectory;
}

std::string render_template(TemplateId id, const std::map<std::string, std::string>& variables) {
    const PromptTemplate& tpl = get_template(id);
    std::string out = tpl.body;
    for (const std::string& name : tpl.placeholders) {
        auto it = variables.find(name);
        if (it == variables.end()) {
            throw UnboundPlaceholderError(std::string(to_string(id)) + ":" + name);
        }
        const std::string token = "{" + name + "}";
        size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), it->second);
            pos += it->second.size();
        }
    }
    return out;
}

}  // namespace dialeval
