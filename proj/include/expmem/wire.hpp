#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "expmem/actions.hpp"
#include "expmem/geometry.hpp"

namespace expmem::wire {

// Insertion-ordered JSON keeps the serialized schemas byte-stable.
using Json = nlohmann::ordered_json;

Json schema_describe_scene();
Json schema_pick_object();
Json schema_place_object();
Json schema_push_object();
Json schema_choose_section(int option_count);
Json schema_choose_location(int option_count);
Json schema_select_position(int option_count);
Json schema_evaluate_action();
Json schema_summarize_experience();

/// The planner's toolbox: pick_object, place_object, push_object.
std::vector<Json> planner_tools();

/// Flat validation of tool-call arguments against one of the schemas above:
/// required fields present, primitive types correct, enum membership. Throws
/// ProtocolViolation on any miss.
void validate_arguments(const Json& tool_schema, const nlohmann::json& arguments);

/// Tool-call form {"name": ..., "arguments": {...}}.
Json action_to_tool_call(const Action& action);
Action action_from_tool_call(const std::string& name, const nlohmann::json& arguments);

Json feedback_to_tool_call(const FeedbackRecord& feedback);
FeedbackRecord feedback_from_tool_call(const nlohmann::json& arguments);

Json annotated_view_to_json(const AnnotatedView& view);
AnnotatedView annotated_view_from_json(const nlohmann::json& j);

Json mask_to_json(const RasterMask& mask);
RasterMask mask_from_json(const nlohmann::json& j);

}  // namespace expmem::wire
