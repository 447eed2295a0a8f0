#include "expmem/wire.hpp"

#include <stdexcept>

#include "expmem/errors.hpp"

namespace expmem {

const char* to_string(Skill s) {
    switch (s) {
        case Skill::kPick: return "pick";
        case Skill::kPlace: return "place";
        case Skill::kPush: return "push";
    }
    return "pick";
}

const char* to_string(ActionStatus s) {
    switch (s) {
        case ActionStatus::kSuccessful: return "successful";
        case ActionStatus::kUncertain: return "uncertain";
        case ActionStatus::kFailed: return "failed";
    }
    return "uncertain";
}

ActionStatus action_status_from_string(const std::string& s) {
    if (s == "successful") return ActionStatus::kSuccessful;
    if (s == "uncertain") return ActionStatus::kUncertain;
    if (s == "failed") return ActionStatus::kFailed;
    throw ProtocolViolation("unknown action_status: " + s);
}

const char* to_string(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::kRag: return "rag";
        case RetrievalMode::kRandomK: return "random_k";
        case RetrievalMode::kAll: return "all";
        case RetrievalMode::kNone: return "none";
    }
    return "none";
}

namespace wire {

namespace {

Json function_tool(const std::string& name, const std::string& description,
                   Json properties, std::vector<std::string> required) {
    Json params;
    params["type"] = "object";
    params["properties"] = std::move(properties);
    params["required"] = required;
    params["additionalProperties"] = false;

    Json fn;
    fn["name"] = name;
    fn["description"] = description;
    fn["strict"] = true;
    fn["parameters"] = std::move(params);

    Json tool;
    tool["type"] = "function";
    tool["function"] = std::move(fn);
    return tool;
}

Json string_prop(const std::string& description) {
    Json p;
    p["type"] = "string";
    p["description"] = description;
    return p;
}

Json bool_prop(const std::string& description) {
    Json p;
    p["type"] = "boolean";
    p["description"] = description;
    return p;
}

Json numbered_enum_prop(int option_count, const std::string& description) {
    Json p;
    p["type"] = "integer";
    std::vector<int> options;
    options.reserve(std::size_t(option_count));
    for (int i = 0; i < option_count; ++i) options.push_back(i + 1);
    p["enum"] = options;
    p["description"] = description;
    return p;
}

}  // namespace

Json schema_describe_scene() {
    Json props;
    props["reasoning"] = string_prop(
        "Describe what was observed in the image to generate the scene description.");
    props["scene_description"] = string_prop(
        "A brief summary of the scene, focusing on relevant spatial relationships.");
    return function_tool(
        "describe_scene",
        "Provide a brief description of the environment surrounding the target object.",
        std::move(props), {"reasoning", "scene_description"});
}

Json schema_pick_object() {
    Json props;
    props["scene_description"] = string_prop(
        "Short description of the object's surroundings, especially the spatial "
        "relationships with nearby objects.");
    props["reasoning"] = string_prop("Provide reasoning for each parameter choice.");
    props["target_object"] = string_prop("Specify the object the robot should pick.");
    props["grasp_part"] = string_prop(
        "Specify the part of the object to be grasped. Leave blank if no commonly "
        "recognized specific part is relevant to the action.");
    props["specific_grasp_required"] = bool_prop(
        "Indicate whether the object must be grasped at a specific section to ensure "
        "a stable and proper grasp.");
    props["action_description"] = string_prop(
        "Briefly describe the action to be performed, focusing only on what the robot "
        "should do.");
    return function_tool(
        "pick_object",
        "Pick a specified object, providing details about the grasping area and "
        "surrounding environment.",
        std::move(props),
        {"scene_description", "reasoning", "target_object", "grasp_part",
         "specific_grasp_required", "action_description"});
}

Json schema_place_object() {
    Json props;
    props["scene_description"] = string_prop(
        "Detailed description of the surroundings where the object will be placed, "
        "including nearby objects and obstacles.");
    props["reasoning"] = string_prop("Provide reasoning for each parameter choice.");
    props["target_object"] = string_prop(
        "Specify the name or type of the object that the robot should place.");
    props["placement_location"] = string_prop(
        "The specific name of the location where the robot should place the object.");
    props["precise_placement_spot_required"] = bool_prop(
        "Indicate whether the object must be placed in a specific spot within the "
        "placement area.");
    props["action_description"] = string_prop(
        "Briefly describe the action to be performed, focusing only on what the robot "
        "should do.");
    return function_tool(
        "place_object",
        "Place a specified object at a designated location, including context about "
        "positioning and the surrounding environment.",
        std::move(props),
        {"scene_description", "reasoning", "target_object", "placement_location",
         "precise_placement_spot_required", "action_description"});
}

Json schema_push_object() {
    Json props;
    props["scene_description"] = string_prop(
        "Detailed description of the scene, including spatial relationships with "
        "nearby objects. Also describe the object's location in the image frame "
        "(e.g., left or right side).");
    props["reasoning"] = string_prop("Provide reasoning for each parameter choice.");
    props["object_to_push"] = string_prop(
        "Specify the object to be pushed by the robot's gripper.");
    Json dir;
    dir["type"] = "string";
    dir["enum"] = std::vector<std::string>{"left", "right"};
    dir["description"] = "The direction in which to push the object in the image view.";
    props["push_direction"] = std::move(dir);
    props["action_description"] = string_prop(
        "Briefly describe the action to be performed, focusing only on what the robot "
        "should do.");
    return function_tool(
        "push_object", "Push the specified object by the minimum required distance.",
        std::move(props),
        {"scene_description", "reasoning", "object_to_push", "push_direction",
         "action_description"});
}

Json schema_choose_section(int option_count) {
    Json props;
    props["reasoning"] = string_prop(
        "Explain the rationale behind selecting the chosen section.");
    props["object_part_description"] = string_prop(
        "Describe each numbered section and the corresponding part of the object.");
    props["grasp_section_number"] = numbered_enum_prop(
        option_count,
        "Choose the number corresponding to the best section for grasping the target "
        "object.");
    return function_tool(
        "choose_section",
        "Select the most stable and effective section of the object to grasp in order "
        "to perform the action.",
        std::move(props),
        {"reasoning", "object_part_description", "grasp_section_number"});
}

Json schema_choose_location(int option_count) {
    Json props;
    props["reasoning"] = string_prop(
        "Explain the rationale behind selecting each location, focusing on stability, "
        "accessibility, and suitability for the task.");
    props["placement_spot_description"] = string_prop(
        "Describe each numbered option and its corresponding placement spot.");
    props["best_placement_location"] = numbered_enum_prop(
        option_count,
        "Choose the number corresponding to the most suitable placement location for "
        "the object.");
    return function_tool(
        "choose_location",
        "Select the most stable and effective location to place the object in order "
        "to fulfill the task.",
        std::move(props),
        {"reasoning", "placement_spot_description", "best_placement_location"});
}

Json schema_select_position(int option_count) {
    Json props;
    props["reasoning"] = string_prop(
        "Explain the rationale behind selecting the final gripper position.");
    props["gripper_position_description"] = string_prop(
        "A list of descriptions corresponding to each possible gripper position.");
    props["gripper_position_number"] = numbered_enum_prop(
        option_count,
        "Select the number corresponding to the optimal final gripper position to "
        "complete the task.");
    return function_tool(
        "select_position",
        "Select the most effective final gripper position to successfully complete "
        "the action while minimizing unnecessary movement.",
        std::move(props),
        {"reasoning", "gripper_position_description", "gripper_position_number"});
}

Json schema_evaluate_action() {
    Json props;
    props["reasoning"] = string_prop(
        "Provide a brief explanation of the reasoning behind the action status and "
        "issue identification.");
    Json status;
    status["type"] = "string";
    status["enum"] = std::vector<std::string>{"successful", "uncertain", "failed"};
    status["description"] =
        "Indicate whether the current action was completed successfully, failed, or "
        "had an uncertain outcome.";
    props["action_status"] = std::move(status);
    props["failure_cause"] = string_prop(
        "Provide one short, specific reason for the action's outcome.");
    props["next_step_suggestions"] = string_prop(
        "Provide one short and specific suggestion for the next action needed to "
        "fulfill the task.");
    props["is_task_completed"] = bool_prop(
        "Set to true if the task has been successfully completed, that is, if the "
        "intended result has been achieved.");
    return function_tool(
        "evaluate_action_status_and_issues",
        "Evaluate whether the current action or task was successfully completed, and "
        "identify any issues that may impact the task's overall feasibility.",
        std::move(props),
        {"reasoning", "action_status", "failure_cause", "next_step_suggestions",
         "is_task_completed"});
}

Json schema_summarize_experience() {
    Json props;
    props["summary"] = string_prop(
        "A paragraph summarizing the sequence of actions from the given memory log, "
        "including any failures, adjustments made by the robot, or observations by "
        "the operator.");
    return function_tool(
        "summarize_robot_experience",
        "Summarize the robot's short-term experience in a paragraph using the given "
        "memory logs. Include reflections if the robot learned or adjusted its "
        "behavior, or any human observations.",
        std::move(props), {"summary"});
}

std::vector<Json> planner_tools() {
    return {schema_pick_object(), schema_place_object(), schema_push_object()};
}

void validate_arguments(const Json& tool_schema, const nlohmann::json& arguments) {
    const auto& fn = tool_schema.at("function");
    const std::string name = fn.at("name").get<std::string>();
    const auto& params = fn.at("parameters");
    const auto& props = params.at("properties");

    if (!arguments.is_object())
        throw ProtocolViolation(name + ": arguments must be an object");

    for (const auto& field : params.at("required")) {
        const std::string key = field.get<std::string>();
        if (!arguments.contains(key))
            throw ProtocolViolation(name + ": missing required field '" + key + "'");
    }
    for (auto it = arguments.begin(); it != arguments.end(); ++it) {
        if (!props.contains(it.key()))
            throw ProtocolViolation(name + ": unexpected field '" + it.key() + "'");
        const auto& prop = props.at(it.key());
        const std::string type = prop.at("type").get<std::string>();
        const auto& value = it.value();
        if (type == "string" && !value.is_string())
            throw ProtocolViolation(name + ": field '" + it.key() + "' must be a string");
        if (type == "boolean" && !value.is_boolean())
            throw ProtocolViolation(name + ": field '" + it.key() + "' must be a boolean");
        if (type == "integer" && !value.is_number_integer())
            throw ProtocolViolation(name + ": field '" + it.key() + "' must be an integer");
        if (prop.contains("enum")) {
            bool found = false;
            for (const auto& allowed : prop.at("enum"))
                if (allowed == value) found = true;
            if (!found)
                throw ProtocolViolation(name + ": field '" + it.key() +
                                        "' outside the allowed enum");
        }
    }
}

Json action_to_tool_call(const Action& action) {
    Json args;
    args["scene_description"] = action.scene_description;
    args["reasoning"] = action.reasoning;
    switch (action.skill) {
        case Skill::kPick:
            args["target_object"] = action.target_object;
            args["grasp_part"] = action.grasp_part;
            args["specific_grasp_required"] = action.specific_grasp_required;
            break;
        case Skill::kPlace:
            args["target_object"] = action.target_object;
            args["placement_location"] = action.placement_location;
            args["precise_placement_spot_required"] =
                action.precise_placement_spot_required;
            break;
        case Skill::kPush:
            args["object_to_push"] = action.target_object;
            args["push_direction"] =
                to_string(action.push_direction.value_or(PushDirection::kRight));
            break;
    }
    args["action_description"] = action.action_description;

    Json call;
    switch (action.skill) {
        case Skill::kPick: call["name"] = "pick_object"; break;
        case Skill::kPlace: call["name"] = "place_object"; break;
        case Skill::kPush: call["name"] = "push_object"; break;
    }
    call["arguments"] = std::move(args);
    return call;
}

Action action_from_tool_call(const std::string& name, const nlohmann::json& arguments) {
    Action a;
    if (name == "pick_object") {
        validate_arguments(schema_pick_object(), arguments);
        a.skill = Skill::kPick;
        a.target_object = arguments.at("target_object").get<std::string>();
        a.grasp_part = arguments.at("grasp_part").get<std::string>();
        a.specific_grasp_required = arguments.at("specific_grasp_required").get<bool>();
    } else if (name == "place_object") {
        validate_arguments(schema_place_object(), arguments);
        a.skill = Skill::kPlace;
        a.target_object = arguments.at("target_object").get<std::string>();
        a.placement_location = arguments.at("placement_location").get<std::string>();
        a.precise_placement_spot_required =
            arguments.at("precise_placement_spot_required").get<bool>();
    } else if (name == "push_object") {
        validate_arguments(schema_push_object(), arguments);
        a.skill = Skill::kPush;
        a.target_object = arguments.at("object_to_push").get<std::string>();
        a.push_direction = arguments.at("push_direction").get<std::string>() == "left"
                               ? PushDirection::kLeft
                               : PushDirection::kRight;
    } else {
        throw ProtocolViolation("unknown tool name: " + name);
    }
    a.scene_description = arguments.at("scene_description").get<std::string>();
    a.reasoning = arguments.at("reasoning").get<std::string>();
    a.action_description = arguments.at("action_description").get<std::string>();
    return a;
}

Json feedback_to_tool_call(const FeedbackRecord& feedback) {
    Json args;
    args["reasoning"] = feedback.reasoning;
    args["action_status"] = to_string(feedback.status);
    args["failure_cause"] = feedback.failure_cause;
    args["next_step_suggestions"] = feedback.next_step_suggestion;
    args["is_task_completed"] = feedback.completed;

    Json call;
    call["name"] = "evaluate_action_status_and_issues";
    call["arguments"] = std::move(args);
    return call;
}

FeedbackRecord feedback_from_tool_call(const nlohmann::json& arguments) {
    validate_arguments(schema_evaluate_action(), arguments);
    FeedbackRecord r;
    r.reasoning = arguments.at("reasoning").get<std::string>();
    r.status = action_status_from_string(arguments.at("action_status").get<std::string>());
    r.failure_cause = arguments.at("failure_cause").get<std::string>();
    r.next_step_suggestion = arguments.at("next_step_suggestions").get<std::string>();
    r.completed = arguments.at("is_task_completed").get<bool>();
    if (r.completed && r.status == ActionStatus::kFailed)
        throw ProtocolViolation(
            "evaluate_action_status_and_issues: completed task cannot have failed status");
    return r;
}

Json mask_to_json(const RasterMask& mask) {
    Json j;
    j["width"] = mask.width;
    j["height"] = mask.height;
    std::vector<std::vector<int>> cells;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) cells.push_back({x, y});
    j["cells"] = cells;
    return j;
}

RasterMask mask_from_json(const nlohmann::json& j) {
    RasterMask m(j.at("width").get<int>(), j.at("height").get<int>());
    for (const auto& cell : j.at("cells"))
        m.set(cell.at(0).get<int>(), cell.at(1).get<int>());
    return m;
}

Json annotated_view_to_json(const AnnotatedView& view) {
    Json j;
    j["base"] = mask_to_json(view.base);
    Json cands = Json::array();
    for (const auto& c : view.candidates) {
        Json jc;
        jc["label"] = c.label;
        jc["x"] = c.location.x();
        jc["y"] = c.location.y();
        jc["mask"] = c.mask ? mask_to_json(*c.mask) : Json(nullptr);
        cands.push_back(std::move(jc));
    }
    j["candidates"] = std::move(cands);
    j["descriptions"] = view.descriptions;
    return j;
}

AnnotatedView annotated_view_from_json(const nlohmann::json& j) {
    AnnotatedView view;
    view.base = mask_from_json(j.at("base"));
    for (const auto& jc : j.at("candidates")) {
        Candidate c;
        c.label = jc.at("label").get<int>();
        c.location = Point2(jc.at("x").get<double>(), jc.at("y").get<double>());
        if (!jc.at("mask").is_null()) c.mask = mask_from_json(jc.at("mask"));
        view.candidates.push_back(std::move(c));
    }
    view.descriptions = j.at("descriptions").get<std::vector<std::string>>();
    return view;
}

}  // namespace wire

void StmLedger::add(int step, Action action, FeedbackRecord feedback) {
    if (!entries.empty() && step <= entries.back().step)
        throw std::invalid_argument("StmLedger: step indices must strictly increase");
    entries.push_back({step, std::move(action), std::move(feedback)});
}

void StmLedger::add_note(int step, const std::string& text) {
    if (text.empty()) throw std::invalid_argument("StmLedger: empty operator note");
    operator_notes.push_back({step, text});
}

std::string StmLedger::to_text() const {
    std::string out;
    std::size_t note_idx = 0;
    auto emit_notes_up_to = [&](int step) {
        while (note_idx < operator_notes.size() &&
               operator_notes[note_idx].step <= step) {
            out += "Observation from human: " + operator_notes[note_idx].text + "\n";
            ++note_idx;
        }
    };
    for (const auto& e : entries) {
        emit_notes_up_to(e.step - 1);
        out += "At time step " + std::to_string(e.step) + ", the robot tried: " +
               e.action.action_description + " Outcome: " +
               to_string(e.feedback.status) + ".";
        if (!e.feedback.failure_cause.empty())
            out += " Cause: " + e.feedback.failure_cause + ".";
        if (!e.feedback.next_step_suggestion.empty())
            out += " Suggestion for next action: " + e.feedback.next_step_suggestion + ".";
        out += "\n";
    }
    emit_notes_up_to(entries.empty() ? 1 << 20 : entries.back().step);
    return out;
}

std::string RetrievedContext::to_text() const {
    std::string out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out += "long-term memory " + std::to_string(i + 1) + "\n";
        out += "Instruction: " + entries[i].key.instruction + "\n";
        out += "Scene: " + entries[i].key.scene_description + "\n";
        out += "Experience: " + entries[i].summary + "\n";
    }
    return out;
}

}  // namespace expmem
