#include "expmem/remote_backend.hpp"

#include <sstream>

#include "expmem/errors.hpp"

namespace expmem {

namespace {

const char* kPreamble =
    "You are a helpful assistant for a legged robot equipped with a single arm "
    "and a two-finger gripper.\n\n";

const char* kDescribePrompt =
    "You specialize in generating accurate scene descriptions.\n\n"
    "You always apply chain-of-thought reasoning to ensure accurate and "
    "comprehensive scene understanding.\n\n"
    "The user's instruction: {instruction}\n\n"
    "Based on your observation of the image, provide a short scene description "
    "focusing on the spatial relationships between the target object and the "
    "nearby objects the robot may need to interact with.";

const char* kPlannerPrompt =
    "You specialize in task planning and can learn or adapt from the previous "
    "experience.\n\n"
    "Always apply chain-of-thought reasoning and think step by step before making "
    "any final decision.\n\n"
    "The robot received this instruction from the user: {instruction}. Considering "
    "the given image, along with the robot's capabilities and experience, what is "
    "the most appropriate next action to efficiently fulfill the user's instruction?\n\n"
    "Here is the short-term memory for the current task so far for reference: "
    "{short_term_memory}. Please learn from this experience history, especially "
    "the suggestions for next action, to plan the next action.\n\n"
    "The following lifelong memories represent the robot's previous activities and "
    "are intended to showcase its capabilities and experience. Please first "
    "identify similar scenarios and learn from them to avoid similar failures: "
    "{long_term_memory}\n\n"
    "For the push action, choose the most efficient direction to push. For "
    "example, if the target is on the left in the image, the robot should prefer "
    "to push the object to the left if both directions are viable. Conversely, If "
    "the object is on the right side, the robot should prefer pushing it rightward "
    "if both directions are viable.\n\n"
    "For pick or place actions, indicate whether the object must be grasped at a "
    "specific section to ensure a stable and proper grasp. This will enable the "
    "image annotation tool and trigger a follow-up query to achieve more precise "
    "grasping. Note that due to imperfect part segmentation, this should be "
    "activated if the object needs to be held by a specific part, for example, to "
    "avoid contaminating food or to prevent damage to the object.\n\n"
    "If you plan to use a tool, first check whether it's ready to use. For "
    "example, if you intend to use the axes on the table, you may need to grasp it "
    "first.\n\n"
    "For all actions, always pay attention to the spatial relationships between "
    "objects, and ensure the robot interacts with only one object at a time. Avoid "
    "giving or parameters that could cause the robot to unintentionally interact "
    "with the wrong object.";

const char* kGraspSelectorPrompt =
    "You specialize in semantic object manipulation.\n\n"
    "You always apply chain-of-thought reasoning to thoroughly analyze each "
    "situation before making a final decision.\n\n"
    "Based on your observation of the image, determine the optimal grasping "
    "section of the object to ensure stable handling and successfully fulfill the "
    "given action: {action}. Avoid contaminating food, damaging the object, or "
    "compromising safety. Select the most appropriate grasping section (by number) "
    "that best fulfills the action requirements, as a human would.";

const char* kPlacementSelectorPrompt =
    "You specialize in spatial analysis and object placement.\n\n"
    "You always apply chain-of-thought reasoning to thoroughly analyze each "
    "situation before making a final decision.\n\n"
    "Based on your observation of the given image, select the optimal placement "
    "location for the object that ensures both stability and accessibility for "
    "performing the action: {action}.";

const char* kPushSelectorPrompt =
    "You specialize in semantic object pushing.\n\n"
    "You always apply chain-of-thought reasoning to thoroughly analyze each "
    "situation before making a final decision.\n\n"
    "Based on the given image, determine the optimal final position of the gripper "
    "to complete the following action efficiently, ensuring stability and "
    "minimizing unnecessary pushing distance: {action}.\n\n"
    "The initial position (0) represents the gripper's position before pushing. "
    "The provided numbers indicate the possible final gripper positions after the "
    "push. These positions refer specifically to the gripper's movement, not the "
    "object's.\n\n"
    "Assume that the relative position between the gripper and the object remains "
    "unchanged before and after the push.\n\n"
    "Select the optimal final gripper position number.";

const char* kDetectorPrompt =
    "You specialize in detecting whether an action or task has been successfully "
    "completed, and you provide clear, constructive feedback or alternatives when "
    "needed.\n\n"
    "You always apply chain-of-thought reasoning to thoroughly analyze each "
    "situation before reaching a conclusion.\n\n"
    "Please analyze the provided image to determine whether the given action and "
    "current task have been successfully completed.\n\n"
    "If an action has failed, analyze the spatial relationship between the target "
    "object and its surrounding objects to identify the cause of failure.\n\n"
    "Learn from the failure cause and consider another way to achieve the goal. "
    "This may involve interacting with other relevant objects in the environment "
    "if necessary.\n\n"
    "Considering the robot only has a two-finger gripper, it might not be able to "
    "interact with things very precisely.\n\n"
    "If there are any tools or objects in the image that could help achieve the "
    "goal, please consider using them. Be creative! Everything on the table could "
    "potentially be used as a tool.\n\n"
    "Action to detect: {action}\n\n"
    "The user's instruction: {instruction}";

const char* kSummarizerPrompt =
    "You specialize in converting the robot's experiences into concise task "
    "summaries.\n\n"
    "You always apply chain-of-thought reasoning to thoroughly analyze each "
    "situation before performing the conversion.\n\n"
    "Please convert the following robot short-term memory into a single, concise "
    "paragraph summary.\n\n"
    "Robot short-term memory: {short_term_memory}";

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
    const std::string token = "{" + key + "}";
    for (auto pos = text.find(token); pos != std::string::npos;
         pos = text.find(token, pos + value.size()))
        text.replace(pos, token.size(), value);
    return text;
}

/// Text stand-in for the camera frame: the scene narration plus per-object
/// raster summaries.
std::string render_observation(const Observation& obs) {
    std::ostringstream out;
    out << "Image (" << obs.raster_width << "x" << obs.raster_height
        << " raster): " << obs.scene_text << "\n";
    for (const auto& v : obs.objects)
        out << "- " << v.name << " at (" << v.position.x() << ", " << v.position.y()
            << "), extent " << v.extent << "\n";
    return out.str();
}

std::string render_view(const AnnotatedView& view) {
    std::ostringstream out;
    out << "Annotated options:\n";
    for (const auto& d : view.descriptions) out << "- " << d << "\n";
    return out.str();
}

}  // namespace

std::pair<std::string, nlohmann::json> parse_single_tool_call(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ProtocolViolation("response body is not valid JSON");
    if (!j.contains("choices") || j["choices"].empty())
        throw ProtocolViolation("response carries no choices");
    const auto& message = j["choices"][0].value("message", nlohmann::json::object());
    if (!message.contains("tool_calls") || !message["tool_calls"].is_array() ||
        message["tool_calls"].empty())
        throw ProtocolViolation("response carries no tool call");
    if (message["tool_calls"].size() != 1)
        throw ProtocolViolation("expected exactly one tool call, got " +
                                std::to_string(message["tool_calls"].size()));
    const auto& fn = message["tool_calls"][0].value("function", nlohmann::json::object());
    if (!fn.contains("name") || !fn.contains("arguments"))
        throw ProtocolViolation("tool call is missing name or arguments");

    nlohmann::json args;
    if (fn["arguments"].is_string()) {
        args = nlohmann::json::parse(fn["arguments"].get<std::string>(), nullptr, false);
        if (args.is_discarded())
            throw ProtocolViolation("tool call arguments are not valid JSON");
    } else {
        args = fn["arguments"];
    }
    return {fn["name"].get<std::string>(), args};
}

RemoteBackend::RemoteBackend(std::shared_ptr<HttpTransport> transport, std::string model,
                             std::string api_key, RetryPolicy policy)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      policy_(policy) {}

std::pair<std::string, nlohmann::json> RemoteBackend::call(
    const std::string& prompt, const std::vector<wire::Json>& tools) {
    wire::Json req;
    req["model"] = model_;
    req["messages"] = wire::Json::array();
    wire::Json msg;
    msg["role"] = "user";
    msg["content"] = kPreamble + prompt;
    req["messages"].push_back(std::move(msg));
    req["tools"] = tools;
    req["tool_choice"] = "required";

    HttpHeaders headers = {{"Authorization", "Bearer " + api_key_}};
    const HttpResponse res = post_with_retry(*transport_, "/v1/chat/completions",
                                             req.dump(), headers, policy_);
    return parse_single_tool_call(res.body);
}

std::string RemoteBackend::describe_scene(const std::string& instruction,
                                          const Observation& obs) {
    const std::string prompt =
        substitute(kDescribePrompt, "instruction", instruction) + "\n\n" +
        render_observation(obs);
    auto [name, args] = call(prompt, {wire::schema_describe_scene()});
    if (name != "describe_scene") throw ProtocolViolation("unknown tool name: " + name);
    wire::validate_arguments(wire::schema_describe_scene(), args);
    const auto text = args.at("scene_description").get<std::string>();
    if (text.empty()) throw ProtocolViolation("describe_scene: empty scene_description");
    return text;
}

Action RemoteBackend::plan_action(const std::string& instruction, const Observation& obs,
                                  const StmLedger& stm, const RetrievedContext& context) {
    if (instruction.empty()) throw std::invalid_argument("plan_action: empty instruction");
    std::string prompt = kPlannerPrompt;
    prompt = substitute(prompt, "instruction", instruction);
    prompt = substitute(prompt, "short_term_memory",
                        stm.empty() ? "(empty)" : stm.to_text());
    prompt = substitute(prompt, "long_term_memory",
                        context.entries.empty() ? "(none)" : context.to_text());
    prompt += "\n\n" + render_observation(obs);

    auto [name, args] = call(prompt, wire::planner_tools());
    return wire::action_from_tool_call(name, args);
}

namespace {

int read_label(const wire::Json& schema, const nlohmann::json& args,
               const std::string& expected_name, const std::string& field,
               const std::string& got_name, const AnnotatedView& view) {
    if (got_name != expected_name)
        throw ProtocolViolation("unknown tool name: " + got_name);
    wire::validate_arguments(schema, args);
    const int label = args.at(field).get<int>();
    for (const auto& c : view.candidates)
        if (c.label == label) return label;
    throw ProtocolViolation(expected_name + ": label " + std::to_string(label) +
                            " is not among the annotated options");
}

}  // namespace

int RemoteBackend::choose_grasp_section(const Action& action, const AnnotatedView& view,
                                        const Observation&) {
    const auto schema = wire::schema_choose_section(int(view.candidates.size()));
    const std::string prompt =
        substitute(kGraspSelectorPrompt, "action", action.action_description) + "\n\n" +
        render_view(view);
    auto [name, args] = call(prompt, {schema});
    return read_label(schema, args, "choose_section", "grasp_section_number", name, view);
}

int RemoteBackend::choose_placement(const Action& action, const AnnotatedView& view,
                                    const Observation&) {
    const auto schema = wire::schema_choose_location(int(view.candidates.size()));
    const std::string prompt =
        substitute(kPlacementSelectorPrompt, "action", action.action_description) +
        "\n\n" + render_view(view);
    auto [name, args] = call(prompt, {schema});
    return read_label(schema, args, "choose_location", "best_placement_location", name,
                      view);
}

int RemoteBackend::choose_push_spot(const Action& action, const AnnotatedView& view,
                                    const Observation&) {
    const auto schema = wire::schema_select_position(int(view.candidates.size()));
    const std::string prompt =
        substitute(kPushSelectorPrompt, "action", action.action_description) + "\n\n" +
        render_view(view);
    auto [name, args] = call(prompt, {schema});
    return read_label(schema, args, "select_position", "gripper_position_number", name,
                      view);
}

FeedbackRecord RemoteBackend::evaluate_action(const Action& action,
                                              const Observation& obs,
                                              const std::string& instruction) {
    std::string prompt = kDetectorPrompt;
    prompt = substitute(prompt, "action", action.action_description);
    prompt = substitute(prompt, "instruction", instruction);
    prompt += "\n\n" + render_observation(obs);

    auto [name, args] = call(prompt, {wire::schema_evaluate_action()});
    if (name != "evaluate_action_status_and_issues")
        throw ProtocolViolation("unknown tool name: " + name);
    return wire::feedback_from_tool_call(args);
}

ExperienceSummary RemoteBackend::summarize_experience(const StmLedger& stm) {
    if (stm.empty())
        throw std::invalid_argument("summarize_experience: empty short-term memory");
    const std::string prompt =
        substitute(kSummarizerPrompt, "short_term_memory", stm.to_text());
    auto [name, args] = call(prompt, {wire::schema_summarize_experience()});
    if (name != "summarize_robot_experience")
        throw ProtocolViolation("unknown tool name: " + name);
    wire::validate_arguments(wire::schema_summarize_experience(), args);
    return {args.at("summary").get<std::string>(), "none"};
}

}  // namespace expmem
