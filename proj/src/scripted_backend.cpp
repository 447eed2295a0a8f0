#include "expmem/scripted_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace expmem {

const char* to_string(PlannerPolicy p) {
    switch (p) {
        case PlannerPolicy::kNaive: return "scripted-naive";
        case PlannerPolicy::kReflective: return "scripted-reflective";
        case PlannerPolicy::kMemoryAware: return "scripted-memory-aware";
    }
    return "scripted-naive";
}

ScriptedBackend::ScriptedBackend(PlannerPolicy policy)
    : policy_(policy), name_(expmem::to_string(policy)) {}

std::string ScriptedBackend::describe_scene(const std::string&, const Observation& obs) {
    return obs.scene_text;
}

namespace {

enum class Corrective { kNone, kClearObstruction, kToolPush, kPushInstead, kUnload };

bool contains_ci(const std::string& haystack, const std::string& needle) {
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) { return std::tolower(a) == std::tolower(b); });
    return it != haystack.end();
}

Corrective corrective_from_text(const std::string& text) {
    if (contains_ci(text, "occluded by") || contains_ci(text, "occlud"))
        return Corrective::kClearObstruction;
    if (contains_ci(text, "too small") || contains_ci(text, "small"))
        return Corrective::kToolPush;
    if (contains_ci(text, "cracked") || contains_ci(text, "fragile"))
        return Corrective::kPushInstead;
    if (contains_ci(text, "dropped")) return Corrective::kUnload;
    return Corrective::kNone;
}

Corrective corrective_from_lesson(const std::string& lesson) {
    if (lesson == "push_obstruction_first") return Corrective::kClearObstruction;
    if (lesson == "use_flat_tool_for_tiny") return Corrective::kToolPush;
    if (lesson == "push_fragile_instead_of_pick") return Corrective::kPushInstead;
    if (lesson == "unload_container_before_lift") return Corrective::kUnload;
    return Corrective::kNone;
}

/// Latest failure cause or operator note in the ledger, newest first.
Corrective corrective_from_stm(const StmLedger& stm) {
    int best_step = -1;
    Corrective picked = Corrective::kNone;
    for (const auto& e : stm.entries) {
        if (!e.feedback.failed()) continue;
        const Corrective c = corrective_from_text(e.feedback.failure_cause);
        if (c != Corrective::kNone && e.step >= best_step) {
            best_step = e.step;
            picked = c;
        }
    }
    for (const auto& n : stm.operator_notes) {
        const Corrective c = corrective_from_text(n.text);
        if (c != Corrective::kNone && n.step >= best_step) {
            best_step = n.step;
            picked = c;
        }
    }
    return picked;
}

const ObjectView* first_flat_tool(const Observation& obs, const std::string& exclude) {
    for (const auto& v : obs.objects)
        if (v.flat_tool_face && v.name != exclude) return &v;
    return nullptr;
}

/// Name of the object the subject carries (container content or passenger).
std::string subject_load(const ObjectView& subject) {
    if (!subject.contains.empty()) return subject.contains.front();
    if (subject.passenger) return *subject.passenger;
    return {};
}

PushDirection direction_toward(const Observation& obs, const Point2& from,
                               const Point2& to) {
    if (to.x() == from.x())
        return from.x() * 2.0 < double(obs.raster_width) ? PushDirection::kRight
                                                         : PushDirection::kLeft;
    return to.x() > from.x() ? PushDirection::kRight : PushDirection::kLeft;
}

/// Push an obstruction to whichever side moves it away from the kept object.
PushDirection direction_away(const Observation& obs, const Point2& obstruction,
                             const Point2& kept) {
    if (obstruction.x() == kept.x())
        return obstruction.x() * 2.0 < double(obs.raster_width) ? PushDirection::kLeft
                                                                : PushDirection::kRight;
    return obstruction.x() > kept.x() ? PushDirection::kRight : PushDirection::kLeft;
}

Action make_pick(const Observation& obs, const std::string& target, bool use_handle,
                 const std::string& reasoning) {
    Action a;
    a.skill = Skill::kPick;
    a.target_object = target;
    const ObjectView* view = obs.find(target);
    if (use_handle && view && view->handle_cell) {
        a.grasp_part = "handle";
        a.specific_grasp_required = true;
    }
    a.action_description = "Pick up the " + target + ".";
    a.scene_description = obs.scene_text;
    a.reasoning = reasoning;
    return a;
}

Action make_place(const Observation& obs, const std::string& object,
                  const std::string& location, bool precise,
                  const std::string& reasoning) {
    Action a;
    a.skill = Skill::kPlace;
    a.target_object = object;
    a.placement_location = location;
    a.precise_placement_spot_required = precise;
    a.action_description = "Place the " + object + " at the " + location + ".";
    a.scene_description = obs.scene_text;
    a.reasoning = reasoning;
    return a;
}

Action make_push(const Observation& obs, const std::string& object, PushDirection dir,
                 const std::string& reasoning) {
    Action a;
    a.skill = Skill::kPush;
    a.target_object = object;
    a.push_direction = dir;
    a.action_description =
        std::string("Push the ") + object + " to the " + expmem::to_string(dir) + ".";
    a.scene_description = obs.scene_text;
    a.reasoning = reasoning;
    return a;
}

/// Direct plan from the instruction's goal, ignoring any trap: pick the
/// subject, or place it once held.
Action naive_plan(const Observation& obs, bool handle_aware) {
    const std::string& subject = obs.goal.subject;
    if (obs.held_name && *obs.held_name != subject)
        return make_place(obs, *obs.held_name, "table", false,
                          "The gripper must be free before handling the " + subject + ".");
    if (obs.goal.type == GoalType::kAt && obs.held_name && *obs.held_name == subject)
        return make_place(obs, subject, obs.goal.target, false,
                          "The " + subject + " is already held; placing it at the " +
                              obs.goal.target + " completes the instruction.");
    return make_pick(obs, subject, handle_aware,
                     "The " + subject + " is the object named in the instruction.");
}

Action apply_corrective(Corrective corrective, const Observation& obs) {
    const std::string& subject = obs.goal.subject;
    const ObjectView* subject_view = obs.find(subject);

    switch (corrective) {
        case Corrective::kClearObstruction: {
            if (subject_view && !subject_view->crowded_by.empty()) {
                const std::string& obstruction = subject_view->crowded_by.front();
                const ObjectView* ov = obs.find(obstruction);
                const PushDirection dir =
                    ov ? direction_away(obs, ov->position, subject_view->position)
                       : PushDirection::kRight;
                return make_push(obs, obstruction, dir,
                                 "The " + obstruction + " blocks the approach to the " +
                                     subject + "; pushing it clear first.");
            }
            break;  // already clear
        }
        case Corrective::kToolPush: {
            const ObjectView* tool = first_flat_tool(obs, subject);
            if (obs.held_is_flat_tool || !tool) {
                const ObjectView* dest = obs.find(obs.goal.target);
                if (subject_view && dest)
                    return make_push(
                        obs, subject,
                        direction_toward(obs, subject_view->position, dest->position),
                        "With the flat tool in hand, pushing the " + subject +
                            " gives enough contact to move it.");
                break;
            }
            return make_pick(obs, tool->name, true,
                             "The " + subject + " is too small for the bare gripper; "
                             "the " + tool->name + " can serve as a pushing tool.");
        }
        case Corrective::kPushInstead: {
            const ObjectView* dest = obs.find(obs.goal.target);
            if (subject_view && dest)
                return make_push(
                    obs, subject,
                    direction_toward(obs, subject_view->position, dest->position),
                    "Grasping risks damage; pushing the " + subject +
                        " toward the " + obs.goal.target + " is safe.");
            break;
        }
        case Corrective::kUnload: {
            if (subject_view) {
                const std::string load = subject_load(*subject_view);
                if (!load.empty())
                    return make_pick(obs, load, true,
                                     "The " + load + " rests on the " + subject +
                                         " and would fall; moving it first.");
            }
            if (obs.held_name && *obs.held_name != subject)
                return make_place(obs, *obs.held_name, "table", true,
                                  "Setting the " + *obs.held_name +
                                      " well out of the way before lifting the " +
                                      subject + ".");
            return make_pick(obs, subject, true,
                             "The " + subject + " is clear now and can be lifted.");
        }
        case Corrective::kNone: break;
    }
    return naive_plan(obs, true);
}

/// True when the lesson's situation actually shows in the current scene.
bool lesson_applies(Corrective corrective, const Observation& obs) {
    const ObjectView* subject = obs.find(obs.goal.subject);
    switch (corrective) {
        case Corrective::kClearObstruction:
            return subject && !subject->crowded_by.empty();
        case Corrective::kToolPush:
            return subject && subject->tiny &&
                   (obs.held_is_flat_tool || first_flat_tool(obs, subject->name));
        case Corrective::kPushInstead:
            return subject && subject->fragile;
        case Corrective::kUnload:
            return (subject && !subject_load(*subject).empty()) ||
                   (obs.held_name && *obs.held_name != obs.goal.subject);
        case Corrective::kNone: return false;
    }
    return false;
}

}  // namespace

Action ScriptedBackend::plan_action(const std::string& instruction,
                                    const Observation& obs, const StmLedger& stm,
                                    const RetrievedContext& context) {
    if (instruction.empty()) throw std::invalid_argument("plan_action: empty instruction");

    if (policy_ == PlannerPolicy::kNaive) return naive_plan(obs, false);

    if (policy_ == PlannerPolicy::kMemoryAware) {
        // The planner fixates on the first retrieved experience that carries a
        // lesson; a crowded or shuffled context can therefore surface an
        // inapplicable one, in which case no grounding is gained.
        for (const auto& entry : context.entries) {
            const Corrective c = corrective_from_lesson(entry.lesson);
            if (c == Corrective::kNone) continue;
            if (lesson_applies(c, obs)) return apply_corrective(c, obs);
            break;
        }
    }

    const Corrective from_stm = corrective_from_stm(stm);
    if (from_stm != Corrective::kNone) return apply_corrective(from_stm, obs);
    return naive_plan(obs, true);
}

namespace {

int nearest_candidate(const AnnotatedView& view, const Point2& point) {
    int best_label = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& c : view.candidates) {
        const double d2 = (c.location - point).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best_label = c.label;
        }
    }
    return best_label;
}

}  // namespace

int ScriptedBackend::choose_grasp_section(const Action& action, const AnnotatedView& view,
                                          const Observation& obs) {
    if (view.candidates.empty())
        throw std::invalid_argument("choose_grasp_section: no candidates");
    const ObjectView* target = obs.find(action.target_object);
    if (target && target->handle_cell)
        return nearest_candidate(view, *target->handle_cell);
    return nearest_candidate(view, target ? target->position : Point2::Zero());
}

int ScriptedBackend::choose_placement(const Action&, const AnnotatedView& view,
                                      const Observation& obs) {
    if (view.candidates.empty())
        throw std::invalid_argument("choose_placement: no candidates");
    int best_label = 0;
    double best_clearance = -1.0;
    for (const auto& c : view.candidates) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& v : obs.objects)
            nearest = std::min(nearest, (v.position - c.location).norm() - v.extent);
        if (obs.objects.empty()) nearest = 0.0;
        if (nearest > best_clearance) {
            best_clearance = nearest;
            best_label = c.label;
        }
    }
    return best_label;
}

int ScriptedBackend::choose_push_spot(const Action& action, const AnnotatedView& view,
                                      const Observation& obs) {
    if (view.candidates.empty())
        throw std::invalid_argument("choose_push_spot: no candidates");
    const ObjectView* pushed = obs.find(action.target_object);

    if (action.target_object == obs.goal.subject && obs.goal.type == GoalType::kAt) {
        // Task push: first endpoint inside the goal region; otherwise the one
        // that gets closest.
        const ObjectView* dest = obs.find(obs.goal.target);
        if (dest) {
            for (const auto& c : view.candidates)
                if ((c.location - dest->position).norm() <= obs.goal.radius)
                    return c.label;
            int best_label = view.candidates.front().label;
            double best_d = std::numeric_limits<double>::infinity();
            for (const auto& c : view.candidates) {
                const double d = (c.location - dest->position).norm();
                if (d < best_d) {
                    best_d = d;
                    best_label = c.label;
                }
            }
            return best_label;
        }
    }

    // Corrective push: first endpoint that frees the goal subject's approach.
    const ObjectView* subject = obs.find(obs.goal.subject);
    if (subject && pushed) {
        for (const auto& c : view.candidates) {
            const double gap = (c.location - subject->position).norm() -
                               pushed->extent - subject->extent;
            if (gap >= obs.params.occlusion_gap) return c.label;
        }
    }
    // Fall back to the farthest-reaching option.
    return view.candidates.back().label;
}

FeedbackRecord ScriptedBackend::evaluate_action(const Action& action,
                                                const Observation& obs,
                                                const std::string&) {
    FeedbackRecord r;
    r.completed = obs.goal.satisfied;
    r.reasoning = "Compared the requested action with the scene that followed it.";

    const Effect& effect = obs.last_effect;
    const std::string& target = action.target_object;
    switch (effect.kind) {
        case EffectKind::kOk: {
            r.status = ActionStatus::kSuccessful;
            if (!r.completed) {
                if (obs.goal.type == GoalType::kAt && obs.held_name &&
                    *obs.held_name == obs.goal.subject)
                    r.next_step_suggestion = "place the " + obs.goal.subject +
                                             " at the " + obs.goal.target;
                else if (obs.goal.type == GoalType::kHeld && obs.held_name &&
                         *obs.held_name != obs.goal.subject)
                    r.next_step_suggestion = "place the " + *obs.held_name +
                                             " on the table, then grasp the " +
                                             obs.goal.subject;
                else
                    r.next_step_suggestion = "continue toward the goal";
            }
            break;
        }
        case EffectKind::kGraspBlocked: {
            r.status = ActionStatus::kFailed;
            if (effect.detail.find("occluded by the ") != std::string::npos) {
                const std::string obstruction =
                    effect.detail.substr(effect.detail.find("occluded by the ") + 16);
                r.failure_cause = "target occluded by " + obstruction;
                r.next_step_suggestion = "push the " + obstruction + " away";
            } else if (effect.detail.find("too small") != std::string::npos) {
                r.failure_cause = "object too small, insufficient contact";
                r.next_step_suggestion = "use a flat tool to push the " + target;
            } else {
                r.failure_cause = effect.detail;
                r.next_step_suggestion = "free the gripper before the next grasp";
            }
            break;
        }
        case EffectKind::kTooSmallContact:
            r.status = ActionStatus::kFailed;
            r.failure_cause = "object too small, insufficient contact";
            r.next_step_suggestion = "use a flat tool to push the " + target;
            break;
        case EffectKind::kCracked:
            r.status = ActionStatus::kFailed;
            r.failure_cause = "object cracked while grasping";
            r.next_step_suggestion = "push the " + target + " instead of grasping it";
            break;
        case EffectKind::kContentsDropped: {
            r.status = ActionStatus::kFailed;
            r.failure_cause = effect.detail;  // "<item> dropped from <container>"
            const auto pos = effect.detail.find(" dropped from ");
            const std::string item = effect.detail.substr(0, pos);
            r.next_step_suggestion =
                "move the " + item + " to the table before picking up the " + target;
            r.completed = false;
            break;
        }
        case EffectKind::kNotHolding:
            r.status = ActionStatus::kFailed;
            r.failure_cause = "nothing is held";
            r.next_step_suggestion = "pick an object before placing";
            break;
        case EffectKind::kUnknownObject:
            r.status = ActionStatus::kFailed;
            r.failure_cause = effect.detail;
            r.next_step_suggestion = "target an object visible on the table";
            break;
    }
    if (r.failed()) r.completed = false;
    return r;
}

ExperienceSummary ScriptedBackend::summarize_experience(const StmLedger& stm) {
    if (stm.entries.empty())
        throw std::invalid_argument("summarize_experience: empty short-term memory");
    if (!stm.entries.back().feedback.completed)
        throw std::invalid_argument(
            "summarize_experience: final entry must mark the task completed");

    // The lesson is the first trap the episode actually hit.
    Corrective corrective = Corrective::kNone;
    std::string occluder, dropped_item, dropped_from;
    for (const auto& e : stm.entries) {
        if (!e.feedback.failed()) continue;
        const Corrective c = corrective_from_text(e.feedback.failure_cause);
        if (c == Corrective::kNone) continue;
        if (corrective == Corrective::kNone) corrective = c;
        const std::string& cause = e.feedback.failure_cause;
        if (auto p = cause.find("occluded by "); p != std::string::npos && occluder.empty())
            occluder = cause.substr(p + 12);
        if (auto p = cause.find(" dropped from "); p != std::string::npos && dropped_item.empty()) {
            dropped_item = cause.substr(0, p);
            dropped_from = cause.substr(p + 14);
        }
    }
    if (corrective == Corrective::kNone) {
        for (const auto& n : stm.operator_notes) {
            const Corrective c = corrective_from_text(n.text);
            if (c != Corrective::kNone) {
                corrective = c;
                break;
            }
        }
    }

    std::string tool;
    if (corrective == Corrective::kToolPush) {
        bool after_failure = false;
        for (const auto& e : stm.entries) {
            if (e.feedback.failed()) after_failure = true;
            else if (after_failure && e.action.skill == Skill::kPick)
                { tool = e.action.target_object; break; }
        }
    }

    ExperienceSummary out;
    std::string text = "The robot completed the task after " +
                       std::to_string(stm.entries.size()) + " steps.";
    switch (corrective) {
        case Corrective::kClearObstruction:
            out.lesson = "push_obstruction_first";
            text += " The first grasp failed because the target was occluded by the " +
                    (occluder.empty() ? std::string("obstruction") : occluder) +
                    ", so the robot pushed the " +
                    (occluder.empty() ? std::string("obstruction") : occluder) +
                    " away and then retried the grasp, which succeeded.";
            break;
        case Corrective::kToolPush:
            out.lesson = "use_flat_tool_for_tiny";
            text += " Pushing the tiny object with the bare gripper gave insufficient "
                    "contact, so the robot picked up the " +
                    (tool.empty() ? std::string("flat tool") : tool) +
                    " and used its flat face to push the object to the goal.";
            break;
        case Corrective::kPushInstead:
            out.lesson = "push_fragile_instead_of_pick";
            text += " Grasping cracked the fragile object, so after the scene was "
                    "rebuilt the robot pushed the object to the goal instead of "
                    "picking it up.";
            break;
        case Corrective::kUnload:
            out.lesson = "unload_container_before_lift";
            text += " Lifting dropped the " +
                    (dropped_item.empty() ? std::string("loose item") : dropped_item) +
                    ", so the robot moved the " +
                    (dropped_item.empty() ? std::string("item") : dropped_item) +
                    " to the table before lifting the " +
                    (dropped_from.empty() ? std::string("container") : dropped_from) +
                    ", which succeeded.";
            break;
        case Corrective::kNone:
            out.lesson = "none";
            text += " Every step went as planned with no failures.";
            break;
    }
    if (!stm.operator_notes.empty())
        text += " A human observation helped the robot adjust its approach.";
    out.summary = std::move(text);
    return out;
}

}  // namespace expmem
