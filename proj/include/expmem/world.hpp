#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expmem/actions.hpp"
#include "expmem/geometry.hpp"

namespace expmem {

struct Rect {
    Point2 min = Point2::Zero();
    Point2 max = Point2::Zero();

    bool contains(const Point2& p) const {
        return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() &&
               p.y() <= max.y();
    }
    bool operator==(const Rect&) const = default;
};

struct SimObject {
    int id = 0;
    std::string name;
    Point2 position = Point2::Zero();
    double extent = 1.0;  // disk radius in cells
    bool fragile = false;
    bool tiny = false;
    bool is_container = false;
    std::vector<int> contents;     // ids resting inside this container
    std::optional<int> supports;   // id of the object resting on top of this one
    bool flat_tool_face = false;
    std::optional<Point2> handle_cell;
    bool cracked = false;  // runtime damage, restored by reset

    bool operator==(const SimObject&) const = default;
};

enum class EffectKind {
    kOk,
    kGraspBlocked,
    kTooSmallContact,
    kCracked,
    kContentsDropped,
    kNotHolding,
    kUnknownObject,
};

const char* to_string(EffectKind k);

struct Effect {
    EffectKind kind = EffectKind::kOk;
    std::string detail;

    bool ok() const { return kind == EffectKind::kOk; }
    bool operator==(const Effect&) const = default;
};

struct WorldState {
    std::vector<SimObject> objects;  // id == index, stable for an episode
    std::optional<int> held;
    std::vector<int> dropped_items;
    Rect table_bounds;

    bool on_table(int id) const;
    bool is_dropped(int id) const;
    const SimObject* find(const std::string& name) const;
    SimObject* find(const std::string& name);
    /// Id of the held object when it exposes a flat tool face.
    std::optional<int> held_tool() const;
    /// Stable structural hash for replay audits.
    std::uint64_t digest() const;

    bool operator==(const WorldState&) const = default;
};

struct SimParams {
    double occlusion_gap = 3.0;
    double gripper_min_contact = 1.0;
    int raster_width = 64;
    int raster_height = 48;
    double push_step = 2.0;

    bool operator==(const SimParams&) const = default;
};

enum class GoalType { kAt, kHeld };

struct Goal {
    GoalType type = GoalType::kAt;
    std::string subject;
    std::string target;  // empty for held goals
    double radius = 3.0;
};

/// Scenario trap taxonomy; values double as the lesson tags a successful
/// episode leaves behind.
enum class Trap {
    kNone,
    kPushObstructionFirst,
    kUseFlatToolForTiny,
    kPushFragileInsteadOfPick,
    kUnloadContainerBeforeLift,
};

const char* to_string(Trap t);
Trap trap_from_string(const std::string& s);

struct ScriptedNote {
    int step = 0;
    std::string text;
};

struct Scenario {
    std::string name;
    std::string instruction;
    int attempts_allowed = 2;
    Trap trap = Trap::kNone;
    Goal goal;
    WorldState initial;
    SimParams params;
    std::vector<ScriptedNote> notes;  // operator notes injected after a step

    static Scenario from_json(const nlohmann::json& j);
    static Scenario load(const std::string& path);
};

struct ObjectView {
    std::string name;
    Point2 position = Point2::Zero();
    double extent = 1.0;
    RasterMask mask;
    std::vector<GraspHypothesis> grasps;
    bool tiny = false;
    bool fragile = false;
    bool is_container = false;
    bool flat_tool_face = false;
    bool cracked = false;
    std::vector<std::string> contains;
    std::optional<std::string> passenger;  // object resting on top of this one
    std::optional<Point2> handle_cell;
    std::vector<std::string> crowded_by;  // unrelated objects within the occlusion gap
};

struct GoalView {
    GoalType type = GoalType::kAt;
    std::string subject;
    std::string target;
    double radius = 3.0;
    bool satisfied = false;
};

/// Simulator snapshot handed to the backends. scene_text and masks are the
/// "visible" channel; the rest is ground truth for the scripted doubles.
struct Observation {
    std::string scene_text;
    int raster_width = 64;
    int raster_height = 48;
    std::vector<ObjectView> objects;  // on-table objects, id order
    std::optional<std::string> held_name;
    bool held_is_flat_tool = false;
    std::vector<std::string> dropped_names;
    Effect last_effect;
    GoalView goal;
    SimParams params;

    const ObjectView* find(const std::string& name) const;
    double raster_diagonal() const {
        return std::hypot(double(raster_width), double(raster_height));
    }
};

/// Applies one action. Returns the successor world and a typed effect; the
/// world value passed in is never mutated. selected_location carries the
/// annotation pipeline's resolved choice (placement spot or push endpoint).
std::pair<WorldState, Effect> execute(const WorldState& world, const Action& action,
                                      const std::optional<Point2>& selected_location,
                                      const SimParams& params);

Observation observe(const WorldState& world, const Scenario& scenario);

/// Operator reset: the exact initial world.
WorldState reset(const Scenario& scenario);

bool goal_satisfied(const WorldState& world, const Scenario& scenario);

/// Cells where an object of the given extent can be set down with clearance
/// from everything currently on the table.
RasterMask free_placement_mask(const Observation& obs, double extent);

}  // namespace expmem
