#include "expmem/world.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "expmem/errors.hpp"
#include "expmem/util.hpp"

namespace expmem {

const char* to_string(EffectKind k) {
    switch (k) {
        case EffectKind::kOk: return "ok";
        case EffectKind::kGraspBlocked: return "grasp_blocked";
        case EffectKind::kTooSmallContact: return "too_small_contact";
        case EffectKind::kCracked: return "cracked";
        case EffectKind::kContentsDropped: return "contents_dropped";
        case EffectKind::kNotHolding: return "not_holding";
        case EffectKind::kUnknownObject: return "unknown_object";
    }
    return "ok";
}

const char* to_string(Trap t) {
    switch (t) {
        case Trap::kNone: return "none";
        case Trap::kPushObstructionFirst: return "push_obstruction_first";
        case Trap::kUseFlatToolForTiny: return "use_flat_tool_for_tiny";
        case Trap::kPushFragileInsteadOfPick: return "push_fragile_instead_of_pick";
        case Trap::kUnloadContainerBeforeLift: return "unload_container_before_lift";
    }
    return "none";
}

Trap trap_from_string(const std::string& s) {
    if (s == "none") return Trap::kNone;
    if (s == "push_obstruction_first") return Trap::kPushObstructionFirst;
    if (s == "use_flat_tool_for_tiny") return Trap::kUseFlatToolForTiny;
    if (s == "push_fragile_instead_of_pick") return Trap::kPushFragileInsteadOfPick;
    if (s == "unload_container_before_lift") return Trap::kUnloadContainerBeforeLift;
    throw std::invalid_argument("unknown trap: " + s);
}

bool WorldState::on_table(int id) const {
    if (held && *held == id) return false;
    return !is_dropped(id);
}

bool WorldState::is_dropped(int id) const {
    return std::find(dropped_items.begin(), dropped_items.end(), id) !=
           dropped_items.end();
}

const SimObject* WorldState::find(const std::string& name) const {
    for (const auto& o : objects)
        if (o.name == name) return &o;
    return nullptr;
}

SimObject* WorldState::find(const std::string& name) {
    for (auto& o : objects)
        if (o.name == name) return &o;
    return nullptr;
}

std::optional<int> WorldState::held_tool() const {
    if (held && objects[std::size_t(*held)].flat_tool_face) return held;
    return std::nullopt;
}

std::uint64_t WorldState::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_double = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h = fnv1a64_u64(bits, h);
    };
    for (const auto& o : objects) {
        h = fnv1a64(o.name, h);
        mix_double(o.position.x());
        mix_double(o.position.y());
        mix_double(o.extent);
        h = fnv1a64_u64(std::uint64_t(o.fragile) | (std::uint64_t(o.tiny) << 1) |
                            (std::uint64_t(o.is_container) << 2) |
                            (std::uint64_t(o.flat_tool_face) << 3) |
                            (std::uint64_t(o.cracked) << 4),
                        h);
        for (int c : o.contents) h = fnv1a64_u64(std::uint64_t(c) + 1, h);
        h = fnv1a64_u64(o.supports ? std::uint64_t(*o.supports) + 1 : 0, h);
    }
    h = fnv1a64_u64(held ? std::uint64_t(*held) + 1 : 0, h);
    for (int d : dropped_items) h = fnv1a64_u64(std::uint64_t(d) + 1, h);
    return h;
}

namespace {

double free_gap(const SimObject& a, const SimObject& b) {
    return (a.position - b.position).norm() - a.extent - b.extent;
}

bool related(const SimObject& a, const SimObject& b) {
    const bool a_in_b = std::find(b.contents.begin(), b.contents.end(), a.id) !=
                        b.contents.end();
    const bool b_in_a = std::find(a.contents.begin(), a.contents.end(), b.id) !=
                        a.contents.end();
    const bool a_on_b = b.supports && *b.supports == a.id;
    const bool b_on_a = a.supports && *a.supports == b.id;
    return a_in_b || b_in_a || a_on_b || b_on_a;
}

Point2 clamp_to(const Rect& bounds, const Point2& p, double margin) {
    return Point2(std::clamp(p.x(), bounds.min.x() + margin, bounds.max.x() - margin),
                  std::clamp(p.y(), bounds.min.y() + margin, bounds.max.y() - margin));
}

/// Deterministic free spot adjacent to `anchor` for an object of the given
/// extent: rings of eight compass offsets at growing distance.
Point2 adjacent_free_spot(const WorldState& world, const Point2& anchor,
                          double anchor_extent, double extent, int skip_id) {
    const double base = anchor_extent + extent + 1.0;
    const Point2 dirs[8] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                            {1, 1},  {-1, 1}, {1, -1}, {-1, -1}};
    for (int ring = 0; ring < 8; ++ring) {
        const double d = base + 2.0 * ring;
        for (const Point2& dir : dirs) {
            Point2 p = anchor + dir.normalized() * d;
            if (!world.table_bounds.contains(p)) continue;
            bool clear = true;
            for (const auto& o : world.objects) {
                if (o.id == skip_id || !world.on_table(o.id)) continue;
                if ((o.position - p).norm() - o.extent - extent < 0.5) {
                    clear = false;
                    break;
                }
            }
            if (clear) return p;
        }
    }
    return clamp_to(world.table_bounds, anchor + Point2(base, 0), extent);
}

std::pair<WorldState, Effect> do_pick(WorldState world, const Action& action,
                                      const SimParams& params) {
    SimObject* target = world.find(action.target_object);
    if (!target)
        return {world, {EffectKind::kUnknownObject,
                        "no " + action.target_object + " visible on the table"}};
    if (world.held && *world.held == target->id)
        return {world, {EffectKind::kGraspBlocked,
                        "the gripper is already holding the " + target->name}};
    if (world.is_dropped(target->id))
        return {world, {EffectKind::kUnknownObject,
                        "the " + target->name + " is on the floor, out of reach"}};
    if (world.held)
        return {world,
                {EffectKind::kGraspBlocked,
                 "the gripper is already holding the " +
                     world.objects[std::size_t(*world.held)].name}};

    for (const auto& o : world.objects) {
        if (o.id == target->id || !world.on_table(o.id)) continue;
        if (related(*target, o)) continue;
        if (free_gap(*target, o) < params.occlusion_gap)
            return {world, {EffectKind::kGraspBlocked,
                            "the " + target->name + " is occluded by the " + o.name}};
    }

    if (target->fragile) {
        target->cracked = true;
        return {world, {EffectKind::kCracked,
                        "the " + target->name + " cracked under the gripper"}};
    }

    if (target->tiny)
        return {world, {EffectKind::kGraspBlocked,
                        "the " + target->name + " is too small for the gripper"}};

    if (target->is_container && !target->contents.empty()) {
        std::string items;
        for (int id : target->contents) {
            world.dropped_items.push_back(id);
            if (!items.empty()) items += ", ";
            items += world.objects[std::size_t(id)].name;
        }
        const Effect effect{EffectKind::kContentsDropped,
                            items + " dropped from " + target->name};
        target->contents.clear();
        world.held = target->id;
        return {world, effect};
    }

    if (target->supports) {
        const int passenger = *target->supports;
        auto& p = world.objects[std::size_t(passenger)];
        p.position = adjacent_free_spot(world, target->position, target->extent,
                                        p.extent, passenger);
        world.dropped_items.push_back(passenger);
        target->supports.reset();
        world.held = target->id;
        return {world, {EffectKind::kContentsDropped,
                        p.name + " dropped from " + target->name}};
    }

    // Release the target from any container or base it rested in.
    for (auto& o : world.objects) {
        auto it = std::find(o.contents.begin(), o.contents.end(), target->id);
        if (it != o.contents.end()) o.contents.erase(it);
        if (o.supports && *o.supports == target->id) o.supports.reset();
    }
    world.held = target->id;
    return {world, {EffectKind::kOk, "picked the " + target->name}};
}

std::pair<WorldState, Effect> do_place(WorldState world, const Action& action,
                                       const std::optional<Point2>& selected,
                                       const SimParams&) {
    if (!world.held)
        return {world, {EffectKind::kNotHolding, "the gripper is empty"}};

    auto& obj = world.objects[std::size_t(*world.held)];
    Point2 spot;
    if (selected) {
        spot = clamp_to(world.table_bounds, *selected, 0.0);
    } else if (const SimObject* dest = world.find(action.placement_location);
               dest && world.on_table(dest->id)) {
        spot = adjacent_free_spot(world, dest->position, dest->extent, obj.extent,
                                  obj.id);
    } else if (action.placement_location == "table" || action.placement_location.empty()) {
        const Point2 center = (world.table_bounds.min + world.table_bounds.max) / 2.0;
        spot = adjacent_free_spot(world, center, 0.0, obj.extent, obj.id);
    } else {
        return {world, {EffectKind::kUnknownObject,
                        "no " + action.placement_location + " visible on the table"}};
    }

    obj.position = spot;
    world.held.reset();
    return {world, {EffectKind::kOk, "placed the " + obj.name}};
}

std::pair<WorldState, Effect> do_push(WorldState world, const Action& action,
                                      const std::optional<Point2>& selected,
                                      const SimParams& params) {
    SimObject* target = world.find(action.target_object);
    if (!target || !world.on_table(target->id))
        return {world, {EffectKind::kUnknownObject,
                        "no " + action.target_object + " on the table"}};

    if (target->tiny && !world.held_tool())
        return {world, {EffectKind::kTooSmallContact,
                        "the " + target->name +
                            " is too small to push with the bare gripper"}};

    Point2 endpoint;
    if (selected) {
        endpoint = *selected;
    } else {
        const double sign =
            action.push_direction.value_or(PushDirection::kRight) == PushDirection::kLeft
                ? -1.0
                : 1.0;
        endpoint = target->position + Point2(sign * params.push_step, 0.0);
    }
    endpoint = clamp_to(world.table_bounds, endpoint, target->extent);

    // Sliding an object out of a container or off a base breaks the relation.
    for (auto& o : world.objects) {
        auto it = std::find(o.contents.begin(), o.contents.end(), target->id);
        if (it != o.contents.end()) o.contents.erase(it);
        if (o.supports && *o.supports == target->id) o.supports.reset();
    }

    const Point2 delta = endpoint - target->position;
    target->position = endpoint;
    // Contents and passengers ride along, staying on the table.
    for (int id : target->contents) {
        auto& item = world.objects[std::size_t(id)];
        item.position = clamp_to(world.table_bounds, item.position + delta, item.extent);
    }
    if (target->supports) {
        auto& p = world.objects[std::size_t(*target->supports)];
        p.position = clamp_to(world.table_bounds, p.position + delta, p.extent);
    }
    return {world, {EffectKind::kOk, "pushed the " + target->name}};
}

}  // namespace

std::pair<WorldState, Effect> execute(const WorldState& world, const Action& action,
                                      const std::optional<Point2>& selected_location,
                                      const SimParams& params) {
    switch (action.skill) {
        case Skill::kPick: return do_pick(world, action, params);
        case Skill::kPlace: return do_place(world, action, selected_location, params);
        case Skill::kPush: return do_push(world, action, selected_location, params);
    }
    return {world, {EffectKind::kUnknownObject, "unknown skill"}};
}

namespace {

std::string article(const std::string& name, bool capitalize = false) {
    const bool vowel = !name.empty() && std::string("aeiou").find(name[0]) != std::string::npos;
    std::string a = vowel ? "an" : "a";
    if (capitalize) a[0] = 'A';
    return a + " " + name;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += names.size() == 2 ? " and " : (i + 1 == names.size() ? ", and " : ", ");
        out += article(names[i], i == 0);
    }
    return out;
}

}  // namespace

Observation observe(const WorldState& world, const Scenario& scenario) {
    const SimParams& params = scenario.params;
    Observation obs;
    obs.raster_width = params.raster_width;
    obs.raster_height = params.raster_height;
    obs.params = params;
    obs.last_effect = {};

    std::vector<std::string> table_names;
    for (const auto& o : world.objects) {
        if (!world.on_table(o.id)) continue;
        table_names.push_back(o.name);

        ObjectView view;
        view.name = o.name;
        view.position = o.position;
        view.extent = o.extent;
        view.mask = disk_mask(params.raster_width, params.raster_height, o.position,
                              std::max(o.extent, 0.5));
        view.tiny = o.tiny;
        view.fragile = o.fragile;
        view.is_container = o.is_container;
        view.flat_tool_face = o.flat_tool_face;
        view.cracked = o.cracked;
        view.handle_cell = o.handle_cell;
        for (int id : o.contents)
            view.contains.push_back(world.objects[std::size_t(id)].name);
        if (o.supports)
            view.passenger = world.objects[std::size_t(*o.supports)].name;

        int overlaps = 0;
        for (const auto& other : world.objects) {
            if (other.id == o.id || !world.on_table(other.id)) continue;
            if ((other.position - o.position).norm() < other.extent + o.extent)
                ++overlaps;
            if (!related(o, other) && free_gap(o, other) < params.occlusion_gap)
                view.crowded_by.push_back(other.name);
        }
        const double conf =
            std::clamp(0.9 - 0.15 * double(overlaps), 0.05, 0.95);
        view.grasps = {
            {o.position, Approach::kTop, conf},
            {o.position - Point2(o.extent, 0.0), Approach::kSideLeft, conf},
            {o.position + Point2(o.extent, 0.0), Approach::kSideRight, conf},
        };
        obs.objects.push_back(std::move(view));
    }

    if (world.held)
        obs.held_name = world.objects[std::size_t(*world.held)].name;
    obs.held_is_flat_tool = world.held_tool().has_value();
    for (int id : world.dropped_items)
        obs.dropped_names.push_back(world.objects[std::size_t(id)].name);

    obs.goal.type = scenario.goal.type;
    obs.goal.subject = scenario.goal.subject;
    obs.goal.target = scenario.goal.target;
    obs.goal.radius = scenario.goal.radius;
    obs.goal.satisfied = goal_satisfied(world, scenario);

    // Canonical scene narration; identical worlds yield identical text.
    std::string text;
    if (table_names.empty()) {
        text = "The table is empty.";
    } else if (table_names.size() == 1) {
        text = article(table_names[0], true) + " is on the table.";
    } else {
        text = join_names(table_names) + " are on the table.";
    }
    if (obs.held_name) text += " The robot is holding the " + *obs.held_name + ".";

    for (const auto& view : obs.objects) {
        for (const auto& crowder : view.crowded_by) {
            // Narrate each close pair once, from the goal subject's viewpoint
            // when it participates.
            const bool subject_side = view.name == scenario.goal.subject;
            const ObjectView* other = obs.find(crowder);
            const bool other_is_subject = crowder == scenario.goal.subject;
            if (!subject_side &&
                (other_is_subject || (other && other->name < view.name)))
                continue;
            text += " The " + crowder + " is right next to the " + view.name +
                    ", partially blocking it.";
        }
        for (const auto& item : view.contains)
            text += " " + article(item, true) + " is sitting inside the " + view.name + ".";
        if (view.passenger)
            text += " " + article(*view.passenger, true) + " is sitting on top of the " +
                    view.name + ".";
        if (view.tiny) text += " The " + view.name + " is very small.";
        if (view.fragile)
            text += " The " + view.name +
                    " looks fragile and delicate, so it could break under pressure.";
        if (view.flat_tool_face)
            text += " The " + view.name + " has a wide flat face.";
        if (view.cracked) text += " The " + view.name + " is cracked.";
    }
    for (const auto& name : obs.dropped_names)
        text += " The " + name + " has fallen on the floor.";
    obs.scene_text = std::move(text);
    return obs;
}

const ObjectView* Observation::find(const std::string& name) const {
    for (const auto& v : objects)
        if (v.name == name) return &v;
    return nullptr;
}

WorldState reset(const Scenario& scenario) { return scenario.initial; }

bool goal_satisfied(const WorldState& world, const Scenario& scenario) {
    if (!world.dropped_items.empty()) return false;
    const SimObject* subject = world.find(scenario.goal.subject);
    if (!subject) return false;

    if (scenario.goal.type == GoalType::kHeld)
        return world.held && *world.held == subject->id;

    const SimObject* target = world.find(scenario.goal.target);
    if (!target) return false;
    if (!world.on_table(subject->id) || !world.on_table(target->id)) return false;
    return (subject->position - target->position).norm() <= scenario.goal.radius;
}

RasterMask free_placement_mask(const Observation& obs, double extent) {
    RasterMask mask(obs.raster_width, obs.raster_height);
    const double margin = std::ceil(extent);
    for (int y = 0; y < obs.raster_height; ++y) {
        for (int x = 0; x < obs.raster_width; ++x) {
            const Point2 p(x, y);
            if (p.x() < margin || p.y() < margin ||
                p.x() > obs.raster_width - 1 - margin ||
                p.y() > obs.raster_height - 1 - margin)
                continue;
            bool clear = true;
            for (const auto& v : obs.objects) {
                if ((v.position - p).norm() - v.extent - extent < 0.5) {
                    clear = false;
                    break;
                }
            }
            if (clear) mask.set(x, y);
        }
    }
    return mask;
}

namespace {

int require_object_id(const std::map<std::string, int>& ids, const std::string& name,
                      const std::string& context) {
    auto it = ids.find(name);
    if (it == ids.end())
        throw ParseError("scenario " + context + " references unknown object '" +
                         name + "'");
    return it->second;
}

}  // namespace

Scenario Scenario::from_json(const nlohmann::json& j) {
    Scenario s;
    try {
        s.name = j.at("name").get<std::string>();
        s.instruction = j.at("instruction").get<std::string>();
        s.attempts_allowed = j.value("attempts_allowed", 2);
        s.trap = trap_from_string(j.value("trap", "none"));

        if (j.contains("params")) {
            const auto& p = j.at("params");
            s.params.occlusion_gap = p.value("occlusion_gap", s.params.occlusion_gap);
            s.params.gripper_min_contact =
                p.value("gripper_min_contact", s.params.gripper_min_contact);
            s.params.push_step = p.value("push_step", s.params.push_step);
            if (p.contains("raster")) {
                s.params.raster_width = p.at("raster").value("w", s.params.raster_width);
                s.params.raster_height = p.at("raster").value("h", s.params.raster_height);
            }
        }

        s.initial.table_bounds = {
            Point2::Zero(),
            Point2(s.params.raster_width - 1, s.params.raster_height - 1)};

        std::map<std::string, int> ids;
        for (const auto& jo : j.at("objects")) {
            SimObject o;
            o.id = int(s.initial.objects.size());
            o.name = jo.at("name").get<std::string>();
            o.position = Point2(jo.at("x").get<double>(), jo.at("y").get<double>());
            o.extent = jo.value("extent", 1.0);
            o.fragile = jo.value("fragile", false);
            o.tiny = jo.value("tiny", false);
            o.is_container = jo.value("is_container", false);
            o.flat_tool_face = jo.value("flat_tool_face", false);
            if (jo.contains("handle"))
                o.handle_cell = Point2(jo.at("handle").at("x").get<double>(),
                                       jo.at("handle").at("y").get<double>());
            if (ids.count(o.name))
                throw ParseError("scenario object names must be unique: " + o.name);
            ids[o.name] = o.id;
            if (!s.initial.table_bounds.contains(o.position))
                throw ParseError("object '" + o.name + "' lies outside the table");
            if (o.tiny && o.extent >= s.params.gripper_min_contact)
                throw ParseError("tiny object '" + o.name +
                                 "' must have extent below gripper_min_contact");
            s.initial.objects.push_back(std::move(o));
        }
        // Containment and stacking resolve by name once all objects exist.
        std::size_t idx = 0;
        for (const auto& jo : j.at("objects")) {
            auto& o = s.initial.objects[idx++];
            for (const auto& c : jo.value("contents", std::vector<std::string>{})) {
                const int cid = require_object_id(ids, c, "contents");
                if (cid == o.id) throw ParseError("object cannot contain itself: " + o.name);
                o.contents.push_back(cid);
            }
            if (jo.contains("supports"))
                o.supports = require_object_id(
                    ids, jo.at("supports").get<std::string>(), "supports");
        }

        const auto& g = j.at("goal");
        const std::string type = g.at("type").get<std::string>();
        if (type == "at")
            s.goal.type = GoalType::kAt;
        else if (type == "held")
            s.goal.type = GoalType::kHeld;
        else
            throw ParseError("unknown goal type: " + type);
        s.goal.subject = g.at("subject").get<std::string>();
        s.goal.radius = g.value("radius", 3.0);
        require_object_id(ids, s.goal.subject, "goal subject");
        if (s.goal.type == GoalType::kAt) {
            s.goal.target = g.at("target").get<std::string>();
            require_object_id(ids, s.goal.target, "goal target");
        }

        for (const auto& jn : j.value("notes", nlohmann::json::array()))
            s.notes.push_back(
                {jn.at("step").get<int>(), jn.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad scenario: ") + e.what());
    }
    return s;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("scenario file is not valid JSON: " + path);
    return from_json(j);
}

}  // namespace expmem
