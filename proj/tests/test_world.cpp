#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "expmem/errors.hpp"
#include "expmem/world.hpp"

using namespace expmem;

namespace {

Action pick(const std::string& target) {
    Action a;
    a.skill = Skill::kPick;
    a.target_object = target;
    a.action_description = "Pick up the " + target + ".";
    return a;
}

Action place(const std::string& object, const std::string& location) {
    Action a;
    a.skill = Skill::kPlace;
    a.target_object = object;
    a.placement_location = location;
    a.action_description = "Place the " + object + ".";
    return a;
}

Action push(const std::string& target, PushDirection dir) {
    Action a;
    a.skill = Skill::kPush;
    a.target_object = target;
    a.push_direction = dir;
    a.action_description = "Push the " + target + ".";
    return a;
}

Scenario apple_scenario() { return Scenario::load("scenarios/stm_apple_plate.json"); }
Scenario candy_scenario() { return Scenario::load("scenarios/stm_candy_banana.json"); }
Scenario egg_scenario() { return Scenario::load("scenarios/stm_egg_banana.json"); }
Scenario bowl_scenario() { return Scenario::load("scenarios/stm_bowl.json"); }

}  // namespace

TEST_CASE("pick is blocked by a crowding obstruction") {
    const Scenario sc = apple_scenario();
    auto [world, effect] = execute(sc.initial, pick("apple"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kGraspBlocked);
    CHECK(effect.detail.find("occluded by the container") != std::string::npos);
    CHECK(world == sc.initial);  // non-perturbing
}

TEST_CASE("pick succeeds once the obstruction is out of the way") {
    const Scenario sc = apple_scenario();
    auto [w1, push_effect] =
        execute(sc.initial, push("container", PushDirection::kRight),
                Point2(33, 24), sc.params);
    REQUIRE(push_effect.kind == EffectKind::kOk);
    auto [w2, effect] = execute(w1, pick("apple"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kOk);
    CHECK(w2.held.has_value());
    CHECK(w2.objects[std::size_t(*w2.held)].name == "apple");
}

TEST_CASE("tiny objects defeat both the bare pick and the bare push") {
    const Scenario sc = candy_scenario();
    auto [w1, pick_effect] = execute(sc.initial, pick("candy"), std::nullopt, sc.params);
    CHECK(pick_effect.kind == EffectKind::kGraspBlocked);
    CHECK(pick_effect.detail.find("too small") != std::string::npos);

    auto [w2, push_effect] = execute(sc.initial, push("candy", PushDirection::kRight),
                                     Point2(24, 24), sc.params);
    CHECK(push_effect.kind == EffectKind::kTooSmallContact);
    CHECK(w2.find("candy")->position == sc.initial.find("candy")->position);
}

TEST_CASE("a held flat tool makes the tiny push work") {
    const Scenario sc = candy_scenario();
    auto [w1, e1] = execute(sc.initial, pick("sponge"), std::nullopt, sc.params);
    REQUIRE(e1.kind == EffectKind::kOk);
    REQUIRE(w1.held_tool().has_value());
    auto [w2, e2] =
        execute(w1, push("candy", PushDirection::kRight), Point2(24, 24), sc.params);
    CHECK(e2.kind == EffectKind::kOk);
    CHECK(w2.find("candy")->position == Point2(24, 24));
}

TEST_CASE("grasping a fragile object cracks it permanently until reset") {
    const Scenario sc = egg_scenario();
    auto [w1, effect] = execute(sc.initial, pick("egg"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kCracked);
    CHECK(w1.find("egg")->cracked);
    CHECK(!w1.held.has_value());

    // Pushing the fragile object is safe.
    auto [w2, push_effect] =
        execute(sc.initial, push("egg", PushDirection::kRight), Point2(26, 24), sc.params);
    CHECK(push_effect.kind == EffectKind::kOk);
    CHECK(!w2.find("egg")->cracked);

    const WorldState restored = reset(sc);
    CHECK(!restored.find("egg")->cracked);
    CHECK(restored == sc.initial);
}

TEST_CASE("lifting a loaded container drops the contents") {
    const Scenario sc = bowl_scenario();
    auto [world, effect] = execute(sc.initial, pick("bowl"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kContentsDropped);
    CHECK(effect.detail == "apple dropped from bowl");
    CHECK(world.held.has_value());
    CHECK(world.objects[std::size_t(*world.held)].name == "bowl");
    REQUIRE(world.dropped_items.size() == 1);
    CHECK(world.objects[std::size_t(world.dropped_items[0])].name == "apple");

    // Goal held(bowl) is NOT satisfied while the apple lies on the floor.
    CHECK(!goal_satisfied(world, sc));

    const WorldState restored = reset(sc);
    CHECK(restored.dropped_items.empty());
    CHECK(restored.find("bowl")->contents.size() == 1);
}

TEST_CASE("lifting a stacked base displaces the passenger") {
    const Scenario sc = Scenario::load("scenarios/ltm_box_apple.json");
    auto [world, effect] = execute(sc.initial, pick("box"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kContentsDropped);
    CHECK(effect.detail == "apple dropped from box");
    CHECK(!world.dropped_items.empty());
    CHECK(!goal_satisfied(world, sc));
}

TEST_CASE("unloading first makes the container liftable") {
    const Scenario sc = bowl_scenario();
    auto [w1, e1] = execute(sc.initial, pick("apple"), std::nullopt, sc.params);
    REQUIRE(e1.kind == EffectKind::kOk);  // containment exempts occlusion
    CHECK(w1.find("bowl")->contents.empty());
    auto [w2, e2] = execute(w1, place("apple", "table"), Point2(50, 40), sc.params);
    REQUIRE(e2.kind == EffectKind::kOk);
    auto [w3, e3] = execute(w2, pick("bowl"), std::nullopt, sc.params);
    CHECK(e3.kind == EffectKind::kOk);
    CHECK(goal_satisfied(w3, sc));
}

TEST_CASE("place without a held object reports not_holding") {
    const Scenario sc = apple_scenario();
    auto [world, effect] =
        execute(sc.initial, place("apple", "plate"), std::nullopt, sc.params);
    CHECK(effect.kind == EffectKind::kNotHolding);
    CHECK(world == sc.initial);
}

TEST_CASE("unknown names give a typed effect, not an exception") {
    const Scenario sc = apple_scenario();
    auto [w1, e1] = execute(sc.initial, pick("banana"), std::nullopt, sc.params);
    CHECK(e1.kind == EffectKind::kUnknownObject);
    auto [w2, e2] =
        execute(sc.initial, push("banana", PushDirection::kLeft), std::nullopt, sc.params);
    CHECK(e2.kind == EffectKind::kUnknownObject);
    CHECK(w1 == sc.initial);
}

TEST_CASE("push clamps to the table bounds") {
    const Scenario sc = egg_scenario();
    auto [world, effect] = execute(
        sc.initial, push("banana", PushDirection::kRight), Point2(500, 24), sc.params);
    CHECK(effect.kind == EffectKind::kOk);
    const Point2 p = world.find("banana")->position;
    CHECK(p.x() <= sc.initial.table_bounds.max.x());
    CHECK(sc.initial.table_bounds.contains(p));
}

TEST_CASE("observe is deterministic and reflects the scene") {
    const Scenario sc = apple_scenario();
    const Observation a = observe(sc.initial, sc);
    const Observation b = observe(sc.initial, sc);
    CHECK(a.scene_text == b.scene_text);
    CHECK(a.scene_text.find("apple") != std::string::npos);
    CHECK(a.scene_text.find("partially blocking") != std::string::npos);
    REQUIRE(a.objects.size() == 3);
    REQUIRE(a.find("apple") != nullptr);
    CHECK(a.find("apple")->crowded_by == std::vector<std::string>{"container"});
    CHECK(a.find("plate")->crowded_by.empty());
    for (const auto& v : a.objects) {
        REQUIRE(v.grasps.size() == 3);
        CHECK(v.mask.set_count() > 0);
        CHECK(v.mask.contains(v.position));
    }
}

TEST_CASE("observe on an empty world") {
    Scenario sc;
    sc.name = "empty";
    sc.instruction = "noop";
    sc.goal.subject = "nothing";
    sc.initial.table_bounds = {{0, 0}, {63, 47}};
    const Observation obs = observe(sc.initial, sc);
    CHECK(obs.objects.empty());
    CHECK(obs.scene_text == "The table is empty.");
}

TEST_CASE("overlapping neighbors reduce grasp confidence") {
    Scenario sc;
    sc.name = "overlap";
    sc.instruction = "x";
    sc.goal.subject = "a";
    sc.goal.target = "b";
    sc.initial.table_bounds = {{0, 0}, {63, 47}};
    SimObject a{0, "a", {20, 20}, 3.0};
    SimObject b{1, "b", {24, 20}, 3.0};  // disks overlap: dist 4 < 6
    sc.initial.objects = {a, b};
    const Observation obs = observe(sc.initial, sc);
    CHECK(obs.find("a")->grasps[0].confidence == doctest::Approx(0.75));
    CHECK(obs.find("b")->grasps[0].confidence == doctest::Approx(0.75));

    // Far apart: full base confidence.
    sc.initial.objects[1].position = Point2(50, 20);
    const Observation far = observe(sc.initial, sc);
    CHECK(far.find("a")->grasps[0].confidence == doctest::Approx(0.9));
}

TEST_CASE("reset is idempotent and restores every field") {
    const Scenario sc = bowl_scenario();
    auto [perturbed, effect] = execute(sc.initial, pick("bowl"), std::nullopt, sc.params);
    REQUIRE(effect.kind == EffectKind::kContentsDropped);
    CHECK(reset(sc) == sc.initial);
    CHECK(reset(sc) == reset(sc));
}

TEST_CASE("goal_satisfied on at-goals needs proximity and nothing dropped") {
    const Scenario sc = apple_scenario();
    CHECK(!goal_satisfied(sc.initial, sc));

    WorldState world = sc.initial;
    world.find("apple")->position = Point2(43, 24);  // within radius 7 of the plate
    CHECK(goal_satisfied(world, sc));

    world.dropped_items.push_back(1);
    CHECK(!goal_satisfied(world, sc));
}

TEST_CASE("every table-1 and table-2 scenario starts unsatisfied") {
    const char* names[] = {
        "stm_apple_plate", "stm_candy_banana", "stm_egg_banana",  "stm_bowl",
        "ltm_apple_plate", "ltm_candy_banana", "ltm_egg_banana",  "ltm_bowl",
        "ltm_tennis_box",  "ltm_orange_plate", "ltm_paper_box",   "ltm_screw_toolbox",
        "ltm_sushi_plate", "ltm_grape_banana", "ltm_box_apple",   "ltm_towel_orange"};
    for (const char* name : names) {
        const Scenario sc = Scenario::load(std::string("scenarios/") + name + ".json");
        CAPTURE(name);
        CHECK(!goal_satisfied(sc.initial, sc));
        CHECK(sc.trap != Trap::kNone);
    }
}

TEST_CASE("random action sequences preserve the world invariants") {
    const Scenario scenarios[] = {apple_scenario(), candy_scenario(), egg_scenario(),
                                  bowl_scenario()};
    std::mt19937_64 rng(7);
    for (int episode = 0; episode < 200; ++episode) {
        const Scenario& sc = scenarios[episode % 4];
        WorldState world = sc.initial;
        const std::size_t object_count = world.objects.size();

        for (int step = 0; step < 12; ++step) {
            const auto& target = world.objects[rng() % object_count];
            Action action;
            switch (rng() % 3) {
                case 0: action = pick(target.name); break;
                case 1: action = place(target.name, rng() % 2 ? "table" : target.name); break;
                default: action = push(target.name, rng() % 2 ? PushDirection::kLeft
                                                              : PushDirection::kRight);
            }
            std::optional<Point2> loc;
            if (rng() % 2) loc = Point2(double(rng() % 64), double(rng() % 48));
            const WorldState pre = world;
            auto [next, effect] = execute(world, action, loc, sc.params);
            world = next;

            // Conservation and partition discipline.
            REQUIRE(world.objects.size() == object_count);
            std::set<int> seen;
            int held_count = 0;
            for (const auto& o : world.objects) {
                CHECK(world.table_bounds.contains(o.position));
                const bool held = world.held && *world.held == o.id;
                const bool dropped = world.is_dropped(o.id);
                const bool on_table = world.on_table(o.id);
                CHECK(int(held) + int(dropped) + int(on_table) == 1);
                held_count += held;
                CHECK(!seen.count(o.id));
                seen.insert(o.id);
            }
            CHECK(held_count <= 1);

            // ok effects coincide with the skill's nominal postcondition.
            if (action.skill == Skill::kPick) {
                const SimObject* pre_target = pre.find(action.target_object);
                const bool nominal =
                    world.held &&
                    world.objects[std::size_t(*world.held)].name == action.target_object &&
                    pre_target && pre.on_table(pre_target->id) &&
                    world.dropped_items == pre.dropped_items;
                CHECK((effect.kind == EffectKind::kOk) == nominal);
            } else if (action.skill == Skill::kPlace) {
                const bool nominal = pre.held.has_value() && !world.held.has_value();
                CHECK((effect.kind == EffectKind::kOk) == nominal);
            } else {
                if (effect.kind == EffectKind::kOk)
                    CHECK(world.on_table(world.find(action.target_object)->id));
                else
                    CHECK(world == pre);  // failed pushes leave the world untouched
            }
        }
    }
}

TEST_CASE("scenario loader validates its input") {
    CHECK_THROWS_AS(Scenario::load("scenarios/does_not_exist.json"), std::runtime_error);
    nlohmann::json j = {
        {"name", "bad"},
        {"instruction", "x"},
        {"goal", {{"type", "at"}, {"subject", "ghost"}, {"target", "b"}}},
        {"objects", nlohmann::json::array({{{"name", "b"}, {"x", 1}, {"y", 1}}})},
    };
    CHECK_THROWS_AS(Scenario::from_json(j), ParseError);

    nlohmann::json tiny_bad = {
        {"name", "bad2"},
        {"instruction", "x"},
        {"goal", {{"type", "held"}, {"subject", "pea"}}},
        {"objects",
         nlohmann::json::array({{{"name", "pea"}, {"x", 1}, {"y", 1}, {"extent", 2.0},
                                 {"tiny", true}}})},
    };
    CHECK_THROWS_AS(Scenario::from_json(tiny_bad), ParseError);
}

TEST_CASE("free_placement_mask keeps clearance from everything") {
    const Scenario sc = bowl_scenario();
    const Observation obs = observe(sc.initial, sc);
    const RasterMask mask = free_placement_mask(obs, 1.5);
    CHECK(mask.set_count() > 0);
    for (const auto& cell : mask.set_cells()) {
        for (const auto& v : obs.objects)
            CHECK((v.position - cell).norm() - v.extent - 1.5 >= 0.5);
    }
}
