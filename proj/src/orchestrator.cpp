#include "expmem/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "expmem/errors.hpp"
#include "expmem/wire.hpp"

namespace expmem {

const char* to_string(MemoryMode m) {
    switch (m) {
        case MemoryMode::kNone: return "none";
        case MemoryMode::kStmOnly: return "stm";
        case MemoryMode::kStmAndLtm: return "stm+ltm";
    }
    return "none";
}

void EpisodeConfig::validate() const {
    if (max_steps < 1) throw std::invalid_argument("config: max_steps must be >= 1");
    if (retrieval_mode == RetrievalMode::kRag && k > context_cap)
        throw std::invalid_argument("config: k must not exceed context_cap for rag");
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
}

ScenarioKey build_key(const std::string& instruction, const Observation& initial_obs,
                      VlmBackend& backend) {
    if (instruction.empty()) throw std::invalid_argument("build_key: empty instruction");
    return {instruction, backend.describe_scene(instruction, initial_obs)};
}

RetrievedContext retrieve_context(const MemoryStore& store, const Embedding& query,
                                  const EpisodeConfig& config) {
    RetrievedContext out;
    out.mode = config.retrieval_mode;

    std::vector<ExperienceRecord> records;
    switch (config.retrieval_mode) {
        case RetrievalMode::kNone: return out;
        case RetrievalMode::kRag: {
            for (auto& r : store.retrieve_top_k(query, config.k))
                records.push_back(std::move(r.record));
            break;
        }
        case RetrievalMode::kRandomK:
            records = store.retrieve_random_k(config.k, config.seed);
            break;
        case RetrievalMode::kAll: records = store.retrieve_all(); break;
    }
    if (records.size() > config.context_cap) records.resize(config.context_cap);
    for (auto& r : records)
        out.entries.push_back({r.key, r.summary, r.lesson, r.id});
    return out;
}

namespace {

struct Resolved {
    std::optional<int> label;
    std::optional<Point2> location;
};

/// Runs the on-demand annotation tool when the action asks for it (or always,
/// for pushes, which need an endpoint).
Resolved resolve_annotation(const Action& action, const Observation& obs,
                            VlmBackend& backend, const EpisodeConfig& config) {
    Resolved out;
    const std::size_t k = config.annotation_candidates;

    switch (action.skill) {
        case Skill::kPick: {
            if (!action.specific_grasp_required) break;
            const ObjectView* target = obs.find(action.target_object);
            if (!target || target->mask.set_count() == 0) break;
            const CandidateSet candidates = candidate_placements(target->mask, k);
            const AnnotatedView view = annotate(target->mask, candidates);
            const int label = backend.choose_grasp_section(action, view, obs);
            const Point2 chosen = candidates.items[std::size_t(label - 1)].location;

            ReachabilityRegion reach = config.reach.value_or(ReachabilityRegion{
                Point2::Zero(),
                Point2(obs.raster_width - 1, obs.raster_height - 1)});
            const std::size_t grasp_idx = select_grasp(
                target->grasps, reach.predicate(), chosen, obs.raster_diagonal());
            out.label = label;
            out.location = target->grasps[grasp_idx].position;
            break;
        }
        case Skill::kPlace: {
            if (!action.precise_placement_spot_required) break;
            const ObjectView* held = nullptr;
            if (obs.held_name) held = obs.find(*obs.held_name);
            const double extent = held ? held->extent : 1.0;

            RasterMask area;
            if (const ObjectView* dest = obs.find(action.placement_location))
                area = dest->mask;
            else
                area = free_placement_mask(obs, extent);
            if (area.set_count() == 0) break;
            const CandidateSet candidates = candidate_placements(area, k);
            const AnnotatedView view = annotate(area, candidates);
            const int label = backend.choose_placement(action, view, obs);
            out.label = label;
            out.location = candidates.items[std::size_t(label - 1)].location;
            break;
        }
        case Skill::kPush: {
            const ObjectView* target = obs.find(action.target_object);
            if (!target) break;
            const CandidateSet candidates = candidate_push_endpoints(
                target->position, action.push_direction.value_or(PushDirection::kRight),
                obs.params.push_step, k);
            const AnnotatedView view = annotate(target->mask, candidates);
            const int label = backend.choose_push_spot(action, view, obs);
            out.label = label;
            out.location = candidates.items[std::size_t(label - 1)].location;
            break;
        }
    }
    return out;
}

std::string episode_id(const Scenario& scenario, const EpisodeConfig& config) {
    return scenario.name + "#" + std::to_string(config.seed);
}

}  // namespace

Episode::Episode(const Scenario& scenario, const EpisodeConfig& config,
                 MemoryStore* store, VlmBackend& backend, Embedder* embedder,
                 LogicalClock* clock)
    : scenario_(scenario),
      config_(config),
      store_(store),
      backend_(backend),
      embedder_(embedder),
      clock_(clock ? clock : &fallback_clock_) {
    config_.validate();
    const bool wants_store = config_.memory_mode == MemoryMode::kStmAndLtm;
    if (wants_store != (store_ != nullptr))
        throw std::invalid_argument(
            "run_episode: a store is required exactly when memory_mode is stm+ltm");
    if (wants_store && !embedder_)
        throw std::invalid_argument("run_episode: stm+ltm requires an embedder");
    if (!config_.attempts_allowed)
        config_.attempts_allowed = scenario_.attempts_allowed;

    world_ = reset(scenario_);
    obs_ = observe(world_, scenario_);
    result_.key = build_key(scenario_.instruction, obs_, backend_);

    if (store_ && config_.retrieval_mode != RetrievalMode::kNone && store_->size() > 0) {
        const Embedding query = embedder_->embed(result_.key.key_text());
        if (store_->dimension() >= 0 && query.size() != store_->dimension())
            throw std::invalid_argument(
                "run_episode: embedder dimension does not match the store");
        context_ = retrieve_context(*store_, query, config_);
    }
}

bool Episode::active() const {
    return !stopped_ && !result_.completed && next_step_ < config_.max_steps;
}

const StepLog& Episode::step() {
    if (!active()) throw std::logic_error("Episode::step on an inactive episode");

    const StmLedger empty_stm;
    const RetrievedContext empty_ctx = RetrievedContext::none();
    const bool give_memory = config_.memory_mode != MemoryMode::kNone;
    const bool give_context = config_.memory_mode == MemoryMode::kStmAndLtm;

    const int step_idx = next_step_++;
    StepLog log;
    log.step = step_idx;
    for (const auto& e : context_.entries) log.context_ids.push_back(e.record_id);

    const WorldState pre_step_world = world_;
    log.action = backend_.plan_action(scenario_.instruction, obs_,
                                      give_memory ? result_.stm : empty_stm,
                                      give_context ? context_ : empty_ctx);

    try {
        const Resolved resolved = resolve_annotation(log.action, obs_, backend_, config_);
        log.selected_label = resolved.label;
        log.selected_location = resolved.location;
        std::optional<Point2> exec_location;
        if (log.action.skill != Skill::kPick) exec_location = resolved.location;

        auto [next_world, effect] = execute(world_, log.action, exec_location,
                                            scenario_.params);
        log.effect = effect;
        world_ = std::move(next_world);
    } catch (const NoFeasibleGraspError& e) {
        // The grasp filter emptied out; surface it as a failed step so the
        // planner can replan rather than aborting the episode.
        log.effect = {EffectKind::kGraspBlocked, e.what()};
    }

    obs_ = observe(world_, scenario_);
    obs_.last_effect = log.effect;
    log.feedback = backend_.evaluate_action(log.action, obs_, scenario_.instruction);
    log.world_digest = world_.digest();
    result_.stm.add(step_idx, log.action, log.feedback);

    if (log.feedback.completed) {
        result_.completed = true;
    } else if (log.feedback.failed() && !(world_ == pre_step_world)) {
        // A failed, world-perturbing step spends an attempt. The operator
        // rebuilds the scene while the STM carries the experience forward.
        if (result_.attempts_used < *config_.attempts_allowed) {
            ++result_.attempts_used;
            world_ = reset(scenario_);
            obs_ = observe(world_, scenario_);
            log.reset_after = true;
        } else {
            stopped_ = true;
        }
    }

    result_.steps.push_back(std::move(log));
    result_.steps_taken = int(result_.stm.entries.size());
    return result_.steps.back();
}

void Episode::inject_operator_note(const std::string& text) {
    if (!active() && result_.completed)
        throw std::logic_error("inject_operator_note: episode already completed");
    if (finished_) throw std::logic_error("inject_operator_note: episode finished");
    result_.stm.add_note(std::max(0, next_step_ - 1), text);
}

EpisodeResult Episode::finish() {
    if (finished_) return result_;
    finished_ = true;
    if (result_.completed && config_.write_back && store_ && embedder_) {
        const ExperienceSummary summary = backend_.summarize_experience(result_.stm);
        result_.summary = summary.summary;
        result_.lesson = summary.lesson;
        store_->append(result_.key, summary.summary,
                       embedder_->embed(result_.key.key_text()),
                       episode_id(scenario_, config_), clock_->now_rfc3339(),
                       summary.lesson);
    }
    return result_;
}

EpisodeResult run_episode(const Scenario& scenario, const EpisodeConfig& config,
                          MemoryStore* store, VlmBackend& backend, Embedder* embedder,
                          LogicalClock* clock, const PostStepHook& post_step) {
    Episode episode(scenario, config, store, backend, embedder, clock);
    while (episode.active()) {
        const StepLog& log = episode.step();
        for (const auto& note : scenario.notes)
            if (note.step == log.step) episode.inject_operator_note(note.text);
        if (post_step && !episode.partial().completed) {
            if (auto note = post_step(episode.partial()); note && !note->empty())
                episode.inject_operator_note(*note);
        }
    }
    return episode.finish();
}

Action plan_first_action(const Scenario& scenario, const EpisodeConfig& config,
                         MemoryStore* store, VlmBackend& backend, Embedder* embedder) {
    config.validate();
    const WorldState world = reset(scenario);
    const Observation obs = observe(world, scenario);
    const ScenarioKey key = build_key(scenario.instruction, obs, backend);

    RetrievedContext context = RetrievedContext::none();
    if (config.memory_mode == MemoryMode::kStmAndLtm && store &&
        config.retrieval_mode != RetrievalMode::kNone && store->size() > 0 && embedder)
        context = retrieve_context(*store, embedder->embed(key.key_text()), config);

    return backend.plan_action(scenario.instruction, obs, StmLedger{}, context);
}

ExpectedAction expected_first_action(const Scenario& scenario) {
    const Observation obs = observe(scenario.initial, scenario);
    const ObjectView* subject = obs.find(scenario.goal.subject);

    switch (scenario.trap) {
        case Trap::kPushObstructionFirst:
            if (subject && !subject->crowded_by.empty())
                return {Skill::kPush, subject->crowded_by.front()};
            break;
        case Trap::kUseFlatToolForTiny:
            for (const auto& v : obs.objects)
                if (v.flat_tool_face && v.name != scenario.goal.subject)
                    return {Skill::kPick, v.name};
            break;
        case Trap::kPushFragileInsteadOfPick:
            return {Skill::kPush, scenario.goal.subject};
        case Trap::kUnloadContainerBeforeLift:
            if (subject) {
                if (!subject->contains.empty())
                    return {Skill::kPick, subject->contains.front()};
                if (subject->passenger) return {Skill::kPick, *subject->passenger};
            }
            break;
        case Trap::kNone: break;
    }
    return {Skill::kPick, scenario.goal.subject};
}

int SuiteResult::total_successes(const std::string& condition) const {
    int n = 0;
    for (const auto& c : cells)
        if (c.condition == condition) n += c.successes;
    return n;
}

int SuiteResult::total_trials(const std::string& condition) const {
    int n = 0;
    for (const auto& c : cells)
        if (c.condition == condition) n += c.trials;
    return n;
}

std::string SuiteResult::table_text() const {
    std::size_t name_w = 8;
    for (const auto& s : scenario_names) name_w = std::max(name_w, s.size());

    std::ostringstream out;
    out << std::left << std::setw(int(name_w)) << "scenario";
    for (const auto& c : condition_labels) out << " | " << std::setw(12) << c;
    out << "\n";
    out << std::string(name_w, '-');
    for (std::size_t i = 0; i < condition_labels.size(); ++i)
        out << "-+-" << std::string(12, '-');
    out << "\n";

    auto cell = [&](const std::string& s, const std::string& c) -> const SuiteCell* {
        for (const auto& x : cells)
            if (x.scenario == s && x.condition == c) return &x;
        return nullptr;
    };
    for (const auto& s : scenario_names) {
        out << std::left << std::setw(int(name_w)) << s;
        for (const auto& c : condition_labels) {
            const SuiteCell* x = cell(s, c);
            std::string v = "-";
            if (x) v = std::to_string(x->successes) + "/" + std::to_string(x->trials);
            out << " | " << std::setw(12) << v;
        }
        out << "\n";
    }
    out << std::string(name_w, '-');
    for (std::size_t i = 0; i < condition_labels.size(); ++i)
        out << "-+-" << std::string(12, '-');
    out << "\n" << std::left << std::setw(int(name_w)) << "total";
    for (const auto& c : condition_labels) {
        const int trials = total_trials(c);
        const int wins = total_successes(c);
        const int pct = trials > 0 ? int(std::lround(100.0 * wins / trials)) : 0;
        out << " | " << std::setw(12)
            << (std::to_string(wins) + "/" + std::to_string(trials) + " (" +
                std::to_string(pct) + "%)");
    }
    out << "\n";
    return out.str();
}

std::string SuiteResult::rows_jsonl() const {
    std::string out;
    for (const auto& c : cells) {
        nlohmann::ordered_json j;
        j["scenario"] = c.scenario;
        j["condition"] = c.condition;
        j["trials"] = c.trials;
        j["successes"] = c.successes;
        j["rate"] = c.trials > 0 ? double(c.successes) / c.trials : 0.0;
        out += j.dump() + "\n";
    }
    return out;
}

SuiteResult run_suite(const std::vector<Scenario>& scenarios,
                      const std::vector<SuiteCondition>& conditions, MemoryStore* store,
                      Embedder* embedder, int trials, std::uint64_t base_seed) {
    SuiteResult result;
    for (const auto& s : scenarios) result.scenario_names.push_back(s.name);
    for (const auto& c : conditions) result.condition_labels.push_back(c.label);

    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            const SuiteCondition& cond = conditions[ci];
            SuiteCell cell{scenarios[si].name, cond.label, trials, 0};
            for (int trial = 0; trial < trials; ++trial) {
                EpisodeConfig config = cond.config;
                config.seed = derive_seed(base_seed, si, ci, std::uint64_t(trial));
                ScriptedBackend backend(cond.policy);
                MemoryStore* cell_store =
                    config.memory_mode == MemoryMode::kStmAndLtm ? store : nullptr;
                if (cond.planning_only) {
                    const Action action = plan_first_action(scenarios[si], config,
                                                            cell_store, backend, embedder);
                    const ExpectedAction want = expected_first_action(scenarios[si]);
                    if (action.skill == want.skill && action.target_object == want.target)
                        ++cell.successes;
                } else {
                    const EpisodeResult r = run_episode(scenarios[si], config, cell_store,
                                                        backend, embedder);
                    if (r.completed) ++cell.successes;
                }
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

namespace {

nlohmann::ordered_json point_json(const std::optional<Point2>& p) {
    if (!p) return nullptr;
    return nlohmann::ordered_json::array({p->x(), p->y()});
}

}  // namespace

void write_episode_log(std::ostream& out, const Scenario& scenario,
                       const std::string& scenario_path, const EpisodeConfig& config,
                       const std::string& backend_name, const EpisodeResult& result) {
    nlohmann::ordered_json header;
    header["type"] = "header";
    header["scenario_name"] = scenario.name;
    header["scenario_path"] = scenario_path;
    header["scenario_digest"] = file_digest(scenario_path);
    header["seed"] = config.seed;
    header["backend"] = backend_name;
    header["memory"] = to_string(config.memory_mode);
    header["retrieval"] = to_string(config.retrieval_mode);
    out << header.dump() << "\n";

    for (const auto& s : result.steps) {
        nlohmann::ordered_json j;
        j["type"] = "step";
        j["step"] = s.step;
        j["action"] = wire::action_to_tool_call(s.action);
        j["label"] = s.selected_label ? nlohmann::ordered_json(*s.selected_label)
                                      : nlohmann::ordered_json(nullptr);
        j["location"] = point_json(s.selected_location);
        j["effect"] = {{"kind", to_string(s.effect.kind)}, {"detail", s.effect.detail}};
        j["feedback"] = wire::feedback_to_tool_call(s.feedback);
        j["context_ids"] = s.context_ids;
        j["world_digest"] = s.world_digest;
        j["reset_after"] = s.reset_after;
        out << j.dump() << "\n";
    }

    nlohmann::ordered_json footer;
    footer["type"] = "result";
    footer["completed"] = result.completed;
    footer["steps"] = result.steps_taken;
    footer["attempts_used"] = result.attempts_used;
    out << footer.dump() << "\n";
}

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

ReplayOutcome replay_log(const std::string& log_path) {
    std::ifstream in(log_path);
    if (!in) return {ReplayOutcome::Status::kBadLog, -1, "cannot open log: " + log_path};

    std::string line;
    if (!std::getline(in, line))
        return {ReplayOutcome::Status::kBadLog, -1, "empty log"};
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("type", "") != "header")
        return {ReplayOutcome::Status::kBadLog, -1, "first line is not a log header"};

    const std::string scenario_path = header.value("scenario_path", "");
    Scenario scenario;
    try {
        scenario = Scenario::load(scenario_path);
    } catch (const std::exception& e) {
        return {ReplayOutcome::Status::kBadLog, -1, e.what()};
    }
    if (header.contains("scenario_digest") &&
        header["scenario_digest"].get<std::uint64_t>() != file_digest(scenario_path))
        return {ReplayOutcome::Status::kBadLog, -1,
                "scenario file changed since the log was written"};
    if (header.value("scenario_name", "") != scenario.name)
        return {ReplayOutcome::Status::kBadLog, -1,
                "log was produced by a different scenario"};

    WorldState world = reset(scenario);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            return {ReplayOutcome::Status::kBadLog, -1,
                    "malformed log line " + std::to_string(line_no)};
        if (j.value("type", "") != "step") continue;

        const int step = j.value("step", -1);
        Action action;
        try {
            const auto& call = j.at("action");
            action = wire::action_from_tool_call(call.at("name").get<std::string>(),
                                                 call.at("arguments"));
        } catch (const std::exception& e) {
            return {ReplayOutcome::Status::kBadLog, step, e.what()};
        }
        std::optional<Point2> location;
        if (!j.at("location").is_null())
            location = Point2(j["location"][0].get<double>(),
                              j["location"][1].get<double>());
        std::optional<Point2> exec_location;
        if (action.skill != Skill::kPick) exec_location = location;

        auto [next_world, effect] = execute(world, action, exec_location, scenario.params);
        world = std::move(next_world);

        const std::string logged_kind = j.at("effect").value("kind", "");
        const std::string logged_detail = j.at("effect").value("detail", "");
        if (logged_kind != to_string(effect.kind) || logged_detail != effect.detail)
            return {ReplayOutcome::Status::kDivergence, step,
                    "step " + std::to_string(step) + ": effect diverged (logged " +
                        logged_kind + ", replayed " + to_string(effect.kind) + ")"};
        if (j.at("world_digest").get<std::uint64_t>() != world.digest())
            return {ReplayOutcome::Status::kDivergence, step,
                    "step " + std::to_string(step) + ": world digest diverged"};
        if (j.value("reset_after", false)) world = reset(scenario);
    }
    return {};
}

}  // namespace expmem
