#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expmem/backend.hpp"
#include "expmem/embedding.hpp"
#include "expmem/memory_store.hpp"
#include "expmem/scripted_backend.hpp"
#include "expmem/util.hpp"
#include "expmem/world.hpp"

namespace expmem {

enum class MemoryMode { kNone, kStmOnly, kStmAndLtm };

const char* to_string(MemoryMode m);

struct EpisodeConfig {
    MemoryMode memory_mode = MemoryMode::kStmOnly;
    RetrievalMode retrieval_mode = RetrievalMode::kNone;
    std::size_t k = 5;
    std::size_t context_cap = 5;
    int max_steps = 12;
    std::optional<int> attempts_allowed;  // scenario file value when unset
    std::uint64_t seed = 0;
    bool write_back = false;
    std::size_t annotation_candidates = 5;
    std::optional<ReachabilityRegion> reach;  // whole table when unset

    void validate() const;
};

struct StepLog {
    int step = 0;
    Action action;
    std::optional<int> selected_label;
    std::optional<Point2> selected_location;
    Effect effect;
    FeedbackRecord feedback;
    std::vector<std::uint64_t> context_ids;
    std::uint64_t world_digest = 0;
    bool reset_after = false;
};

struct EpisodeResult {
    bool completed = false;
    int steps_taken = 0;
    int attempts_used = 1;
    StmLedger stm;
    ScenarioKey key;
    std::string summary;  // only when written back
    std::string lesson = "none";
    std::vector<StepLog> steps;
};

/// Scenario key: the instruction plus the scene description of the initial
/// observation.
ScenarioKey build_key(const std::string& instruction, const Observation& initial_obs,
                      VlmBackend& backend);

/// The Table-3 retrieval modes, truncated to the context cap.
RetrievedContext retrieve_context(const MemoryStore& store, const Embedding& query,
                                  const EpisodeConfig& config);

/// One closed-loop run, stepable so operator notes can arrive mid-episode.
class Episode {
public:
    Episode(const Scenario& scenario, const EpisodeConfig& config, MemoryStore* store,
            VlmBackend& backend, Embedder* embedder, LogicalClock* clock = nullptr);

    bool active() const;
    const EpisodeResult& partial() const { return result_; }
    const ScenarioKey& key() const { return result_.key; }
    const Observation& observation() const { return obs_; }

    /// Plan, resolve annotation, execute, verify, append to STM. Consumes an
    /// attempt (and resets) after a failed step that perturbed the world.
    const StepLog& step();

    void inject_operator_note(const std::string& text);

    /// Summarizes and writes back on completion, then returns the result.
    EpisodeResult finish();

private:
    const Scenario& scenario_;
    EpisodeConfig config_;
    MemoryStore* store_;
    VlmBackend& backend_;
    Embedder* embedder_;
    LogicalClock* clock_;
    LogicalClock fallback_clock_;

    WorldState world_;
    Observation obs_;
    RetrievedContext context_;
    EpisodeResult result_;
    int next_step_ = 0;
    bool stopped_ = false;
    bool finished_ = false;
};

using PostStepHook =
    std::function<std::optional<std::string>(const EpisodeResult& partial)>;

EpisodeResult run_episode(const Scenario& scenario, const EpisodeConfig& config,
                          MemoryStore* store, VlmBackend& backend, Embedder* embedder,
                          LogicalClock* clock = nullptr,
                          const PostStepHook& post_step = {});

/// Planning-only probe: key construction, retrieval, one plan_action call.
/// Never executes.
Action plan_first_action(const Scenario& scenario, const EpisodeConfig& config,
                         MemoryStore* store, VlmBackend& backend, Embedder* embedder);

struct ExpectedAction {
    Skill skill = Skill::kPick;
    std::string target;
};

/// The corrective opening a grounded planner should choose for the
/// scenario's trap (the scoring oracle for the planning-only ablation).
ExpectedAction expected_first_action(const Scenario& scenario);

struct SuiteCondition {
    std::string label;
    PlannerPolicy policy = PlannerPolicy::kNaive;
    EpisodeConfig config;
    bool planning_only = false;
};

struct SuiteCell {
    std::string scenario;
    std::string condition;
    int trials = 0;
    int successes = 0;
};

struct SuiteResult {
    std::vector<std::string> scenario_names;
    std::vector<std::string> condition_labels;
    std::vector<SuiteCell> cells;

    int total_successes(const std::string& condition) const;
    int total_trials(const std::string& condition) const;
    std::string table_text() const;
    std::string rows_jsonl() const;
};

SuiteResult run_suite(const std::vector<Scenario>& scenarios,
                      const std::vector<SuiteCondition>& conditions, MemoryStore* store,
                      Embedder* embedder, int trials, std::uint64_t base_seed);

// Episode logs: one JSON object per line (header, steps, result), replayable.
void write_episode_log(std::ostream& out, const Scenario& scenario,
                       const std::string& scenario_path, const EpisodeConfig& config,
                       const std::string& backend_name, const EpisodeResult& result);

struct ReplayOutcome {
    enum class Status { kOk, kBadLog, kDivergence } status = Status::kOk;
    int diverged_step = -1;
    std::string message;
};

/// Re-executes a log against its scenario's initial world and verifies every
/// effect and world digest.
ReplayOutcome replay_log(const std::string& log_path);

std::uint64_t file_digest(const std::string& path);

}  // namespace expmem
