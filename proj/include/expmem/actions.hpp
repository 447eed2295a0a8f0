#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "expmem/geometry.hpp"
#include "expmem/memory_store.hpp"

namespace expmem {

enum class Skill { kPick, kPlace, kPush };

const char* to_string(Skill s);

/// One skill instantiation as the planner emits it over the wire.
struct Action {
    Skill skill = Skill::kPick;
    std::string target_object;
    std::string grasp_part;                  // pick only
    bool specific_grasp_required = false;    // pick only
    std::string placement_location;          // place only
    bool precise_placement_spot_required = false;  // place only
    std::optional<PushDirection> push_direction;   // push only
    std::string action_description;
    std::string scene_description;
    std::string reasoning;

    bool operator==(const Action&) const = default;
};

enum class ActionStatus { kSuccessful, kUncertain, kFailed };

const char* to_string(ActionStatus s);
ActionStatus action_status_from_string(const std::string& s);

/// The success detector's verdict on one executed action.
struct FeedbackRecord {
    ActionStatus status = ActionStatus::kUncertain;
    std::string failure_cause;
    std::string next_step_suggestion;
    bool completed = false;
    std::string reasoning;

    bool failed() const { return status == ActionStatus::kFailed; }
    bool operator==(const FeedbackRecord&) const = default;
};

enum class RetrievalMode { kRag, kRandomK, kAll, kNone };

const char* to_string(RetrievalMode m);

struct ContextEntry {
    ScenarioKey key;
    std::string summary;
    std::string lesson = "none";
    std::uint64_t record_id = 0;
};

/// What retrieval hands the planner: at most context-cap entries.
struct RetrievedContext {
    std::vector<ContextEntry> entries;
    RetrievalMode mode = RetrievalMode::kNone;

    static RetrievedContext none() { return {{}, RetrievalMode::kNone}; }
    std::string to_text() const;
};

struct StmEntry {
    int step = 0;
    Action action;
    FeedbackRecord feedback;
};

struct OperatorNote {
    int step = 0;
    std::string text;
};

/// Ordered action/feedback log for the current instruction, plus any
/// human corrections injected mid-episode.
struct StmLedger {
    std::vector<StmEntry> entries;
    std::vector<OperatorNote> operator_notes;

    bool empty() const { return entries.empty() && operator_notes.empty(); }

    /// Appends (step, action, feedback); steps must strictly increase.
    void add(int step, Action action, FeedbackRecord feedback);
    void add_note(int step, const std::string& text);

    /// Narrative rendering used for prompts and the experience summarizer.
    std::string to_text() const;
};

}  // namespace expmem
