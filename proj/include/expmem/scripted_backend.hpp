#pragma once

#include <string>

#include "expmem/backend.hpp"

namespace expmem {

enum class PlannerPolicy {
    kNaive,       // plans from the current scene and instruction alone
    kReflective,  // additionally reacts to STM failure causes and notes
    kMemoryAware, // reflective plus lesson tags from retrieved context
};

const char* to_string(PlannerPolicy p);

/// Deterministic oracle backend: every role is a pure function of its inputs
/// and the simulator ground truth carried in the observation.
class ScriptedBackend : public VlmBackend {
public:
    explicit ScriptedBackend(PlannerPolicy policy);

    const std::string& name() const override { return name_; }

    std::string describe_scene(const std::string& instruction,
                               const Observation& obs) override;
    Action plan_action(const std::string& instruction, const Observation& obs,
                       const StmLedger& stm, const RetrievedContext& context) override;
    int choose_grasp_section(const Action& action, const AnnotatedView& view,
                             const Observation& obs) override;
    int choose_placement(const Action& action, const AnnotatedView& view,
                         const Observation& obs) override;
    int choose_push_spot(const Action& action, const AnnotatedView& view,
                         const Observation& obs) override;
    FeedbackRecord evaluate_action(const Action& action, const Observation& obs,
                                   const std::string& instruction) override;
    ExperienceSummary summarize_experience(const StmLedger& stm) override;

    PlannerPolicy policy() const { return policy_; }

private:
    PlannerPolicy policy_;
    std::string name_;
};

}  // namespace expmem
