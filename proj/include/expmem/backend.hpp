#pragma once

#include <string>

#include "expmem/actions.hpp"
#include "expmem/geometry.hpp"
#include "expmem/world.hpp"

namespace expmem {

struct ExperienceSummary {
    std::string summary;
    std::string lesson = "none";  // scripted side channel; remote emits "none"
};

/// The seven model roles behind one interface: scene describer, action
/// planner, the three annotation selectors, success detector, and experience
/// summarizer.
class VlmBackend {
public:
    virtual ~VlmBackend() = default;
    virtual const std::string& name() const = 0;

    virtual std::string describe_scene(const std::string& instruction,
                                       const Observation& obs) = 0;

    virtual Action plan_action(const std::string& instruction, const Observation& obs,
                               const StmLedger& stm, const RetrievedContext& context) = 0;

    virtual int choose_grasp_section(const Action& action, const AnnotatedView& view,
                                     const Observation& obs) = 0;
    virtual int choose_placement(const Action& action, const AnnotatedView& view,
                                 const Observation& obs) = 0;
    virtual int choose_push_spot(const Action& action, const AnnotatedView& view,
                                 const Observation& obs) = 0;

    virtual FeedbackRecord evaluate_action(const Action& action, const Observation& obs,
                                           const std::string& instruction) = 0;

    virtual ExperienceSummary summarize_experience(const StmLedger& stm) = 0;
};

}  // namespace expmem
