#pragma once

#include <memory>
#include <string>

#include "expmem/backend.hpp"
#include "expmem/http.hpp"
#include "expmem/wire.hpp"

namespace expmem {

/// Function-calling client for an OpenAI-compatible /v1/chat/completions
/// endpoint. Every role sends its prompt plus the matching tool schema and
/// expects exactly one tool call back; anything else is a protocol violation.
class RemoteBackend : public VlmBackend {
public:
    RemoteBackend(std::shared_ptr<HttpTransport> transport, std::string model,
                  std::string api_key, RetryPolicy policy = {});

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

private:
    /// POSTs one chat request and returns the single tool call's
    /// (name, parsed arguments).
    std::pair<std::string, nlohmann::json> call(const std::string& prompt,
                                                const std::vector<wire::Json>& tools);

    std::shared_ptr<HttpTransport> transport_;
    std::string model_;
    std::string api_key_;
    RetryPolicy policy_;
    std::string name_ = "remote";
};

/// Extracts the single tool call from a chat-completions response body.
/// Exposed for fixture-based tests.
std::pair<std::string, nlohmann::json> parse_single_tool_call(const std::string& body);

}  // namespace expmem
