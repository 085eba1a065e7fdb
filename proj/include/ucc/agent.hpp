#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ucc/corpus.hpp"
#include "ucc/llm_client.hpp"
#include "ucc/retrieval.hpp"
#include "ucc/state.hpp"

namespace ucc {

struct AgentResult {
    std::optional<std::string> output; // absent = the agent produced no answer
    std::vector<ActionRecord> actions;
    std::string raw_trace;

    bool operator==(const AgentResult&) const = default;
};

/// The agent function f: (user, input, state view) -> (output, actions).
class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    virtual AgentResult respond(const UserId& user, const std::string& input,
                                const StateView& view) const = 0;
};

/// Deterministic prompt assembly for the live backend: retrieved triples are
/// rendered as labeled exemplars before the task, transcripts with role
/// prefixes. Same inputs, same text.
std::string compose_prompt(const StateView& view, const std::string& input);

/// Desk-scale oracle. Answers are read off the corpus: the victim's clean
/// answer, unless a visible fragment carries a convention the victim is
/// susceptible to, in which case the convention's altered answer (or no
/// answer). Applicability is data-driven, never inferred from text.
///
/// A sanitized fragment only triggers if its convention is code_borne — the
/// convention's residue lives in the stored solution, which the text-level
/// sanitizer passes through untouched.
class ScriptedAgent final : public AgentBackend {
public:
    explicit ScriptedAgent(std::shared_ptr<const Corpus> corpus);
    AgentResult respond(const UserId& user, const std::string& input,
                        const StateView& view) const override;

private:
    std::shared_ptr<const Corpus> corpus_;
};

/// Chat-model backend: composes a prompt from the view, calls the completion
/// endpoint at temperature 0, and treats the completion text as the answer.
/// Transport and format errors surface as BackendFailure.
class LiveAgent final : public AgentBackend {
public:
    LiveAgent(CompletionFn complete, std::string model);
    AgentResult respond(const UserId& user, const std::string& input,
                        const StateView& view) const override;

private:
    CompletionFn complete_;
    std::string model_;
};

/// The agent operation from the shared-state model.
AgentResult respond(const AgentBackend& backend, const UserId& user, const std::string& input,
                    const StateView& view);

} // namespace ucc
