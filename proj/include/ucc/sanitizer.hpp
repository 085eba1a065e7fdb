#pragma once

#include <string>
#include <vector>

#include "ucc/llm_client.hpp"
#include "ucc/state.hpp"

namespace ucc {

/// Raw trace of one interaction before it enters the shared store.
struct RawTrace {
    Interaction interaction;
    std::vector<StateFragment> candidate_fragments;
};

/// Either a safe-to-share rewrite of the trace, or an explicit abstention
/// (persist nothing, leave the state untouched).
struct SanitizeOutcome {
    bool abstained = false;
    std::vector<StateFragment> fragments;

    static SanitizeOutcome abstain() { return SanitizeOutcome{true, {}}; }
    static SanitizeOutcome sanitized(std::vector<StateFragment> fragments) {
        return SanitizeOutcome{false, std::move(fragments)};
    }
};

enum class SanitizerMode { off, rules, llm };

SanitizerMode sanitizer_mode_from_name(const std::string& name);
const char* sanitizer_mode_name(SanitizerMode m);

class Sanitizer {
public:
    virtual ~Sanitizer() = default;
    virtual SanitizeOutcome sanitize_trace(const RawTrace& trace) const = 0;
};

/// Remove scope-bound clauses from text: parenthetical side constraints, and
/// sentences that open with "For ..." / "Please ..." or contain one of the
/// cue phrases ("for documentation", "for dashboard", "for billing",
/// "for handoff"). Case-insensitive, sentence granularity, idempotent.
std::string strip_scope_clauses(const std::string& text);

/// Deterministic write-time sanitizer. Question and knowledge fields and
/// transcript messages are stripped of scope-bound clauses; the solution
/// field is passed through unmodified. Entries or messages reduced to empty
/// text are dropped; if nothing reusable remains, the outcome is abstention.
class RuleSanitizer final : public Sanitizer {
public:
    SanitizeOutcome sanitize_trace(const RawTrace& trace) const override;
};

/// LLM-backed sanitizer. Memory entries go through the shipped rewrite
/// prompt; the response must be a strict JSON object with exactly the keys
/// question/knowledge/solution, or the literal NONE for abstention. Anything
/// else is malformed output and treated as abstention (logged). Transcript
/// messages are rewritten one at a time: cleaned text or NONE to drop the
/// message. Both paths then apply the deterministic cue stripping.
class LlmSanitizer final : public Sanitizer {
public:
    LlmSanitizer(CompletionFn complete, std::string model, std::string memory_prompt,
                 std::string context_prompt);
    SanitizeOutcome sanitize_trace(const RawTrace& trace) const override;

    /// Exposed for tests: parse one memory-entry response.
    /// Throws MalformedSanitizerOutput.
    static StateFragment parse_memory_response(const std::string& response);

private:
    CompletionFn complete_;
    std::string model_;
    std::string memory_prompt_;
    std::string context_prompt_;
};

/// The sanitizer function h.
SanitizeOutcome sanitize(const RawTrace& trace, const Sanitizer& backend);

/// Write path with the sanitizer interposed: on a sanitized outcome the
/// fragments are appended (provenance marked sanitized); on abstention the
/// returned state equals the input state exactly.
SharedState write_sanitized(const SharedState& state, const RawTrace& trace,
                            const Sanitizer& backend, WriteMeta meta = {});

} // namespace ucc
