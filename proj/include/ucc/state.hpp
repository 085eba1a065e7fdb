#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ucc/errors.hpp"

namespace ucc {

/// Opaque, stable identity of a user across a run.
struct UserId {
    std::string id;

    explicit UserId(std::string value) : id(std::move(value)) {
        if (id.empty()) throw InvalidArgument("UserId must be non-empty");
    }

    bool operator==(const UserId&) const = default;
};

enum class ActionKind { tool_call, code_exec, message_post };

struct ActionRecord {
    ActionKind kind;
    std::string payload;

    bool operator==(const ActionRecord&) const = default;
};

/// One user turn: who asked what, what came back, and what the agent did.
struct Interaction {
    UserId user;
    std::string input;
    std::string output;
    std::vector<ActionRecord> actions;
    std::int64_t seq = 0;
};

enum class Role { user, assistant };

/// Structured memory-bank record: a solved task kept for exemplar reuse.
struct MemoryEntry {
    std::string question;
    std::string knowledge;
    std::string solution;

    bool operator==(const MemoryEntry&) const = default;
};

/// One turn of a persistent shared transcript.
struct ContextMessage {
    Role role;
    std::string text;

    bool operator==(const ContextMessage&) const = default;
};

using StateFragment = std::variant<MemoryEntry, ContextMessage>;

/// Who wrote a fragment, when, and whether it passed through the sanitizer.
struct Provenance {
    UserId source_user;
    std::int64_t seq = 0;
    std::optional<std::string> instance_id; // corpus convention id, when known
    bool sanitized = false;

    bool operator==(const Provenance&) const = default;
};

enum class Mechanism { memory_bank, shared_context };

struct TaggedFragment {
    StateFragment fragment;
    Provenance provenance;

    bool operator==(const TaggedFragment&) const = default;
};

/// Persistent shared state: an append-only, provenance-tagged fragment store.
/// States are immutable values; every update returns a new state, so a clean
/// state and its contaminated counterpart can coexist without aliasing.
struct SharedState {
    Mechanism mechanism = Mechanism::memory_bank;
    std::vector<TaggedFragment> fragments;

    bool operator==(const SharedState&) const = default;
};

/// Extra provenance recorded at write time.
struct WriteMeta {
    std::optional<std::string> instance_id;
    bool sanitized = false;
};

/// Append `fragments` produced by `interaction` to `state` and return the new
/// state. Each fragment carries provenance (interaction.user, interaction.seq).
/// An empty fragment list is a no-op returning an equal state.
/// Throws MechanismMismatch if a fragment kind does not fit the mechanism,
/// InvalidArgument on empty input text, empty fragment fields, or a seq that
/// would break append ordering.
SharedState write(const SharedState& state, const Interaction& interaction,
                  const std::vector<StateFragment>& fragments,
                  const WriteMeta& meta = {});

/// Deep, independent copy. Mutating either copy never affects the other.
SharedState snapshot(const SharedState& state);

/// Canonical line-delimited serialization: one header record, then one
/// fragment + provenance per line, stable field order. Byte-identical output
/// for equal states.
std::string serialize_state(const SharedState& state);

const char* mechanism_name(Mechanism m);
const char* role_name(Role r);
const char* action_kind_name(ActionKind k);

} // namespace ucc
