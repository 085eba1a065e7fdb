#include "ucc/state.hpp"

#include <json.hpp>

namespace ucc {

namespace {

void check_fragment(const StateFragment& fragment, Mechanism mechanism) {
    if (std::holds_alternative<MemoryEntry>(fragment)) {
        if (mechanism != Mechanism::memory_bank)
            throw MechanismMismatch("MemoryEntry written to a shared_context state");
        const auto& e = std::get<MemoryEntry>(fragment);
        if (e.question.empty() || e.knowledge.empty() || e.solution.empty())
            throw InvalidArgument("MemoryEntry fields must all be non-empty");
    } else {
        if (mechanism != Mechanism::shared_context)
            throw MechanismMismatch("ContextMessage written to a memory_bank state");
        const auto& m = std::get<ContextMessage>(fragment);
        if (m.text.empty())
            throw InvalidArgument("ContextMessage text must be non-empty");
    }
}

} // namespace

SharedState write(const SharedState& state, const Interaction& interaction,
                  const std::vector<StateFragment>& fragments, const WriteMeta& meta) {
    if (interaction.input.empty())
        throw InvalidArgument("Interaction input must be non-empty");
    if (fragments.empty())
        return state; // nothing to persist (e.g. the sanitizer abstained upstream)
    if (!state.fragments.empty() && interaction.seq < state.fragments.back().provenance.seq)
        throw InvalidArgument("write would break append ordering: seq " +
                              std::to_string(interaction.seq) + " < last seq " +
                              std::to_string(state.fragments.back().provenance.seq));
    for (const auto& fragment : fragments)
        check_fragment(fragment, state.mechanism);

    SharedState next = state;
    next.fragments.reserve(state.fragments.size() + fragments.size());
    for (const auto& fragment : fragments) {
        Provenance prov{interaction.user, interaction.seq, meta.instance_id, meta.sanitized};
        next.fragments.push_back(TaggedFragment{fragment, std::move(prov)});
    }
    return next;
}

SharedState snapshot(const SharedState& state) {
    return state; // value semantics: a copy is already deep and independent
}

std::string serialize_state(const SharedState& state) {
    using json = nlohmann::ordered_json;
    std::string out;
    {
        json header;
        header["mechanism"] = mechanism_name(state.mechanism);
        header["fragments"] = state.fragments.size();
        header["format_version"] = 1;
        out += header.dump();
        out += '\n';
    }
    for (const auto& tagged : state.fragments) {
        json rec;
        if (std::holds_alternative<MemoryEntry>(tagged.fragment)) {
            const auto& e = std::get<MemoryEntry>(tagged.fragment);
            rec["kind"] = "memory_entry";
            rec["question"] = e.question;
            rec["knowledge"] = e.knowledge;
            rec["solution"] = e.solution;
        } else {
            const auto& m = std::get<ContextMessage>(tagged.fragment);
            rec["kind"] = "context_message";
            rec["role"] = role_name(m.role);
            rec["text"] = m.text;
        }
        json prov;
        prov["user"] = tagged.provenance.source_user.id;
        prov["seq"] = tagged.provenance.seq;
        if (tagged.provenance.instance_id)
            prov["instance_id"] = *tagged.provenance.instance_id;
        prov["sanitized"] = tagged.provenance.sanitized;
        rec["provenance"] = std::move(prov);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

const char* mechanism_name(Mechanism m) {
    return m == Mechanism::memory_bank ? "memory_bank" : "shared_context";
}

const char* role_name(Role r) {
    return r == Role::user ? "user" : "assistant";
}

const char* action_kind_name(ActionKind k) {
    switch (k) {
        case ActionKind::tool_call: return "tool_call";
        case ActionKind::code_exec: return "code_exec";
        case ActionKind::message_post: return "message_post";
    }
    return "tool_call";
}

} // namespace ucc
