#include <doctest.h>

#include <random>

#include "ucc/state.hpp"

using namespace ucc;

namespace {

MemoryEntry entry(const std::string& tag) {
    return MemoryEntry{"question " + tag, "knowledge " + tag, "solution " + tag};
}

Interaction interaction(std::int64_t seq, const std::string& user = "alice") {
    return Interaction{UserId(user), "input " + std::to_string(seq), "", {}, seq};
}

SharedState seed_bank(int n) {
    SharedState state{Mechanism::memory_bank, {}};
    for (int i = 1; i <= n; ++i)
        state = write(state, interaction(i, "seed"), {entry(std::to_string(i))});
    return state;
}

} // namespace

TEST_CASE("write appends to an empty bank with the interaction's provenance") {
    SharedState state{Mechanism::memory_bank, {}};
    const SharedState next = write(state, interaction(7), {entry("a")});
    REQUIRE(next.fragments.size() == 1);
    CHECK(next.fragments[0].provenance.seq == 7);
    CHECK(next.fragments[0].provenance.source_user.id == "alice");
    CHECK_FALSE(next.fragments[0].provenance.sanitized);
    CHECK(state.fragments.empty()); // input state untouched
}

TEST_CASE("seed bank of 4 entries plus the source entry makes 5") {
    const SharedState bank = seed_bank(4);
    const SharedState after = write(bank, interaction(5, "source"), {entry("source")});
    CHECK(bank.fragments.size() == 4);
    CHECK(after.fragments.size() == 5);
}

TEST_CASE("a 4-turn dialogue lands as 4 context fragments in order") {
    SharedState state{Mechanism::shared_context, {}};
    std::vector<StateFragment> turns = {
        ContextMessage{Role::user, "turn 1"}, ContextMessage{Role::assistant, "turn 2"},
        ContextMessage{Role::user, "turn 3"}, ContextMessage{Role::assistant, "turn 4"}};
    const SharedState next = write(state, interaction(1), turns);
    REQUIRE(next.fragments.size() == 4);
    for (int i = 0; i < 4; ++i)
        CHECK(std::get<ContextMessage>(next.fragments[i].fragment).text ==
              "turn " + std::to_string(i + 1));
}

TEST_CASE("mechanism purity is rejected at write time") {
    SharedState bank{Mechanism::memory_bank, {}};
    SharedState transcript{Mechanism::shared_context, {}};
    CHECK_THROWS_AS(write(bank, interaction(1), {ContextMessage{Role::user, "hi"}}),
                    MechanismMismatch);
    CHECK_THROWS_AS(write(transcript, interaction(1), {entry("a")}), MechanismMismatch);
}

TEST_CASE("write validates its inputs") {
    SharedState bank{Mechanism::memory_bank, {}};
    Interaction empty_input{UserId("u"), "", "", {}, 1};
    CHECK_THROWS_AS(write(bank, empty_input, {entry("a")}), InvalidArgument);
    CHECK_THROWS_AS(write(bank, interaction(1), {MemoryEntry{"q", "", "s"}}), InvalidArgument);
    CHECK_THROWS_AS(
        write(SharedState{Mechanism::shared_context, {}}, interaction(1), {ContextMessage{Role::user, ""}}),
        InvalidArgument);

    SharedState two = write(bank, interaction(5), {entry("a")});
    CHECK_THROWS_AS(write(two, interaction(4), {entry("b")}), InvalidArgument); // seq goes backwards
}

TEST_CASE("write with an empty fragment list is a no-op returning an equal state") {
    const SharedState bank = seed_bank(3);
    const SharedState same = write(bank, interaction(9), {});
    CHECK(same == bank);
    CHECK(serialize_state(same) == serialize_state(bank));
}

TEST_CASE("snapshot of an empty state is empty") {
    SharedState state{Mechanism::shared_context, {}};
    CHECK(snapshot(state).fragments.empty());
}

TEST_CASE("snapshot isolation: writing to the copy leaves the original alone") {
    const SharedState original = seed_bank(2);
    SharedState copy = snapshot(original);
    copy = write(copy, interaction(3), {entry("extra")});
    CHECK(original.fragments.size() == 2);
    CHECK(copy.fragments.size() == 3);
}

TEST_CASE("snapshot of a 5-entry bank serializes byte-identically") {
    const SharedState bank = seed_bank(5);
    CHECK(serialize_state(snapshot(bank)) == serialize_state(bank));
}

TEST_CASE("write determinism: identical inputs give identical states") {
    const SharedState bank = seed_bank(2);
    WriteMeta meta{std::string("conv-1"), true};
    const SharedState a = write(bank, interaction(3), {entry("x")}, meta);
    const SharedState b = write(bank, interaction(3), {entry("x")}, meta);
    CHECK(a == b);
    CHECK(serialize_state(a) == serialize_state(b));
}

TEST_CASE("append-only: random write sequences keep seq non-decreasing and drop nothing") {
    std::mt19937 rng(42);
    for (int round = 0; round < 25; ++round) {
        SharedState state{Mechanism::memory_bank, {}};
        std::int64_t seq = 0;
        std::size_t expected = 0;
        for (int w = 0; w < 12; ++w) {
            seq += 1 + static_cast<std::int64_t>(rng() % 3);
            const int count = static_cast<int>(rng() % 3); // 0, 1 or 2 fragments
            std::vector<StateFragment> fragments;
            for (int i = 0; i < count; ++i) fragments.push_back(entry(std::to_string(rng() % 100)));
            const SharedState before = state;
            state = write(state, interaction(seq), fragments);
            expected += fragments.size();
            REQUIRE(state.fragments.size() == expected);
            // the prior content is a prefix of the new content
            for (std::size_t i = 0; i < before.fragments.size(); ++i)
                REQUIRE(state.fragments[i] == before.fragments[i]);
        }
        for (std::size_t i = 1; i < state.fragments.size(); ++i)
            REQUIRE(state.fragments[i - 1].provenance.seq <= state.fragments[i].provenance.seq);
    }
}

TEST_CASE("serialization carries provenance and the instance id when present") {
    SharedState bank{Mechanism::memory_bank, {}};
    WriteMeta meta{std::string("mimic3-tc-01"), true};
    const SharedState state = write(bank, interaction(2, "bob"), {entry("tagged")}, meta);
    const std::string dump = serialize_state(state);
    CHECK(dump.find("\"instance_id\":\"mimic3-tc-01\"") != std::string::npos);
    CHECK(dump.find("\"sanitized\":true") != std::string::npos);
    CHECK(dump.find("\"mechanism\":\"memory_bank\"") != std::string::npos);
}
