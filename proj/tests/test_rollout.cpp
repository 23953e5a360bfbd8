#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support/fixtures.hpp"

using namespace turncredit;
using namespace testsupport;

namespace {

const char* kRecord =
    R"({"rollout_id":"r1","group_id":"g1","task_id":"t1","outcome":1,)"
    R"("golden_actions":[{"name":"cancel_reservation","args":{"reservation_id":"R1"}}],)"
    R"("turns":[{"index":0,"text":"hi","tool_calls":[]},)"
    R"({"index":1,"tool_calls":[{"name":"cancel_reservation","args":{"reservation_id":"R1"},"errored":false}]}]})";

RolloutBuffer parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_buffer(in);
}

}  // namespace

TEST_CASE("parse_buffer reads one well-formed record") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    REQUIRE(buffer.size() == 1);
    const Rollout& r = buffer.front();
    CHECK(r.rollout_id == "r1");
    CHECK(r.turn_count() == 2);
    CHECK(r.outcome == 1);
    REQUIRE(r.golden_actions.size() == 1);
    CHECK(r.golden_actions[0].name == "cancel_reservation");
    CHECK(r.turns[0].text == "hi");
    REQUIRE(r.turns[1].tool_calls.size() == 1);
    CHECK_FALSE(r.turns[1].tool_errored[0]);
}

TEST_CASE("parse_buffer on empty input yields empty buffer") {
    CHECK(parse_text("").empty());
    CHECK(parse_text("\n\n  \n").empty());
}

TEST_CASE("parse_buffer rejects invalid outcome") {
    std::string bad = kRecord;
    const auto pos = bad.find("\"outcome\":1");
    bad.replace(pos, 11, "\"outcome\":2");
    try {
        parse_text(bad + "\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("outcome") != std::string::npos);
        CHECK(std::string(e.what()).find("r1") != std::string::npos);
    }
}

TEST_CASE("parse_buffer reports the offending line for malformed JSON") {
    const std::string text = std::string(kRecord) + "\n{not json\n";
    try {
        parse_text(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("parse_buffer reports missing required fields") {
    CHECK_THROWS_AS(parse_text(R"({"rollout_id":"x"})" "\n"), ParseError);
}

TEST_CASE("parse_buffer ignores unknown fields") {
    std::string extended = kRecord;
    extended.insert(1, R"("future_field":[1,2,3],)");
    RolloutBuffer buffer = parse_text(extended + "\n");
    REQUIRE(buffer.size() == 1);
    CHECK(buffer[0].rollout_id == "r1");
}

TEST_CASE("validate_rollout accepts a valid rollout") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    CHECK(validate_rollout(buffer[0]).valid());
}

TEST_CASE("validate_rollout flags non-contiguous turn indices") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    Rollout r = buffer[0];
    r.turns[1].index = 5;
    const ValidationVerdict verdict = validate_rollout(r);
    REQUIRE_FALSE(verdict.valid());
    CHECK(verdict.violations[0].find("turn.index") != std::string::npos);
}

TEST_CASE("validate_rollout flags non-finite numbers in args") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    Rollout r = buffer[0];
    r.turns[1].tool_calls[0].args["amount"] = std::nan("");
    const ValidationVerdict verdict = validate_rollout(r);
    REQUIRE_FALSE(verdict.valid());
    CHECK(verdict.violations[0].find("ArgValue finiteness") != std::string::npos);
}

TEST_CASE("validate_rollout flags message turns without text") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    Rollout r = buffer[0];
    r.turns[0].text.reset();
    CHECK_FALSE(validate_rollout(r).valid());
}

TEST_CASE("group_rollouts partitions by group id preserving order") {
    RolloutBuffer buffer;
    const std::vector<GoldenAction> goldens = {
        GoldenAction{"cancel_reservation", {{"reservation_id", "R"}}}};
    for (int i = 0; i < 8; ++i) {
        RolloutSpec spec;
        spec.rollout_id = "r" + std::to_string(i);
        spec.outcome = i % 2;
        spec.turns = {call_turn(0, "cancel_reservation", {{"reservation_id", "R"}})};
        buffer.push_back(make_rollout(i < 4 ? "ga" : "gb", "t", goldens, std::move(spec)));
    }
    const std::vector<RolloutGroup> groups = group_rollouts(buffer);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].group_id == "ga");
    CHECK(groups[0].size() == 4);
    CHECK(groups[1].size() == 4);
    CHECK(groups[0].usable_for_normalization());
    CHECK(groups[0].rollouts[0].rollout_id == "r0");
    CHECK(groups[0].rollouts[3].rollout_id == "r3");

    // partition: every rollout appears exactly once
    std::size_t total = 0;
    for (const RolloutGroup& g : groups) total += g.size();
    CHECK(total == buffer.size());
}

TEST_CASE("singleton groups are flagged unusable") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n");
    const std::vector<RolloutGroup> groups = group_rollouts(buffer);
    REQUIRE(groups.size() == 1);
    CHECK_FALSE(groups[0].usable_for_normalization());
}

TEST_CASE("group_rollouts rejects inconsistent golden actions") {
    RolloutBuffer buffer = parse_text(std::string(kRecord) + "\n" + kRecord + "\n");
    buffer[1].rollout_id = "r2";
    buffer[1].golden_actions[0].args["reservation_id"] = "OTHER";
    CHECK_THROWS_AS(group_rollouts(buffer), ConsistencyError);
}

TEST_CASE("serialize/parse round-trip is the identity") {
    RolloutBuffer original = misalignment_fixture(3);
    std::ostringstream out;
    serialize_buffer(original, out);
    std::istringstream in(out.str());
    RolloutBuffer reparsed = parse_buffer(in);
    REQUIRE(reparsed.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i)
        CHECK(rollout_to_json(original[i]) == rollout_to_json(reparsed[i]));

    // and a second round-trip is byte-identical
    std::ostringstream out2;
    serialize_buffer(reparsed, out2);
    CHECK(out.str() == out2.str());
}
