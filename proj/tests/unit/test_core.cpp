#include "pardec/core.hpp"
#include "pardec/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace pardec;
using pardec::testing::small_vocab;

TEST_CASE("vocabulary validates reserved ids") {
    CHECK_NOTHROW(Vocabulary(3));
    CHECK_THROWS_AS(Vocabulary(1), ConfigError);
    CHECK_THROWS_AS(Vocabulary(8, 2, 2), ConfigError);
    CHECK_THROWS_AS(Vocabulary(8, 0, 8), ConfigError);

    Vocabulary v({"[MASK]", "[EoT]", "a", "b"});
    CHECK(v.size() == 4);
    CHECK(v.text(2) == "a");
    CHECK(v.render(Tokens{2, 3, 1}) == "a b [EoT]");
    CHECK(small_vocab().text(7) == "<7>");
}

TEST_CASE("block config") {
    CHECK_NOTHROW(BlockConfig(8, 4));
    CHECK_THROWS_AS(BlockConfig(6, 4), ConfigError);
    CHECK_THROWS_AS(BlockConfig(0, 4), ConfigError);
    CHECK_THROWS_AS(BlockConfig(8, 4, 3), ConfigError);
    CHECK(BlockConfig(128, 32).step_cap() == 128);
    CHECK(BlockConfig(128, 32, 40).step_cap() == 40);
    CHECK(BlockConfig(128, 32).num_blocks() == 4);
}

TEST_CASE("new decode state lays out prompt and masked region") {
    const Vocabulary v = small_vocab();
    const TokenId    m = v.mask_id();
    DecodeState      s = new_decode_state(Tokens{5, 7}, BlockConfig(8, 4), v);
    CHECK(s.tokens() == Tokens{5, 7, m, m, m, m, m, m, m, m});
    CHECK(s.masked() == std::vector<bool>(8, true));
    CHECK(s.current_block() == 0);
    CHECK(s.active_len() == 8);
    CHECK(s.prompt_len() == 2);
    CHECK_NOTHROW(s.check_invariants());
}

TEST_CASE("new decode state rejects bad input") {
    const Vocabulary v = small_vocab();
    BlockConfig      bad;
    bad.gen_length = 6;
    bad.block_size = 4;
    CHECK_THROWS_AS(new_decode_state(Tokens{5}, bad, v), ConfigError);
    CHECK_THROWS_AS(new_decode_state(Tokens{5, v.mask_id(), 7}, BlockConfig(8, 4), v), ConstructionError);
    CHECK_THROWS_AS(new_decode_state(Tokens{5, 64}, BlockConfig(8, 4), v), ConstructionError);
    CHECK_THROWS_AS(new_decode_state(Tokens{}, BlockConfig(8, 4), v), ConstructionError);
}

TEST_CASE("block bounds") {
    DecodeState s = new_decode_state(Tokens{5}, BlockConfig(8, 4), small_vocab());
    CHECK(block_bounds(s, 0) == std::pair{0, 4});
    CHECK(block_bounds(s, 1) == std::pair{4, 8});
    CHECK_THROWS_AS(block_bounds(s, 2), IndexError);
    CHECK_THROWS_AS(block_bounds(s, -1), IndexError);
    s.truncate(4);
    CHECK(block_bounds(s, 1) == std::pair{4, 4});
    CHECK_THROWS_AS(s.truncate(6), PreconditionError);
}

TEST_CASE("commit preserves prompt and invariants") {
    const Vocabulary v = small_vocab();
    DecodeState      s = new_decode_state(Tokens{9, 8, 7}, BlockConfig(8, 4), v);
    const Tokens     prompt(s.prompt().begin(), s.prompt().end());
    s.commit(2, 11);
    CHECK(s.gen_token(2) == 11);
    CHECK_FALSE(s.is_masked(2));
    CHECK_THROWS_AS(s.commit(2, 12), PreconditionError);
    CHECK_THROWS_AS(s.commit(3, v.mask_id()), PreconditionError);
    CHECK_THROWS_AS(s.commit(8, 12), PreconditionError);
    CHECK(Tokens(s.prompt().begin(), s.prompt().end()) == prompt);
    CHECK(s.masked_in({0, 4}) == 3);
    CHECK_NOTHROW(s.check_invariants());
}

TEST_CASE("eot helpers") {
    const Tokens t{4, 5, 1, 6, 1};
    CHECK(first_eot(t, 1) == 2);
    CHECK(truncate_at_eot(t, 1) == Tokens{4, 5, 1});
    CHECK(truncate_at_eot(Tokens{4, 5}, 1) == Tokens{4, 5});
    CHECK(first_eot(Tokens{}, 1) == 0);
}
