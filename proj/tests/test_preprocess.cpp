#include <doctest.h>

#include "patchseg/error.hpp"
#include "patchseg/preprocess.hpp"
#include "support.hpp"

using namespace patchseg;
using namespace patchseg::testing;

TEST_CASE("hu_window examples") {
    CHECK(hu_window(-40) == 0.0);
    CHECK(hu_window(-500) == 0.0);
    CHECK(hu_window(25) == 127.5);
    CHECK(hu_window(90) == 255.0);
    CHECK(hu_window(3000) == 255.0);
}

TEST_CASE("hu_window is monotone non-decreasing over integers") {
    double previous = hu_window(-32768);
    for (int v = -32767; v <= 32767; ++v) {
        const double w = hu_window(v);
        REQUIRE(w >= previous);
        REQUIRE(w >= 0.0);
        REQUIRE(w <= 255.0);
        previous = w;
    }
}

TEST_CASE("windowing is idempotent on clipped values") {
    for (double v = -2000.0; v <= 2000.0; v += 0.37) {
        CHECK(hu_clip(hu_clip(v)) == hu_clip(v));
        CHECK(hu_window(hu_clip(v)) == hu_window(v));
    }
}

namespace {
WindowedStack ramp(int depth) {
    CtStack s = constant_stack(depth, 3, 0, "ramp");
    for (int d = 0; d < depth; ++d)
        for (auto& v : s.frames.frame(d)) v = static_cast<std::int16_t>(-40 + 13 * d);
    return window_stack(s);
}

bool channel_is_frame(const FusedFrame& f, int c, const WindowedStack& w, int d) {
    const auto ch = f.channel(c);
    const auto fr = w.values.frame(d);
    return std::equal(ch.begin(), ch.end(), fr.begin(), fr.end());
}
}  // namespace

TEST_CASE("fuse_z examples") {
    const WindowedStack w = ramp(5);
    const FusedFrame mid = fuse_z(w, 2);
    CHECK(mid.frame_index == 2);
    CHECK(channel_is_frame(mid, 0, w, 1));
    CHECK(channel_is_frame(mid, 1, w, 2));
    CHECK(channel_is_frame(mid, 2, w, 3));

    const FusedFrame first = fuse_z(w, 0);
    CHECK(channel_is_frame(first, 0, w, 0));
    CHECK(channel_is_frame(first, 1, w, 0));
    CHECK(channel_is_frame(first, 2, w, 1));

    const FusedFrame last = fuse_z(w, 4);
    CHECK(channel_is_frame(last, 0, w, 3));
    CHECK(channel_is_frame(last, 2, w, 4));

    const WindowedStack one = ramp(1);
    const FusedFrame only = fuse_z(one, 0);
    for (int c = 0; c < 3; ++c) CHECK(channel_is_frame(only, c, one, 0));

    CHECK_THROWS_AS(fuse_z(w, 5), ArgumentError);
    CHECK_THROWS_AS(fuse_z(w, -1), ArgumentError);
}

TEST_CASE("fuse_z center channel equals the windowed frame for random stacks") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const CtStack s = random_stack(rng, 1 + trial % 4, 8, false);
        const WindowedStack w = window_stack(s);
        CHECK(w.stack_id == s.stack_id);
        for (float v : w.values.values()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 255.0f);
        }
        for (int d = 0; d < s.depth(); ++d) CHECK(channel_is_frame(fuse_z(w, d), 1, w, d));
    }
}

TEST_CASE("prepare keeps the stack and its windowed image together") {
    std::mt19937_64 rng(2);
    const PreparedStack p = prepare(random_stack(rng, 2, 4, true, "p"));
    CHECK(p.windowed.stack_id == "p");
    CHECK(p.windowed.values.at(1, 2, 3) == static_cast<float>(hu_window(p.stack.frames.at(1, 2, 3))));
}
