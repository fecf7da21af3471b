#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "patchseg/dataset.hpp"
#include "patchseg/error.hpp"
#include "patchseg/stack_io.hpp"
#include "patchseg/synthdata.hpp"
#include "support.hpp"

using namespace patchseg;
using namespace patchseg::testing;

TEST_CASE("generate_stack is deterministic in (params, stack_seed)") {
    const PhantomParams p = small_phantom();
    const CtStack a = generate_stack(p, 3), b = generate_stack(p, 3), c = generate_stack(p, 4);
    CHECK(a.frames == b.frames);
    CHECK(*a.mask == *b.mask);
    CHECK_FALSE(a.frames == c.frames);
}

TEST_CASE("zero lesions gives an all-zero mask") {
    PhantomParams p = small_phantom();
    p.min_lesions = p.max_lesions = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK_FALSE(generate_stack(p, seed).positive());
}

TEST_CASE("rendered lesion area is within 15% of the analytic disc area") {
    PhantomParams p;
    p.min_lesions = p.max_lesions = 1;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Phantom ph = generate_phantom(p, seed);
        REQUIRE(ph.lesions.size() == 1);
        const LesionTruth& l = ph.lesions.front();
        const int d = static_cast<int>(std::lround(std::clamp(l.frame, 0.0, ph.stack.depth() - 1.0)));
        const double r = l.radius_at(d);
        if (r < 3.0) continue;
        const auto mask = ph.stack.mask->frame(d);
        const double area = static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
        CHECK(relative_error(area, std::numbers::pi * r * r) <= 0.15);
    }
}

TEST_CASE("lesions span at least two adjacent frames") {
    PhantomParams p;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Phantom ph = generate_phantom(p, seed);
        for (const auto& l : ph.lesions) {
            int covered = 0;
            for (int d = 0; d < ph.stack.depth(); ++d) covered += l.radius_at(d) > 0.0 ? 1 : 0;
            CHECK(covered >= 2);
        }
    }
}

TEST_CASE("stack label equals mask positivity and lesions are brighter than tissue") {
    PhantomParams p;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Phantom ph = generate_phantom(p, seed);
        CHECK(ph.stack.positive() == !ph.lesions.empty());
        if (ph.lesions.empty()) continue;
        const WindowedStack w = window_stack(ph.stack);
        double lesion_sum = 0.0, tissue_sum = 0.0;
        std::size_t lesion_n = 0, tissue_n = 0;
        const auto values = w.values.values();
        const auto mask = ph.stack.mask->values();
        const auto hu = ph.stack.frames.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (mask[i]) {
                lesion_sum += values[i];
                ++lesion_n;
            } else if (hu[i] > -500) {
                tissue_sum += values[i];
                ++tissue_n;
            }
        }
        CHECK(lesion_sum / lesion_n > tissue_sum / tissue_n);
    }
}

TEST_CASE("degenerate geometry is rejected") {
    PhantomParams p;
    p.max_lesion_radius = p.min_head_radius();
    CHECK_THROWS_AS(generate_stack(p, 0), ArgumentError);
    PhantomParams q;
    q.min_depth = 0;
    CHECK_THROWS_AS(q.validate(), ArgumentError);
}

TEST_CASE("generate_dataset writes the requested positive fraction") {
    TempDir dir("synth_dataset");
    PhantomParams p = small_phantom(48);
    const Manifest m = generate_dataset(p, 40, dir / "forty");
    CHECK(m.stacks.size() == 40);
    CHECK(std::count_if(m.stacks.begin(), m.stacks.end(), [](const ManifestEntry& e) { return e.label == 1; }) == 20);

    p.positive_rate = 0.125;
    const Manifest eight = generate_dataset(p, 8, dir / "eight");
    CHECK(std::count_if(eight.stacks.begin(), eight.stacks.end(), [](const ManifestEntry& e) { return e.label == 1; }) == 1);

    const Manifest reloaded = load_manifest(dir / "eight");
    CHECK(reloaded.stack_ids() == eight.stack_ids());
    for (const auto& e : reloaded.stacks) {
        const CtStack s = load_stack(dir / "eight" / e.stack_id);
        CHECK(s.positive() == (e.label == 1));
    }
    CHECK(reloaded.params.at("seed") == p.seed);
}

TEST_CASE("generate_dataset into an unwritable path is an I/O error") {
    TempDir dir("synth_unwritable");
    std::ofstream(dir / "file") << "x";
    CHECK_THROWS_AS(generate_dataset(small_phantom(48), 2, dir / "file" / "sub"), IoError);
}

TEST_CASE("PhantomParams JSON round-trip") {
    PhantomParams p = small_phantom(80, 42);
    p.lesion_hu = 65.0;
    const PhantomParams back = nlohmann::json(p).get<PhantomParams>();
    CHECK(nlohmann::json(back) == nlohmann::json(p));
}
