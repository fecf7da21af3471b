#include <doctest.h>

#include <fstream>
#include <set>

#include "patchseg/checkpoint.hpp"
#include "patchseg/error.hpp"
#include "patchseg/trainer.hpp"
#include "support.hpp"

using namespace patchseg;
using namespace patchseg::testing;
namespace fs = std::filesystem;

TEST_CASE("lr_at examples") {
    CHECK(lr_at(100, 1000, 0.005) == 0.005);
    CHECK(lr_at(500, 1000, 0.005) == 0.0005);
    CHECK(lr_at(900, 1000, 0.005) == 0.00005);
    CHECK(lr_at(399, 1000, 0.005) == 0.005);
    CHECK(lr_at(400, 1000, 0.005) == 0.0005);
    CHECK(lr_at(799, 1000, 0.005) == 0.0005);
    CHECK(lr_at(800, 1000, 0.005) == 0.00005);
    CHECK_THROWS_AS(lr_at(1000, 1000, 0.005), ArgumentError);
    CHECK_THROWS_AS(lr_at(-1, 1000, 0.005), ArgumentError);
}

TEST_CASE("lr schedule is piecewise constant with three values") {
    for (int t = 3; t < 400; ++t) {
        std::set<double> values;
        double previous = lr_at(0, t, 0.005);
        for (int s = 0; s < t; ++s) {
            const double lr = lr_at(s, t, 0.005);
            REQUIRE(lr <= previous);
            previous = lr;
            values.insert(lr);
        }
        CHECK(values.size() == 3);
    }
}

TEST_CASE("momentum SGD matches the hand-computed velocity recursion") {
    // f(p) = 0.5 * a * p^2, gradient a * p.
    const double a = 2.0, lr = 0.1, m = 0.9, wd = 0.01;
    Parameter<double> p("p", {1});
    p.value[0] = 1.5;
    SgdMomentum<double> sgd(m, wd);
    double value = 1.5, velocity = 0.0;
    for (int step = 0; step < 5; ++step) {
        p.grad[0] = a * p.value[0];
        sgd.step({&p}, lr);
        velocity = m * velocity + (a * value + wd * value);
        value = value - lr * velocity;
        CHECK(p.value[0] == value);
    }
}

TEST_CASE("equalize_budget reproduces the reference table") {
    const int crops[] = {80, 120, 160, 240, 480};
    const auto budgets = equalize_budget(crops);
    REQUIRE(budgets.size() == 5);
    CHECK(budgets[0].batch == 144);
    CHECK(budgets[0].epochs == 3600.0);
    CHECK(budgets[1].batch == 64);
    CHECK(budgets[1].epochs == 1600.0);
    CHECK(budgets[2].batch == 36);
    CHECK(budgets[2].epochs == 900.0);
    CHECK(budgets[3].batch == 16);
    CHECK(budgets[3].epochs == 400.0);
    CHECK(budgets[4].batch == 4);
    CHECK(budgets[4].epochs == 100.0);
    for (const auto& b : budgets) {
        CHECK_FALSE(b.rounded);
        CHECK(b.batch * b.crop * b.crop == 16 * 240 * 240);
    }
}

TEST_CASE("equalize_budget rounds and records non-square budgets") {
    const int crops[] = {100, 1000};
    const auto budgets = equalize_budget(crops);
    CHECK(budgets[0].batch == 92);  // 16 * 2.4^2 = 92.16
    CHECK(budgets[0].rounded);
    CHECK(budgets[0].exact_batch == doctest::Approx(92.16));
    CHECK(budgets[1].batch == 1);  // 0.9216 rounds to 1
    CHECK(budgets[1].rounded);
    const int bad[] = {0};
    CHECK_THROWS_AS(equalize_budget(bad), ArgumentError);
}

namespace {
std::vector<PreparedStack> tiny_corpus(int n = 4) {
    std::vector<PreparedStack> out;
    const PhantomParams p = small_phantom(32, 3);
    PhantomParams q = p;
    q.min_lesion_radius = 2.0;
    q.max_lesion_radius = 4.0;
    for (int i = 0; i < n; ++i) out.push_back(prepare(generate_stack(q, static_cast<std::uint64_t>(i))));
    return out;
}

TrainConfig tiny_config(int steps) {
    TrainConfig cfg;
    cfg.preset = "tiny";
    cfg.total_steps = steps;
    cfg.batch = BatchSpec::of(16, 4, 2);
    cfg.seed = 21;
    return cfg;
}
}  // namespace

TEST_CASE("TrainConfig validation and JSON") {
    TrainConfig cfg = tiny_config(0);
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    const auto data = tiny_corpus(1);
    CHECK_THROWS_AS(train(data, cfg), ArgumentError);
    cfg.total_steps = 10;
    cfg.lr0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = tiny_config(7);
    const nlohmann::json j = cfg;
    CHECK(j.at("spec").at("C") == 16);
    CHECK(j.at("loss").at("alpha") == 3.0);
    CHECK(j.at("lr0") == 0.005);
    CHECK(j.at("momentum") == 0.9);
    CHECK(nlohmann::json(j.get<TrainConfig>()) == j);
}

TEST_CASE("identical config and seed give identical logs and parameters") {
    const auto data = tiny_corpus();
    TempDir dir("trainer_determinism");
    const auto a = train(data, tiny_config(6), dir / "a");
    const auto b = train(data, tiny_config(6), dir / "b");
    REQUIRE(a.log.size() == 6);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].lr == b.log[i].lr);
    }
    const auto sa = a.net.state();
    const auto sb = b.net.state();
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i]->value == sb[i]->value);
    CHECK(a.net.trained());

    std::ifstream log(dir / "a" / "train_log.ndjson");
    int lines = 0;
    for (std::string line; std::getline(log, line); ++lines) {
        const auto rec = nlohmann::json::parse(line);
        CHECK(rec.at("step") == lines);
        CHECK(rec.contains("lr"));
        CHECK(rec.contains("loss"));
        CHECK(rec.contains("wallclock"));
    }
    CHECK(lines == 6);
    CHECK(fs::exists(dir / "a" / "checkpoint" / "manifest.json"));

    TrainConfig other = tiny_config(6);
    other.seed = 22;
    CHECK(train(data, other).log.back().loss != a.log.back().loss);
}

TEST_CASE("checkpoint cadence") {
    const auto data = tiny_corpus(2);
    TempDir dir("trainer_cadence");
    TrainConfig cfg = tiny_config(5);
    cfg.checkpoint_every = 2;
    train(data, cfg, dir.path());
    CHECK(fs::exists(dir / "checkpoints" / "step_000002" / "manifest.json"));
    CHECK(fs::exists(dir / "checkpoints" / "step_000004" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "checkpoints" / "step_000006"));
    const auto manifest = read_checkpoint_manifest(dir / "checkpoint");
    CHECK(manifest.at("training_config").get<TrainConfig>().total_steps == 5);
}

TEST_CASE("non-finite loss aborts with a state dump") {
    const auto data = tiny_corpus(2);
    TempDir dir("trainer_divergence");
    TrainConfig cfg = tiny_config(50);
    cfg.lr0 = 1e30;
    CHECK_THROWS_AS(train(data, cfg, dir.path()), DivergenceError);
    REQUIRE(fs::exists(dir / "divergence.json"));
    const auto dump = nlohmann::json::parse(std::ifstream(dir / "divergence.json"));
    CHECK(dump.contains("step"));
    CHECK(dump.contains("parameters"));
}

TEST_CASE("too many images per batch is rejected") {
    const auto data = tiny_corpus(1);
    TrainConfig cfg = tiny_config(3);
    cfg.batch = BatchSpec::of(16, 64, 1);
    CHECK_THROWS_AS(train(data, cfg), ArgumentError);
}
