#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "patchseg/checkpoint.hpp"
#include "patchseg/error.hpp"
#include "patchseg/loss.hpp"
#include "patchseg/reference_net.hpp"
#include "support.hpp"

using namespace patchseg;
using namespace patchseg::testing;

namespace {

template <typename T>
Tensor<T> random_input(std::mt19937_64& rng, int n, int size) {
    Tensor<T> x(n, 3, size, size);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (auto& v : x.data) v = static_cast<T>(u(rng));
    return x;
}

double weighted_sum(const Tensor<double>& t, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.data.size(); ++i) s += t.data[i] * w[i];
    return s;
}

}  // namespace

TEST_CASE("net presets") {
    CHECK(net_preset("tiny").width == 8);
    CHECK(net_preset("small").width == 12);
    CHECK(net_preset("base").width == 16);
    CHECK_THROWS_AS(net_preset("huge"), ArgumentError);
    const ReferenceNet<float> small(net_preset("small"), 0);
    CHECK(small.parameter_count() >= 100000);
    CHECK(small.parameter_count() <= 1000000);
}

TEST_CASE("reference net shape contract") {
    ReferenceNet<float> net(net_preset("tiny"), 1);
    std::mt19937_64 rng(1);
    const auto logits = net.forward(random_input<float>(rng, 2, 64));
    CHECK(logits.n == 2);
    CHECK(logits.c == 1);
    CHECK(logits.h == 64);
    CHECK(logits.w == 64);
    CHECK_THROWS_AS(net.forward(random_input<float>(rng, 1, 60)), ShapeError);
    CHECK_THROWS_AS(net.forward(Tensor<float>(1, 2, 64, 64)), ShapeError);
}

TEST_CASE("every crop size of the ablation grids is supported through padding") {
    ReferenceNet<float> net(net_preset("tiny"), 2);
    std::mt19937_64 rng(2);
    for (int size : {20, 30, 40, 60, 90, 120, 80, 16}) {
        const auto logits = forward_any_size(net, random_input<float>(rng, 1, size));
        CHECK(logits.h == size);
        CHECK(logits.w == size);
        for (float v : logits.data) CHECK(std::isfinite(v));
    }
}

TEST_CASE("evaluation mode is deterministic") {
    ReferenceNet<float> net(net_preset("tiny"), 3);
    std::mt19937_64 rng(3);
    const auto x = random_input<float>(rng, 1, 32);
    CHECK(net.forward(x).data == net.forward(x).data);
}

TEST_CASE("interior logits follow a one-stride shift of the input") {
    ReferenceNet<float> net(net_preset("tiny"), 4);
    std::mt19937_64 rng(4);
    const int size = 160, shift = net.stride();
    const auto big = random_input<float>(rng, 1, size + shift);
    Tensor<float> a(1, 3, size, size), b(1, 3, size, size);
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < size; ++r)
            for (int q = 0; q < size; ++q) {
                a.at(0, c, r, q) = big.at(0, c, r, q);
                b.at(0, c, r, q) = big.at(0, c, r + shift, q + shift);
            }
    const auto la = net.forward(a), lb = net.forward(b);
    double worst = 0.0;
    for (int r = 56; r < size - 56; ++r)
        for (int q = 56; q < size - 56; ++q)
            worst = std::max(worst, static_cast<double>(std::abs(la.at(0, 0, r + shift, q + shift) - lb.at(0, 0, r, q))));
    CHECK(worst <= 1e-4);
}

TEST_CASE("network gradients match central differences") {
    for (bool training : {true, false}) {
        CAPTURE(training);
        ReferenceNet<double> net(net_preset("tiny"), 5);
        net.set_training(training);
        std::mt19937_64 rng(5);
        auto x = random_input<double>(rng, 2, 16);
        std::normal_distribution<double> g;
        std::vector<double> w(2 * 16 * 16);
        for (auto& v : w) v = g(rng);

        net.zero_grad();
        Tensor<double> seed(2, 1, 16, 16);
        seed.data = w;
        net.forward(x);
        const auto grad_x = net.backward(seed, true);

        const double h = 1e-6;
        for (int probe = 0; probe < 12; ++probe) {
            const std::size_t i = std::uniform_int_distribution<std::size_t>(0, x.data.size() - 1)(rng);
            const double keep = x.data[i];
            x.data[i] = keep + h;
            const double up = weighted_sum(net.forward(x), w);
            x.data[i] = keep - h;
            const double down = weighted_sum(net.forward(x), w);
            x.data[i] = keep;
            CHECK(relative_error(grad_x.data[i], (up - down) / (2 * h), 1e-6) <= 1e-4);
        }
        auto params = net.parameters();
        for (int probe = 0; probe < 24; ++probe) {
            auto* p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng)];
            const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p->value.size() - 1)(rng);
            const double analytic = p->grad[i];
            const double keep = p->value[i];
            p->value[i] = keep + h;
            const double up = weighted_sum(net.forward(x), w);
            p->value[i] = keep - h;
            const double down = weighted_sum(net.forward(x), w);
            p->value[i] = keep;
            CAPTURE(p->name);
            CHECK(relative_error(analytic, (up - down) / (2 * h), 1e-6) <= 1e-4);
        }
    }
}

TEST_CASE("padded forward/backward gradients match central differences") {
    ReferenceNet<double> net(net_preset("tiny"), 6);
    std::mt19937_64 rng(6);
    auto x = random_input<double>(rng, 1, 13);
    std::vector<double> w(13 * 13);
    std::normal_distribution<double> g;
    for (auto& v : w) v = g(rng);
    Tensor<double> seed(1, 1, 13, 13);
    seed.data = w;
    forward_any_size(net, x);
    const auto grad_x = backward_any_size(net, seed, true);
    REQUIRE(grad_x.same_shape(x));
    const double h = 1e-6;
    for (int probe = 0; probe < 10; ++probe) {
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, x.data.size() - 1)(rng);
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double up = weighted_sum(forward_any_size(net, x), w);
        x.data[i] = keep - h;
        const double down = weighted_sum(forward_any_size(net, x), w);
        x.data[i] = keep;
        CHECK(relative_error(grad_x.data[i], (up - down) / (2 * h), 1e-6) <= 1e-4);
    }
}

TEST_CASE("weighted_bce closed forms") {
    const LossConfig cfg;
    const std::vector<double> zero{0.0};
    const std::vector<std::uint8_t> pos{1}, neg{0};
    CHECK(weighted_bce<double>(zero, pos, cfg) == doctest::Approx(3.0 * std::numbers::ln2).epsilon(1e-15));
    CHECK(weighted_bce<double>(zero, neg, cfg) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    const std::vector<double> confident{40.0};
    CHECK(weighted_bce<double>(confident, pos, cfg) < 1e-15);
    const std::vector<double> wrong{-40.0};
    CHECK(weighted_bce<double>(wrong, pos, cfg) == doctest::Approx(120.0));
    CHECK(std::isfinite(weighted_bce<double>(std::vector<double>{-1e4}, pos, cfg)));
}

TEST_CASE("weighted_bce is the mean over pixels and non-negative") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 3.0);
    std::bernoulli_distribution b(0.3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> z(17);
        std::vector<std::uint8_t> y(17);
        double expected = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = g(rng);
            y[i] = b(rng);
            const double s = sigmoid(z[i]);
            expected += y[i] ? -3.0 * std::log(s) : -std::log(1.0 - s);
        }
        expected /= 17.0;
        const double loss = weighted_bce<double>(z, y, LossConfig{});
        CHECK(loss >= 0.0);
        CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("weighted_bce errors") {
    const std::vector<double> z{0.0, 1.0};
    const std::vector<std::uint8_t> one{1}, bad{0, 2};
    CHECK_THROWS_AS(weighted_bce<double>(z, one, LossConfig{}), ArgumentError);
    CHECK_THROWS_AS(weighted_bce<double>(z, bad, LossConfig{}), ArgumentError);
    CHECK_THROWS_AS(weighted_bce<double>(std::vector<double>{}, std::vector<std::uint8_t>{}, LossConfig{}),
                    ArgumentError);
    CHECK_THROWS_AS((LossConfig{0.0}).validate(), ArgumentError);
}

TEST_CASE("positive pixels weigh alpha times negatives at sigmoid 0.5") {
    const std::vector<double> z{0.0, 0.0};
    const std::vector<std::uint8_t> y{1, 0};
    std::vector<double> grad(2);
    weighted_bce<double>(z, y, LossConfig{}, grad);
    CHECK(grad[0] == -3.0 * grad[1]);
}

TEST_CASE("weighted_bce gradient matches central differences") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 2.0);
    std::bernoulli_distribution b(0.4);
    std::vector<double> z(64), grad(64);
    std::vector<std::uint8_t> y(64);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = g(rng);
        y[i] = b(rng);
    }
    weighted_bce<double>(z, y, LossConfig{}, grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < z.size(); ++i) {
        auto zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        const double fd = (weighted_bce<double>(zp, y, LossConfig{}) - weighted_bce<double>(zm, y, LossConfig{})) / (2 * h);
        CHECK(relative_error(grad[i], fd) <= 1e-4);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TempDir dir("model_ckpt");
    ReferenceNet<float> net(net_preset("tiny"), 9);
    std::mt19937_64 rng(9);
    // Populate running statistics with a training-mode forward.
    net.set_training(true);
    net.forward(random_input<float>(rng, 2, 16));
    net.set_training(false);
    save_checkpoint(net, dir / "ck", nlohmann::json{{"note", "x"}});
    ReferenceNet<float> back = load_checkpoint(dir / "ck");
    CHECK(back.trained());
    const auto a = net.state();
    const auto b = back.state();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->name == b[i]->name);
        CHECK(a[i]->shape == b[i]->shape);
        CHECK(std::memcmp(a[i]->value.data(), b[i]->value.data(), a[i]->value.size() * sizeof(float)) == 0);
    }
    save_checkpoint(back, dir / "ck2", nlohmann::json{{"note", "x"}});
    for (const auto& entry : std::filesystem::directory_iterator(dir / "ck"))
        CHECK(read_bytes(entry.path()) == read_bytes(dir / "ck2" / entry.path().filename()));
    CHECK(read_checkpoint_manifest(dir / "ck").at("training_config").at("note") == "x");
}

TEST_CASE("checkpoint errors") {
    TempDir dir("model_ckpt_err");
    CHECK_THROWS_AS(load_checkpoint(dir / "none"), FormatError);
    ReferenceNet<float> net(net_preset("tiny"), 10);
    save_checkpoint(net, dir / "ck");
    for (const auto& e : std::filesystem::directory_iterator(dir / "ck"))
        if (e.path().extension() == ".bin") {
            std::filesystem::resize_file(e.path(), 4);
            break;
        }
    CHECK_THROWS_AS(load_checkpoint(dir / "ck"), CorruptionError);
}

TEST_CASE("double conversion preserves the forward pass") {
    ReferenceNet<float> net(net_preset("tiny"), 11);
    std::mt19937_64 rng(11);
    const auto x = random_input<float>(rng, 1, 24);
    ReferenceNet<double> twin = net.converted<double>();
    Tensor<double> xd(1, 3, 24, 24);
    for (std::size_t i = 0; i < x.data.size(); ++i) xd.data[i] = x.data[i];
    const auto lf = net.forward(x);
    const auto ld = twin.forward(xd);
    for (std::size_t i = 0; i < lf.data.size(); ++i) CHECK(std::abs(lf.data[i] - ld.data[i]) < 1e-3);
}
