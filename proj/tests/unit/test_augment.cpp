#include <cmath>

#include "affectloop/augment.hpp"
#include "affectloop/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace affectloop;

namespace {

AugmentParams shift(double fx, double fy) {
    AugmentParams p;
    p.shift_x_frac = fx;
    p.shift_y_frac = fy;
    return p;
}

AugmentConfig collapsed() {
    AugmentConfig c;
    c.rotation_deg = {0, 0};
    c.zoom = {1, 1};
    c.shift_x_frac = {0, 0};
    c.shift_y_frac = {0, 0};
    c.brightness = {1, 1};
    c.hflip_prob = 0;
    return c;
}

}  // namespace

TEST_CASE("identity parameters give byte-identical output") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto img = testsupport::random_image(rng, 1 + static_cast<int>(rng() % 60), 1 + static_cast<int>(rng() % 60));
        CHECK(apply(img, AugmentParams{}) == img);
    }
}

TEST_CASE("horizontal flip is an involution") {
    std::mt19937_64 rng(2);
    AugmentParams flip;
    flip.hflip = true;
    for (int i = 0; i < 20; ++i) {
        const auto img = testsupport::random_image(rng, 1 + static_cast<int>(rng() % 50), 1 + static_cast<int>(rng() % 50));
        const auto once = apply(img, flip);
        CHECK(once.at(0, 0) == img.at(img.width() - 1, 0));
        CHECK(apply(once, flip) == img);
    }
}

TEST_CASE("pure shift of +0.1 W moves (0,y) to (10,y) and fills the exposed columns") {
    const auto img = testsupport::coordinate_gradient(100, 100);
    const Rgb fill{0, 0, 0};
    const auto out = apply(img, shift(0.1, 0.0), fill);
    std::size_t mismatches = 0;
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            const Rgb want = x < 10 ? fill : img.at(x - 10, y);
            mismatches += !(out.at(x, y) == want);
        }
    }
    CHECK(mismatches == 0);
    CHECK(out.at(10, 37) == img.at(0, 37));
}

TEST_CASE("integer-pixel shifts match index arithmetic in both axes and signs") {
    const Rgb fill{9, 199, 42};
    struct Case {
        int w, h;
        double fx, fy;
    };
    for (const Case c : {Case{100, 100, -0.1, 0.0}, Case{100, 100, 0.0, 0.1}, Case{100, 100, 0.0, -0.1},
                         Case{50, 40, 0.1, 0.1}, Case{50, 40, -0.06, 0.05}, Case{80, 20, 0.1, -0.1}}) {
        CAPTURE(c.w);
        CAPTURE(c.fx);
        CAPTURE(c.fy);
        const auto img = testsupport::coordinate_gradient(c.w, c.h);
        const auto out = apply(img, shift(c.fx, c.fy), fill);
        const int dx = static_cast<int>(std::lround(c.fx * c.w));
        const int dy = static_cast<int>(std::lround(c.fy * c.h));
        std::size_t mismatches = 0;
        for (int y = 0; y < c.h; ++y) {
            for (int x = 0; x < c.w; ++x) {
                const int sx = x - dx, sy = y - dy;
                const bool inside = sx >= 0 && sy >= 0 && sx < c.w && sy < c.h;
                mismatches += !(out.at(x, y) == (inside ? img.at(sx, sy) : fill));
            }
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("quarter and half turns are exact permutations") {
    const int n = 31;
    const auto img = testsupport::coordinate_gradient(n, n);
    AugmentParams half;
    half.rotation_deg = 180;
    AugmentParams quarter;
    quarter.rotation_deg = 90;
    const auto h = apply(img, half);
    const auto q = apply(img, quarter);
    std::size_t bad_half = 0, bad_quarter = 0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            bad_half += !(h.at(x, y) == img.at(n - 1 - x, n - 1 - y));
            // Clockwise on screen: the top row ends up as the right column.
            bad_quarter += !(q.at(x, y) == img.at(y, n - 1 - x));
        }
    }
    CHECK(bad_half == 0);
    CHECK(bad_quarter == 0);
}

TEST_CASE("zoom above 1 magnifies about the centre") {
    const int n = 41;  // integral centre (20, 20)
    const auto img = testsupport::coordinate_gradient(n, n);
    AugmentParams z;
    z.zoom = 2.0;
    const auto out = apply(img, z);
    CHECK(out.at(20, 20) == img.at(20, 20));
    CHECK(out.at(22, 20) == img.at(21, 20));
    CHECK(out.at(20, 16) == img.at(20, 18));
    CHECK(out.at(0, 0) == img.at(10, 10));
    // Zooming out exposes fill at the corners.
    z.zoom = 0.5;
    const auto small = apply(img, z, {1, 2, 3});
    CHECK(small.at(0, 0) == Rgb{1, 2, 3});
    CHECK(small.at(20, 20) == img.at(20, 20));
}

TEST_CASE("brightness is clamp(round(b * v)) per channel") {
    AugmentParams p;
    p.brightness = 1.2;
    const auto out = apply(testsupport::constant_image(30, 20, 100), p);
    CHECK(out == testsupport::constant_image(30, 20, 120));
    for (double b : {0.8, 0.93, 1.0, 1.07, 1.2}) {
        for (int v = 0; v < 256; ++v) {
            p.brightness = b;
            const auto o = apply(testsupport::constant_image(3, 3, static_cast<std::uint8_t>(v)), p);
            const long want = std::clamp(std::lround(b * v), 0L, 255L);
            CHECK(o.at(1, 1).r == want);
        }
    }
}

TEST_CASE("dimensions are preserved and output is deterministic") {
    std::mt19937_64 rng(11);
    const AugmentConfig cfg;
    for (int i = 0; i < 300; ++i) {
        const int w = 1 + static_cast<int>(rng() % 48);
        const int h = 1 + static_cast<int>(rng() % 48);
        const auto img = testsupport::random_image(rng, w, h);
        const auto p = sample_params(cfg, static_cast<std::uint64_t>(i));
        const auto out = apply(img, p);
        CHECK(out.width() == w);
        CHECK(out.height() == h);
        if (i % 10 == 0) CHECK(apply(img, p) == out);
    }
}

TEST_CASE("zero-sized images are rejected") {
    CHECK_THROWS_AS(apply(Raster{}, AugmentParams{}), Error);
    AugmentParams bad;
    bad.zoom = 0;
    CHECK_THROWS_AS(apply(testsupport::constant_image(2, 2, 0), bad), Error);
}

TEST_CASE("collapsed ranges sample the identity") {
    const auto cfg = collapsed();
    for (std::uint64_t i = 0; i < 100; ++i) CHECK(sample_params(cfg, i) == AugmentParams{});
}

TEST_CASE("sampling is reproducible per seed, draw and worker") {
    AugmentConfig cfg;
    cfg.seed = 1234;
    ParamSampler a(cfg), b(cfg);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto pa = a.next();
        CHECK(pa == b.next());
        CHECK(pa == sample_params(cfg, i));
    }
    CHECK(a.draws() == 200);
    CHECK_FALSE(sample_params(cfg, 5, 0) == sample_params(cfg, 5, 1));
    AugmentConfig other = cfg;
    other.seed = 1235;
    CHECK_FALSE(sample_params(cfg, 0) == sample_params(other, 0));
}

TEST_CASE("sampled parameters stay in range and are unbiased") {
    const AugmentConfig cfg;
    const int n = 10000;
    double rot_sum = 0;
    int flips = 0;
    for (int i = 0; i < n; ++i) {
        const auto p = sample_params(cfg, static_cast<std::uint64_t>(i));
        REQUIRE(p.rotation_deg >= -15.0);
        REQUIRE(p.rotation_deg <= 15.0);
        REQUIRE(p.zoom >= 0.85);
        REQUIRE(p.zoom <= 1.15);
        REQUIRE(std::abs(p.shift_x_frac) <= 0.1);
        REQUIRE(std::abs(p.shift_y_frac) <= 0.1);
        REQUIRE(p.brightness >= 0.8);
        REQUIRE(p.brightness <= 1.2);
        REQUIRE(cfg.admits(p));
        rot_sum += p.rotation_deg;
        flips += p.hflip;
    }
    // Standard error of the mean of U(-15,15) over 10^4 draws is 30/sqrt(12)/100 = 0.0866 deg.
    CHECK(std::abs(rot_sum / n) < 1.0);
    // Flip rate: standard error 0.005; allow 4 of them.
    CHECK(std::abs(flips / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("augment config validation and serialization") {
    AugmentConfig c;
    CHECK_NOTHROW(c.validate());
    c.rotation_deg = {5, -5};
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.zoom = {0, 1};
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.hflip_prob = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.brightness = {0.8, std::nan("")};
    CHECK_THROWS_AS(c.validate(), Error);

    AugmentConfig d;
    d.seed = 77;
    d.fill_value = {1, 2, 3};
    d.hflip_prob = 0.25;
    const auto back = AugmentConfig::from_json(d.to_json());
    CHECK(back.rotation_deg == d.rotation_deg);
    CHECK(back.zoom == d.zoom);
    CHECK(back.shift_x_frac == d.shift_x_frac);
    CHECK(back.brightness == d.brightness);
    CHECK(back.hflip_prob == 0.25);
    const auto j = AugmentConfig{}.to_json();
    CHECK(j.at("rotation_deg") == nlohmann::json::array({-15.0, 15.0}));
    CHECK(j.at("shift_frac") == nlohmann::json::array({0.1, 0.1}));
}
