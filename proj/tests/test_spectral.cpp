#include <doctest.h>

#include "sns/core/random.hpp"
#include "sns/spectral/field.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace sns;
using namespace sns::spectral;

namespace {

SpectralField random_field(int N, std::uint64_t seed, int comps = 2) {
    SpectralField f(N, comps);
    NormalSource r(seed);
    for (int c = 0; c < comps; ++c)
        for_each_stored_mode(N, [&](int k1, int k2, int) {
            if (k2 == 0 && k1 <= 0) return;
            f.set_mode(c, k1, k2, cplx(r.normal(), r.normal()));
        });
    return f;
}

}  // namespace

TEST_CASE("set_mode keeps the k2 = 0 row conjugate") {
    SpectralField f(4);
    f.set_mode(0, -3, 0, cplx(1.0, 2.0));
    CHECK(f.at(0, 3, 0) == cplx(1.0, -2.0));
    CHECK(f.at(0, -3, 0) == cplx(1.0, 2.0));
    f.set_mode(1, 2, -1, cplx(0.5, 0.25));
    CHECK(f.at(1, -2, 1) == cplx(0.5, -0.25));
    CHECK(f.coef(1, 2, -1) == cplx(0.5, 0.25));
    CHECK(f.coef(1, 9, 0) == cplx{});
}

TEST_CASE("grid transform: single mode and round trip") {
    const int N = 5, M = dealiased_grid_size(N);
    CHECK(M >= 3 * N + 1);
    GridTransform tr(N, M);
    SpectralField f(N);
    f.set_mode(0, 2, 3, cplx(1.0, 0.0));
    RealGrid g = tr.make_grid();
    tr.to_grid(f, 0, g.data());
    double err = 0.0;
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
            const double x = 2 * std::numbers::pi * a / M, y = 2 * std::numbers::pi * b / M;
            err = std::max(err, std::abs(g[a * M + b] - 2.0 * std::cos(2 * x + 3 * y)));
        }
    CHECK(err < 1e-12);

    SpectralField r = random_field(N, 7), back(N);
    for (int c = 0; c < 2; ++c) {
        tr.to_grid(r, c, g.data());
        tr.from_grid(g.data(), back, c);
    }
    CHECK(max_abs_diff(r, back) < 1e-12);
}

TEST_CASE("Parseval: inner product equals the normalised grid integral") {
    const int N = 6, M = dealiased_grid_size(N);
    GridTransform tr(N, M);
    SpectralField a = random_field(N, 11), b = random_field(N, 12);
    RealGrid ga = tr.make_grid(), gb = tr.make_grid();
    double quad = 0.0;
    for (int c = 0; c < 2; ++c) {
        tr.to_grid(a, c, ga.data());
        tr.to_grid(b, c, gb.data());
        for (std::size_t i = 0; i < ga.size(); ++i) quad += ga[i] * gb[i];
    }
    quad /= double(M) * M;
    CHECK(std::abs(quad - inner(a, b)) < 1e-10 * norm(a) * norm(b));
}

TEST_CASE("Leray projection: projector identities") {
    const int N = 8;
    SpectralField f = random_field(N, 3), g = random_field(N, 4);
    SpectralField pf = leray_project(f);
    CHECK(max_divergence(pf) < 1e-12 * norm(pf));
    CHECK(max_abs_diff(leray_project(pf), pf) < 1e-14 * max_abs(pf) + 1e-300);
    const double lhs = inner(pf, g), rhs = inner(f, leray_project(g));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * norm(f) * norm(g));
    CHECK(pf.at(0, 0, 0) == cplx{});

    // gradients are annihilated
    SpectralField grad(N);
    NormalSource r(5);
    for_each_stored_mode(N, [&](int k1, int k2, int) {
        if (k2 == 0 && k1 <= 0) return;
        const cplx phi(r.normal(), r.normal());
        grad.set_mode(0, k1, k2, cplx(0, k1) * phi);
        grad.set_mode(1, k1, k2, cplx(0, k2) * phi);
    });
    CHECK(max_abs(leray_project(grad)) < 1e-13 * max_abs(grad));
}

TEST_CASE("shell order: each cutoff's list is a prefix of the next") {
    for (int N = 1; N < 12; ++N) {
        const auto& a = shell_order(N);
        const auto& b = shell_order(N + 1);
        REQUIRE(a.size() < b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
        // one representative per +-k pair, all of them
        CHECK(a.size() == static_cast<std::size_t>(((2 * N + 1) * (2 * N + 1) - 1) / 2));
        std::set<std::pair<int, int>> seen(a.begin(), a.end());
        CHECK(seen.size() == a.size());
        for (auto [k1, k2] : a) CHECK((k2 > 0 || (k2 == 0 && k1 > 0)));
    }
}

TEST_CASE("resized pads and truncates") {
    SpectralField f = random_field(4, 9);
    SpectralField g = f.resized(7).resized(4);
    CHECK(max_abs_diff(f, g) == 0.0);
    CHECK(f.resized(2).at(1, -2, 2) == f.at(1, -2, 2));
}

TEST_CASE("nice sizes") {
    CHECK(nice_fft_size(97) == 100);
    CHECK(nice_fft_size(98) == 100);
    CHECK(dealiased_grid_size(16) == 50);
    CHECK(dealiased_grid_size(32) == 100);
    CHECK(dealiased_grid_size(64) == 200);
}
