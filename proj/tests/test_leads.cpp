#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mesolb/leads.hpp"

using namespace mesolb;
using testutil::delta_site;
using testutil::site_vector;

namespace {
const LeadSpec kUnit{1, 0.0, 1.0, {}};
}

TEST_CASE("wavenumber parametrization") {
    auto p = wavenumber(kUnit, 0.0);
    CHECK(p.wavenumber == doctest::Approx(pi / 2).epsilon(1e-14));
    CHECK(p.velocity_factor == doctest::Approx(2.0).epsilon(1e-14));

    p = wavenumber(kUnit, std::sqrt(2.0));
    CHECK(p.wavenumber == doctest::Approx(pi / 4).epsilon(1e-14));
    CHECK(p.velocity_factor == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

    CHECK_THROWS_AS(wavenumber(kUnit, 2.0), channel_closed);
    CHECK_THROWS_AS(wavenumber(kUnit, -2.0), channel_closed);
    CHECK_THROWS_AS(wavenumber(kUnit, 2.5), channel_closed);

    // dispersion round trip, random energies
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-1.999, 1.999);
    for (int i = 0; i < 200; ++i) {
        const double e = unif(rng);
        const auto q = wavenumber(kUnit, e);
        CHECK(std::abs(2.0 * std::cos(q.wavenumber) - e) <= 1e-12 * std::max(1.0, std::abs(e)));
        CHECK(q.velocity_factor > 0.0);
    }
}

TEST_CASE("eigenfunction amplitudes") {
    CHECK(eigenfunction_amplitude(kUnit, 0.0, 2) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(eigenfunction_amplitude(kUnit, 0.0, 1) ==
          doctest::Approx(1.0 / std::sqrt(pi)).epsilon(1e-14));
}

TEST_CASE("energy normalization against finite-chain spectral weight") {
    // Integral of |psi_E(site)|^2 over an energy window equals the site's
    // spectral weight there; brute force on a 10^4-site chain.
    const int length = 10000;
    for (int site : {1, 2, 3}) {
        for (auto [lo, hi] : {std::pair{-1.5, 0.3}, std::pair{0.1, 1.9}}) {
            // plain Simpson quadrature of the closed-form density
            const int n = 4000;
            double integral = 0.0;
            for (int i = 0; i < n; ++i) {
                const double h = (hi - lo) / n;
                const double a = lo + i * h;
                auto f = [&](double e) {
                    const double amp = eigenfunction_amplitude(kUnit, e, site);
                    return amp * amp;
                };
                integral += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
            }
            const double weight = testutil::chain_window_weight(0.0, 1.0, length, site, lo, hi);
            CHECK(integral == doctest::Approx(weight).epsilon(2e-3));
        }
    }
}

TEST_CASE("generalized Fourier coefficients") {
    CHECK(generalized_fourier(kUnit, 0.0, delta_site(1)).real() ==
          doctest::Approx(1.0 / std::sqrt(pi)).epsilon(1e-14));
    CHECK(std::abs(generalized_fourier(kUnit, 0.0, delta_site(2))) <= 1e-15);

    // conjugation convention: f(E) = sum_n psi(n) conj(f(n))
    const auto f = site_vector({1, 3}, {cdouble(0.6, 0.2), cdouble(0.0, -0.77)});
    const double e = 0.37;
    cdouble direct = 0.0;
    for (std::size_t i = 0; i < f.sites.size(); ++i)
        direct += eigenfunction_amplitude(kUnit, e, f.sites[i]) *
                  std::conj(f.amps[static_cast<Eigen::Index>(i)]);
    CHECK(std::abs(generalized_fourier(kUnit, e, f) - direct) <= 1e-15);

    // trigonometric-polynomial structure: coefficient of a multi-site vector
    // equals the term-by-term sum on a fine grid
    const auto g = site_vector({1, 2, 5}, {0.5, cdouble(0.1, 0.4), -0.3});
    for (int i = 1; i < 40; ++i) {
        const double en = -2.0 + 4.0 * i / 40.0;
        cdouble sum = 0.0;
        for (std::size_t s = 0; s < g.sites.size(); ++s)
            sum += eigenfunction_amplitude(kUnit, en, g.sites[s]) *
                   std::conj(g.amps[static_cast<Eigen::Index>(s)]);
        CHECK(std::abs(generalized_fourier(kUnit, en, g) - sum) <= 1e-14);
    }
}

TEST_CASE("surface resolvent closed form") {
    // band centre: G11 = i, modulus 1/t
    const cdouble g11 = lead_resolvent(kUnit, 0.0, delta_site(1), delta_site(1));
    CHECK(std::abs(g11 - cdouble(0.0, 1.0)) <= 1e-14);

    // below the band: real
    const cdouble below = lead_resolvent(kUnit, -3.0, delta_site(1), delta_site(1));
    CHECK(std::abs(below.imag()) <= 1e-15);
    CHECK(below.real() > 0.0);  // (H - E)^{-1} positive below the spectrum

    CHECK_THROWS_AS(lead_resolvent(kUnit, 2.0, delta_site(1), delta_site(1)), exceptional_energy);

    const LeadSpec shifted{7, 3.0, 0.5, {}};
    const cdouble above = lead_resolvent(shifted, 5.5, delta_site(2), delta_site(2));
    CHECK(std::abs(above.imag()) <= 1e-15);
    CHECK(above.real() < 0.0);  // above the spectrum
}

TEST_CASE("Sokhotski consistency at a pinned energy") {
    const cdouble r = lead_resolvent(kUnit, 1.0, delta_site(1), delta_site(1));
    const double rhs = pi * std::norm(generalized_fourier(kUnit, 1.0, delta_site(1)));
    CHECK(std::abs(r.imag() - rhs) <= 1e-12);
}

TEST_CASE("Sokhotski consistency over random vectors and energies") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        LeadSpec lead{1, 0.8 * (unif(rng) - 0.5), 0.6 + 0.8 * unif(rng), {}};
        const int support = 1 + static_cast<int>(unif(rng) * 8.0);
        LeadVector f;
        f.amps.resize(support);
        for (int s = 0; s < support; ++s) {
            f.sites.push_back(s + 1);
            f.amps[s] = cdouble(unif(rng) - 0.5, unif(rng) - 0.5);
        }
        f.amps /= f.norm();
        auto [lo, hi] = band(lead);
        const double e = lo + (hi - lo) * (0.001 + 0.998 * unif(rng));
        const cdouble r = lead_resolvent(lead, e, f, f);
        const double rhs = pi * std::norm(generalized_fourier(lead, e, f));
        CHECK(std::abs(r.imag() - rhs) <= 1e-10 * std::max(1.0, std::abs(r)));
    }
}

TEST_CASE("Herglotz sign of the diagonal form") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const LeadSpec lead{1, 0.3, 0.9, {}};
    for (int trial = 0; trial < 200; ++trial) {
        LeadVector f;
        const int support = 1 + static_cast<int>(unif(rng) * 5.0);
        f.amps.resize(support);
        for (int s = 0; s < support; ++s) {
            f.sites.push_back(s + 1);
            f.amps[s] = cdouble(unif(rng) - 0.5, unif(rng) - 0.5);
        }
        const double e = -3.0 + 6.0 * unif(rng);
        auto [lo, hi] = band(lead);
        if (std::abs(e - lo) < 1e-6 || std::abs(e - hi) < 1e-6) continue;
        CHECK(lead_resolvent(lead, e, f, f).imag() >= -1e-14);
    }
}

TEST_CASE("agreement with a 10^4-site truncation at E + i eta") {
    const int length = 10000;
    const double eta = 1e-3;
    for (double e : {-1.3, 0.0, 0.45, 1.7}) {
        const auto f = site_vector({1, 2}, {0.8, cdouble(0.0, -0.6)});
        const auto g = site_vector({1, 4}, {cdouble(0.5, 0.5), 0.70710678118654752});
        // closed form for (H - E - i0)^{-1} vs finite solve at z = E + i eta
        const cdouble closed = lead_resolvent(kUnit, e, f, g);
        const cdouble finite =
            testutil::truncated_chain_resolvent(0.0, 1.0, length, cdouble(e, eta), f, g);
        CHECK(std::abs(closed - finite) <= 30.0 * eta);
    }
}

TEST_CASE("resolvent symmetry in real vectors") {
    const auto f = site_vector({1, 3}, {0.6, 0.8});
    const auto g = site_vector({2, 5}, {-0.5, 0.4});
    for (double e : {-1.1, 0.9, 2.7}) {
        const cdouble a = lead_resolvent(kUnit, e, f, g);
        const cdouble b = lead_resolvent(kUnit, e, g, f);
        CHECK(std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)));
    }
}
