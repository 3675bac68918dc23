#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "mesolb/kernels.hpp"
#include "mesolb/scattering.hpp"

using namespace mesolb;
using testutil::delta_site;
using testutil::site_vector;

namespace {

kernels::SweepRow kernels_sweep_single(const SystemModel& model, const CouplingSubspace& sub,
                                       double energy) {
    return kernels::tmatrix_sweep(model, sub, {energy}, Tolerances{}).front();
}

ModelSpec contact_only_spec(double v) {
    ModelSpec spec;
    spec.scatterer = Eigen::MatrixXcd::Constant(1, 1, 0.0);
    spec.leads = {{1, 0.0, 1.0, {}}, {2, 0.0, 1.0, {}}};
    DirectContactTerm t;
    t.lead_j = 1;
    t.lead_k = 2;
    t.strength = v;
    t.vector_j = delta_site(1);
    t.vector_k = delta_site(1);
    spec.contacts = {t};
    return spec;
}

ModelSpec conjugated(const ModelSpec& spec) {
    ModelSpec out = spec;
    out.scatterer = spec.scatterer.conjugate();
    for (auto& c : out.couplings) {
        c.scatterer_vector = c.scatterer_vector.conjugate();
        c.lead_vector.amps = c.lead_vector.amps.conjugate();
    }
    for (auto& c : out.contacts) {
        c.vector_j.amps = c.vector_j.amps.conjugate();
        c.vector_k.amps = c.vector_k.amps.conjugate();
    }
    return out;
}

// Energies strictly inside at least two bands of the model, uniformly drawn.
std::vector<double> random_open_energies(const SystemModel& model, std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out;
    double lo = 1e300, hi = -1e300;
    for (const auto& lead : model.leads()) {
        auto [a, b] = band(lead);
        lo = std::min(lo, a);
        hi = std::max(hi, b);
    }
    int guard = 0;
    while (static_cast<int>(out.size()) < count && ++guard < 100000) {
        const double e = lo + (hi - lo) * unif(rng);
        if (open_channels(model, e).size() >= 2) out.push_back(e);
    }
    return out;
}

}  // namespace

TEST_CASE("coupling subspace of the Friedrichs model") {
    const auto model = testutil::friedrichs_model({0.0, 0.4, 0.9});
    const auto sub = coupling_subspace(model);
    REQUIRE(sub.size() == 3);  // shared s collapses to one basis vector
    CHECK(sub.basis[0].location == -1);
    CHECK(sub.basis[1].location == 1);
    CHECK(sub.basis[2].location == 2);
    Eigen::MatrixXcd expected(3, 3);
    expected << 0, 0.4, 0.9, 0.4, 0, 0, 0.9, 0, 0;
    CHECK((sub.v_matrix - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("coupling subspace of a contact-only model") {
    const auto model = validate_model(contact_only_spec(0.6));
    const auto sub = coupling_subspace(model);
    REQUIRE(sub.size() == 2);
    Eigen::MatrixXcd expected(2, 2);
    expected << 0, 0.6, 0.6, 0;
    CHECK((sub.v_matrix - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("subspace basis stays orthonormal for overlapping families") {
    // A contact vector equal to a coupling's lead vector must collapse, and
    // partially overlapping vectors must orthonormalize.
    ModelSpec spec = testutil::friedrichs_spec({0.0, 0.5, 0.5});
    DirectContactTerm t;
    t.lead_j = 1;
    t.lead_k = 2;
    t.strength = 0.3;
    t.vector_j = delta_site(1);                                      // duplicate of f_1
    t.vector_k = site_vector({1, 2}, {0.6, cdouble(0.0, 0.8)});       // overlaps f_2
    spec.contacts = {t};
    const auto model = validate_model(spec);
    const auto sub = coupling_subspace(model);
    CHECK(sub.size() == 4);  // s, f1 (shared with g_j), f2, residual of g_k
    CHECK(sub.v_matrix.rows() == 4);
    CHECK((sub.v_matrix - sub.v_matrix.adjoint()).cwiseAbs().maxCoeff() <= 1e-14);
    // optical theorem still holds on this geometry
    for (double e : {-1.2, 0.3, 1.4}) {
        const auto res = scattering_residuals(t_matrix(model, sub, e));
        CHECK(res.optical <= 1e-11);
    }
}

TEST_CASE("g0 matrix blocks") {
    const auto model = testutil::friedrichs_model({0.5, 0.3, 0.3});
    const auto sub = coupling_subspace(model);

    SUBCASE("far below every band the matrix is real symmetric") {
        const auto g0 = g0_matrix(model, sub, -7.0);
        CHECK(g0.imag().cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((g0 - g0.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("in-band entries compose the closed forms") {
        const double e = 0.8;
        const auto g0 = g0_matrix(model, sub, e);
        CHECK(std::abs(g0(0, 0) - 1.0 / (0.5 - e)) <= 1e-14);
        const cdouble surface =
            lead_resolvent(model.leads()[0], e, delta_site(1), delta_site(1));
        CHECK(std::abs(g0(1, 1) - surface) <= 1e-14);
        CHECK(std::abs(g0(2, 2) - surface) <= 1e-14);
        CHECK(std::abs(g0(0, 1)) == 0.0);  // cross-location blocks vanish
    }

    SUBCASE("scatterer eigenvalue is exceptional") {
        CHECK_THROWS_AS(g0_matrix(model, sub, 0.5), exceptional_energy);
        CHECK_THROWS_AS(g0_matrix(model, sub, 2.0), exceptional_energy);  // band edge
    }
}

TEST_CASE("empty coupling set gives zero T") {
    ModelSpec spec = testutil::friedrichs_spec();
    spec.couplings.clear();
    const auto model = validate_model(spec);
    const auto t = t_matrix(model, 0.7);
    CHECK(t.channels == std::vector<int>{1, 2});
    CHECK(t.entries.cwiseAbs().maxCoeff() == 0.0);

    const auto s = s_matrix(t);
    CHECK((s.entries - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("no open channels raises channel_closed") {
    const auto model = testutil::friedrichs_model();
    CHECK_THROWS_AS(t_matrix(model, 3.5), channel_closed);
}

TEST_CASE("Friedrichs resonance has unit transmittance") {
    // symmetric couplings: at Re D(E*) = 0 the off-diagonal modulus is 1/(2 pi)
    const testutil::FriedrichsSetup setup{0.5, 0.7, 0.7, 0.0, 1.0, 0.0, 1.0};
    const auto model = testutil::friedrichs_model(setup);
    const auto sub = coupling_subspace(model);

    // locate the resonance by bisection on Re D
    auto re_d = [&](double e) {
        const cdouble r = lead_resolvent(model.leads()[0], e, delta_site(1), delta_site(1));
        return e - setup.scatterer_energy + 2.0 * setup.v1 * setup.v1 * r.real();
    };
    double lo = 0.0, hi = 1.9;
    REQUIRE(re_d(lo) < 0.0);
    REQUIRE(re_d(hi) > 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (re_d(mid) < 0.0 ? lo : hi) = mid;
    }
    const double e_star = 0.5 * (lo + hi);

    const auto t = t_matrix(model, sub, e_star);
    CHECK(std::abs(t.entries(0, 1)) == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-10));
    const auto s = s_matrix(t);
    CHECK(std::norm(s.entries(0, 1)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(s.entries(0, 0)) <= 1e-5);
}

TEST_CASE("reference and linear-system Friedrichs paths agree") {
    const testutil::FriedrichsSetup setup{0.3, 0.45, 0.8, 0.1, 1.1, -0.2, 0.9};
    const auto model = testutil::friedrichs_model(setup);
    const auto sub = coupling_subspace(model);
    FriedrichsParams params;
    params.scatterer_energy = setup.scatterer_energy;
    params.lead1 = model.leads()[0];
    params.lead2 = model.leads()[1];
    params.v1 = setup.v1;
    params.v2 = setup.v2;
    params.f1 = delta_site(1);
    params.f2 = delta_site(1);

    double worst = 0.0;
    for (int i = 1; i < 200; ++i) {
        const double e = -1.9 + 3.7 * i / 200.0;
        if (!band_contains(params.lead1, e) || !band_contains(params.lead2, e)) continue;
        if (open_channels(model, e).size() != 2) continue;
        const auto reference = friedrichs_reference_t(params, e);
        const auto solved = t_matrix(model, sub, e);
        worst = std::max(worst, (reference - solved.entries).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("Friedrichs reference with a decoupled lead") {
    FriedrichsParams params;
    params.scatterer_energy = 0.2;
    params.lead1 = LeadSpec{1, 0.0, 1.0, {}};
    params.lead2 = LeadSpec{2, 0.0, 1.0, {}};
    params.v1 = 0.0;
    params.v2 = 0.6;
    params.f1 = delta_site(1);
    params.f2 = delta_site(1);
    const auto t = friedrichs_reference_t(params, 0.4);
    CHECK(std::abs(t(0, 1)) == 0.0);
    CHECK(std::abs(t(1, 0)) == 0.0);
    CHECK(std::abs(t(0, 0)) == 0.0);
    CHECK(std::abs(t(1, 1)) > 0.0);
    // the surviving entry matches a one-coupling model
    ModelSpec spec = testutil::friedrichs_spec({0.2, 0.6, 0.6});
    spec.couplings.erase(spec.couplings.begin());
    const auto model = validate_model(spec);
    const auto solved = t_matrix(model, 0.4);
    CHECK(std::abs(solved.entries(1, 1) - t(1, 1)) <= 1e-12);
    CHECK(std::abs(solved.entries(0, 0)) <= 1e-15);
}

TEST_CASE("scattering residual diagnostics") {
    TMatrix zero;
    zero.energy = 0.0;
    zero.channels = {1, 2};
    zero.entries = Eigen::MatrixXcd::Zero(2, 2);
    const auto rz = scattering_residuals(zero);
    CHECK(rz.optical == 0.0);
    CHECK(rz.normality == 0.0);
    CHECK(rz.rowcol == 0.0);

    TMatrix bad = zero;
    bad.entries(0, 1) = 1.0;
    const auto rb = scattering_residuals(bad);
    CHECK(rb.normality == doctest::Approx(1.0));
    CHECK_THROWS_WITH_AS(s_matrix(bad), doctest::Contains("scattering inconsistency"), error);
}

TEST_CASE("residuals vanish across a random ensemble") {
    std::mt19937_64 rng(2024);
    double worst_opt = 0.0, worst_norm = 0.0, worst_rowcol = 0.0, worst_unit = 0.0;
    for (int m = 0; m < 12; ++m) {
        const auto model = testutil::random_model(rng, 2 + m % 3);
        const auto sub = coupling_subspace(model);
        for (double e : random_open_energies(model, rng, 12)) {
            TMatrix t;
            try {
                t = t_matrix(model, sub, e);
            } catch (const exceptional_energy&) {
                continue;
            }
            const auto res = scattering_residuals(t);
            worst_opt = std::max(worst_opt, res.optical);
            worst_norm = std::max(worst_norm, res.normality);
            worst_rowcol = std::max(worst_rowcol, res.rowcol);
            worst_unit = std::max(worst_unit, s_matrix(t).unitarity_residual);
        }
    }
    CHECK(worst_opt <= 1e-9);
    CHECK(worst_norm <= 1e-9);
    CHECK(worst_rowcol <= 1e-9);
    CHECK(worst_unit <= 1e-9);
}

TEST_CASE("unitarity corollary: |det S| = 1") {
    std::mt19937_64 rng(77);
    const auto model = testutil::three_lead_flux_model();
    const auto sub = coupling_subspace(model);
    for (double e : random_open_energies(model, rng, 10)) {
        const auto s = s_matrix(t_matrix(model, sub, e));
        CHECK(std::abs(std::abs(s.entries.determinant()) - 1.0) <= 1e-10);
    }
}

TEST_CASE("two-lead reciprocity holds even with complex couplings") {
    std::mt19937_64 rng(123);
    double worst = 0.0;
    for (int m = 0; m < 15; ++m) {
        const auto model = testutil::random_model(rng, 2);
        const auto sub = coupling_subspace(model);
        for (double e : random_open_energies(model, rng, 10)) {
            TMatrix t;
            try {
                t = t_matrix(model, sub, e);
            } catch (const exceptional_energy&) {
                continue;
            }
            if (t.channel_count() != 2) continue;
            worst = std::max(worst,
                             std::abs(std::abs(t.entries(0, 1)) - std::abs(t.entries(1, 0))));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("all-real models are reciprocal in every pair") {
    std::mt19937_64 rng(321);
    double worst = 0.0;
    int used = 0;
    while (used < 8) {
        const auto model = testutil::random_model(rng, 3);
        if (!model.all_real()) continue;
        ++used;
        const auto sub = coupling_subspace(model);
        for (double e : random_open_energies(model, rng, 8)) {
            TMatrix t;
            try {
                t = t_matrix(model, sub, e);
            } catch (const exceptional_energy&) {
                continue;
            }
            for (int a = 0; a < t.channel_count(); ++a)
                for (int b = 0; b < t.channel_count(); ++b)
                    worst = std::max(worst,
                                     std::abs(std::abs(t.entries(a, b)) - std::abs(t.entries(b, a))));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("three leads with flux break direction symmetry") {
    const auto model = testutil::three_lead_flux_model();
    CHECK(!model.all_real());
    const auto sub = coupling_subspace(model);
    double best = 0.0;
    for (int i = 1; i < 60; ++i) {
        const double e = -1.95 + 3.9 * i / 60.0;
        const auto t = t_matrix(model, sub, e);
        const auto res = scattering_residuals(t);
        CHECK(res.optical <= 1e-10);
        CHECK(res.normality <= 1e-10);
        best = std::max(best, std::abs(std::abs(t.entries(0, 1)) - std::abs(t.entries(1, 0))));
    }
    CHECK(best >= 1e-3);
}

TEST_CASE("Hermitian analyticity under model conjugation") {
    std::mt19937_64 rng(555);
    for (int m = 0; m < 6; ++m) {
        const auto spec = testutil::random_spec(rng, 2 + m % 3);
        const auto model = validate_model(spec);
        const auto conj_model = validate_model(conjugated(spec));
        const auto sub = coupling_subspace(model);
        const auto conj_sub = coupling_subspace(conj_model);
        for (double e : random_open_energies(model, rng, 6)) {
            TMatrix t, tc;
            try {
                t = t_matrix(model, sub, e);
                tc = t_matrix(conj_model, conj_sub, e);
            } catch (const exceptional_energy&) {
                continue;
            }
            REQUIRE(t.channels == tc.channels);
            // conjugating every coupling transposes the transition matrix:
            // T(conj model) = T(model)^T, forced by V self-adjoint
            const double dev = (tc.entries - t.entries.transpose()).cwiseAbs().maxCoeff();
            CHECK(dev <= 1e-10);
        }
    }
}

TEST_CASE("solves hugging an in-band scatterer eigenvalue are flagged") {
    // the level at 0.2 sits inside the band; right outside the exceptional
    // zone the linear system is too ill-conditioned for clean residuals
    const auto model = testutil::three_lead_flux_model();
    const auto sub = coupling_subspace(model);
    CHECK_THROWS_AS(t_matrix(model, sub, 0.2, Tolerances{}), exceptional_energy);
    CHECK_THROWS_AS(t_matrix(model, sub, 0.2 + 2.05e-8, Tolerances{}), near_singular);
    // far enough away the solve is clean again
    const auto t = t_matrix(model, sub, 0.2 + 1e-4, Tolerances{});
    CHECK(scattering_residuals(t).optical * 2.0 * pi <= 1e-9);
}

TEST_CASE("sweeps shift nodes off scatterer eigenvalues") {
    const auto model = testutil::three_lead_flux_model();
    const auto sub = coupling_subspace(model);
    const auto rows = kernels_sweep_single(model, sub, 0.2);
    REQUIRE(rows.t.has_value());
    REQUIRE(rows.warning.has_value());
    CHECK(rows.warning->kind == "node_shifted");
    CHECK_NOTHROW(s_matrix(*rows.t));
}

TEST_CASE("T is continuous on exceptional-free intervals") {
    const auto model = testutil::friedrichs_model({0.4, 0.6, 0.6});
    const auto sub = coupling_subspace(model);
    const double delta = 1e-4;
    for (double e : {-1.5, -0.4, 0.9, 1.6}) {
        const auto t0 = t_matrix(model, sub, e);
        const auto t1 = t_matrix(model, sub, e + delta);
        const auto t2 = t_matrix(model, sub, e + delta / 8.0);
        const double slope = (t1.entries - t0.entries).cwiseAbs().maxCoeff() / delta;
        const double small = (t2.entries - t0.entries).cwiseAbs().maxCoeff();
        CHECK(small <= (slope + 1.0) * (delta / 8.0) * 4.0);
    }
}

TEST_CASE("bound states") {
    SUBCASE("no couplings yield none") {
        ModelSpec spec = testutil::friedrichs_spec();
        spec.couplings.clear();
        const auto model = validate_model(spec);
        CHECK(bound_states(model, {2.0, 10.0}, 200).empty());
    }

    SUBCASE("window overlapping a band is rejected") {
        const auto model = testutil::friedrichs_model();
        CHECK_THROWS_WITH_AS(bound_states(model, {1.5, 3.0}, 100),
                             doctest::Contains("window overlapping a band"), error);
    }

    SUBCASE("level above the band binds; finite-size oracle agrees") {
        const auto model = testutil::friedrichs_model({3.0, 0.1, 0.1});
        const auto found = bound_states(model, {2.0, 10.0}, 400);
        REQUIRE(found.size() == 1);
        CHECK(found[0] > 2.9);
        CHECK(found[0] < 3.1);

        // independent oracle: tridiagonal chain lead1(reversed) - dot - lead2
        const int length = 2000;
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(2 * length + 1);
        diag[length] = 3.0;
        Eigen::VectorXd sub = Eigen::VectorXd::Constant(2 * length, 1.0);
        sub[length - 1] = 0.1;
        sub[length] = 0.1;
        const auto evs = testutil::tridiag_eigenvalues(diag, sub);
        std::vector<double> outside;
        for (Eigen::Index i = 0; i < evs.size(); ++i)
            if (evs[i] > 2.0 + 1e-9) outside.push_back(evs[i]);
        REQUIRE(outside.size() == 1);
        CHECK(std::abs(outside[0] - found[0]) <= 1e-6);
    }

    SUBCASE("mid-band level with weak coupling binds nothing above") {
        const auto model = testutil::friedrichs_model({0.0, 0.1, 0.1});
        CHECK(bound_states(model, {2.0, 10.0}, 400).empty());
        CHECK(scan_bound_states(model).empty());
    }

    SUBCASE("scan covers both sides") {
        const auto model = testutil::friedrichs_model({3.0, 0.1, 0.1});
        const auto all = scan_bound_states(model);
        REQUIRE(all.size() == 1);
        CHECK(all[0] == doctest::Approx(3.0).epsilon(0.05));
    }

    SUBCASE("strong coupling binds on both band edges") {
        const auto model = testutil::friedrichs_model({0.0, 1.2, 1.2});
        const auto all = scan_bound_states(model);
        REQUIRE(all.size() == 2);
        CHECK(all[0] < -2.0);
        CHECK(all[1] > 2.0);

        const int length = 1200;
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(2 * length + 1);
        Eigen::VectorXd sub = Eigen::VectorXd::Constant(2 * length, 1.0);
        sub[length - 1] = 1.2;
        sub[length] = 1.2;
        const auto evs = testutil::tridiag_eigenvalues(diag, sub);
        CHECK(std::abs(evs[0] - all[0]) <= 1e-8);
        CHECK(std::abs(evs[evs.size() - 1] - all[1]) <= 1e-8);
    }
}
