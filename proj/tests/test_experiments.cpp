#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "singlimit/experiments.hpp"

using namespace singlimit;

namespace {

Grid1D paper_grid() { return Grid1D::from_spacing(-15.0, 15.0, 0.05); }

model::ScaledModel figure1(double eps = 0.1) { return model::ScaledModel::make(WolbachiaParams{}, eps); }

std::vector<TimedField> translating_front(double c, double w, const Grid1D& g) {
    std::vector<TimedField> out;
    for (int k = 0; k <= 50; ++k) {
        const double t = 75.0 + k;
        out.push_back({t, Field::sample(g, [&](double x) { return 1.0 / (1.0 + std::exp((x - c * (t - 100.0)) / w)); })});
    }
    return out;
}

SolverConfig small_config(double t_end) {
    return SolverConfig::uniform(Grid1D::from_spacing(-5.0, 5.0, 0.1), 0.01, t_end, 0.1, 50);
}

} // namespace

TEST(InitialData, ProfileShape) {
    const InitialDataSpec spec{0.8, 2.5, 0.5};
    EXPECT_EQ(spec.profile(0.0), 0.8);
    EXPECT_EQ(spec.profile(-2.5), 0.8);
    EXPECT_NEAR(spec.profile(2.75), 0.4, 1e-15);
    EXPECT_EQ(spec.profile(3.0), 0.0);
    EXPECT_EQ(spec.profile(-10.0), 0.0);
}

TEST(InitialData, SpecValidation) {
    const auto g = paper_grid();
    EXPECT_THROW((InitialDataSpec{1.0, 1.0, 0.5}.validate(g)), ValidationError);
    EXPECT_THROW((InitialDataSpec{0.0, 1.0, 0.5}.validate(g)), ValidationError);
    EXPECT_THROW((InitialDataSpec{0.5, 0.0, 0.5}.validate(g)), ValidationError);
    EXPECT_THROW((InitialDataSpec{0.5, 1.0, -0.1}.validate(g)), ValidationError);
    EXPECT_THROW((InitialDataSpec{0.5, 14.6, 0.5}.validate(g)), ValidationError);
    EXPECT_NO_THROW((InitialDataSpec{0.5, 1.0, 0.0}.validate(g)));
    EXPECT_THROW(make_initial_data(figure1(), InitialDataSpec{1.0, 1.0, 0.5}, g), ValidationError);
}

TEST(InitialData, OutsideBumpIsExtinctionState) {
    const auto m = figure1();
    const auto d = make_initial_data(m, {}, paper_grid());
    const double nu = 10.0 - 0.27 / 1.12;
    EXPECT_EQ(d.state.ni[0], 0.0);
    EXPECT_NEAR(d.state.nu[0], nu, 1e-14);
    EXPECT_EQ(d.state.ni[600], 0.0);
}

TEST(InitialData, FrequencyRecoveredAndManifoldOffsetConstant) {
    for (double eps : {0.3, 0.1, 0.05, 0.02}) {
        const auto m = figure1(eps);
        const auto d = make_initial_data(m, {}, paper_grid());
        const auto r = to_reduced(m, d.state);
        double worst_m = 0.0;
        for (std::size_t i = 0; i < r.p.size(); ++i) {
            EXPECT_NEAR(r.p[i], d.p_init[i], 1e-14);
            EXPECT_NEAR(r.n[i], model::h_of_p(m, 0.0), 1e-12);
            EXPECT_NEAR(r.m[i], model::h_of_p(m, 0.0) - model::h_of_p(m, d.p_init[i]), 1e-12);
            worst_m = std::max(worst_m, std::abs(r.m[i]));
        }
        EXPECT_LE(worst_m, model::max_h(m) - model::h_of_p(m, 0.0) + 1e-12);
    }
}

TEST(InitialData, AlternativeScalingMatchesAcrossEpsilon) {
    const auto a = model::ScaledModel::make(WolbachiaParams{}, 0.1, Variant::AlternativeScaling);
    const auto b = a.with_epsilon(0.05);
    const auto g = paper_grid();
    const auto ra = to_reduced(a, make_initial_data(a, {}, g).state);
    const auto rb = to_reduced(b, make_initial_data(b, {}, g).state);
    for (std::size_t i = 0; i < g.nx; ++i) {
        EXPECT_NEAR(ra.n[i], rb.n[i], 1e-14);
        EXPECT_NEAR(ra.n[i], 1.0 - 0.27 / 1.12, 1e-14);
        EXPECT_NEAR(ra.p[i], rb.p[i], 1e-15);
    }
}

TEST(WaveSpeed, SyntheticTranslatingProfile) {
    const auto g = paper_grid();
    const auto series = translating_front(0.37, 0.8, g);
    EXPECT_NEAR(estimate_wave_speed(series, 0.5, {75.0, 125.0}), 0.37, 1e-3);
    const auto fast = translating_front(0.5, 0.3, g);
    EXPECT_NEAR(estimate_wave_speed(fast, 0.5, {75.0, 125.0}), 0.5, 1e-3);
}

TEST(WaveSpeed, StationarySeries) {
    const auto g = paper_grid();
    std::vector<TimedField> s;
    const Field f = Field::sample(g, [](double x) { return 1.0 / (1.0 + std::exp(x - 1.234)); });
    for (int k = 0; k <= 10; ++k) s.push_back({75.0 + 5.0 * k, f});
    EXPECT_NEAR(estimate_wave_speed(s, 0.5, {75.0, 125.0}), 0.0, 1e-12);
}

TEST(WaveSpeed, InterpolatedCrossing) {
    const auto g = Grid1D::from_points(0.0, 4.0, 5);
    const Field f(g, {1.0, 1.0, 0.8, 0.2, 0.0});
    EXPECT_NEAR(*front_position(f, 0.5), 2.5, 1e-15);
    EXPECT_FALSE(front_position(Field(g, 0.1), 0.5).has_value());
}

TEST(WaveSpeed, RightmostCrossingOfSymmetricBump) {
    const auto g = paper_grid();
    const Field f = Field::sample(g, [](double x) { return std::abs(x) < 3.0 ? 1.0 : 0.0; });
    EXPECT_GT(*front_position(f, 0.5), 2.9);
}

TEST(WaveSpeed, AbsentLevelSetNamesSnapshot) {
    const auto g = paper_grid();
    auto s = translating_front(0.37, 0.8, g);
    s[7].field = Field(g, 0.0);
    try {
        estimate_wave_speed(s, 0.5, {75.0, 125.0});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("t = 82"), std::string::npos) << e.what();
    }
}

TEST(WaveSpeed, BoundaryContaminationRejected) {
    const auto g = paper_grid();
    const auto s = translating_front(0.598, 0.3, g); // x = 14.95 at t = 125, inside the 2 dx band
    EXPECT_THROW(estimate_wave_speed(s, 0.5, {75.0, 125.0}), ValidationError);
    EXPECT_NO_THROW(estimate_wave_speed(s, 0.5, {95.0, 105.0}));
}

TEST(WaveSpeed, NeedsTwoSnapshotsInWindow) {
    const auto g = paper_grid();
    const auto s = translating_front(0.37, 0.8, g);
    EXPECT_THROW(estimate_wave_speed(s, 0.5, {200.0, 300.0}), ValidationError);
}

TEST(Outcome, Classification) {
    const auto g = Grid1D::from_points(-2.0, 2.0, 5);
    const Field init(g, {0.0, 0.8, 0.8, 0.8, 0.0});
    EXPECT_EQ(classify_outcome(Field(g, {0.0, 0.05, 0.09, 0.05, 0.0}), init), Outcome::Extinct);
    EXPECT_EQ(classify_outcome(Field(g, {0.5, 0.95, 0.99, 0.95, 0.5}), init), Outcome::Invaded);
    EXPECT_EQ(classify_outcome(Field(g, {0.5, 0.85, 0.99, 0.95, 0.5}), init), Outcome::Undecided);
}

TEST(Outcome, SubThresholdLimitDataGoExtinct) {
    const auto cfg = SolverConfig::uniform(paper_grid(), 0.005, 125.0, 0.1);
    EXPECT_EQ(extinction_check_limit(figure1(), {0.05, 2.5, 0.5}, cfg), Outcome::Extinct);
}

TEST(Outcome, CoarseOdeBoundForSubThresholdData) {
    // p' <= (max r(p)/p on [0, 0.05]) p and that rate is negative: decay is exponential.
    const auto m = figure1();
    double rate = -INFINITY;
    for (int k = 1; k <= 500; ++k) {
        const double p = 0.05 * k / 500.0;
        rate = std::max(rate, model::limit_reaction(m, p) / p);
    }
    EXPECT_LT(rate, 0.0);
    EXPECT_LT(0.05 * std::exp(rate * 125.0), 0.1);
}

TEST(Monitor, InvariantsHoldOnShortRun) {
    const auto m = figure1(0.05);
    const auto cfg = small_config(5.0);
    const auto d = make_initial_data(m, {0.8, 1.0, 0.5}, cfg.grid);
    const auto traj = simulate_system(m, d.state, cfg, 50);
    EXPECT_TRUE(traj.invariants.ok()) << traj.invariants.describe();
    EXPECT_EQ(traj.invariants.snapshots, 11u);
    EXPECT_EQ(traj.snapshots.size(), 11u);
    EXPECT_TRUE(traj.invariants.bound_applies);
    EXPECT_LE(traj.invariants.max_n, traj.invariants.n_bound);
    EXPECT_NEAR(traj.snapshots.back().time, 5.0, 1e-12);
}

TEST(Monitor, DetectsViolation) {
    const auto m = figure1();
    const auto g = Grid1D::from_points(0.0, 1.0, 3);
    PopulationState s{Field(g, 0.0), Field(g, 9.0), 0.0};
    InvariantMonitor mon(m, s);
    mon.observe(s);
    EXPECT_TRUE(mon.report().ok());
    s.nu[1] = 1.0; // n = 9 far above max h
    mon.observe(s);
    EXPECT_FALSE(mon.report().ok());
}

TEST(Sweep, SingleEpsilonEqualsDirectComposition) {
    const auto cfg = small_config(2.0);
    const InitialDataSpec spec{0.8, 1.0, 0.5};
    SweepOptions opt;
    opt.norm_horizon = 2.0;
    const auto rep = run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, {0.1}, spec, cfg, opt);

    const auto m = figure1(0.1);
    const auto d = make_initial_data(m, spec, cfg.grid);
    const auto sys = simulate_system(m, d.state, cfg, 1);
    const auto lim = simulate_limit(m, d.p_init, cfg, 1);
    const auto e = error_norms(sys.snapshots, lim.snapshots, 2.0);
    ASSERT_EQ(rep.err_p.size(), 1u);
    EXPECT_EQ(rep.err_p[0], e.err_p);
    EXPECT_EQ(rep.err_m[0], e.err_m);
    EXPECT_TRUE(std::isnan(rep.speeds[0]));
    EXPECT_TRUE(rep.invariants[0].ok());
}

TEST(Sweep, CoarserNormCadence) {
    const auto cfg = small_config(2.0);
    SweepOptions opt;
    opt.norm_horizon = 2.0;
    opt.norm_every = 10;
    const auto rep = run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, {0.1},
                                           {0.8, 1.0, 0.5}, cfg, opt);
    EXPECT_GT(rep.err_m[0], 0.0);
    opt.norm_every = 7; // 200 steps are not a multiple of 7
    EXPECT_THROW(run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, {0.1},
                                       {0.8, 1.0, 0.5}, cfg, opt),
                 ValidationError);
}

TEST(Sweep, PreconditionsEnforced) {
    const auto cfg = small_config(2.0);
    SweepOptions opt;
    opt.norm_horizon = 2.0;
    const WolbachiaParams q{};
    EXPECT_THROW(run_convergence_sweep(q, Variant::PerfectTransmission, {0.1, 0.1}, {}, cfg, opt), ValidationError);
    EXPECT_THROW(run_convergence_sweep(q, Variant::PerfectTransmission, {0.05, 0.1}, {}, cfg, opt), ValidationError);
    EXPECT_THROW(run_convergence_sweep(q, Variant::PerfectTransmission, {}, {}, cfg, opt), ValidationError);
    EXPECT_THROW(run_convergence_sweep(q, Variant::PerfectTransmission, {4.0}, {}, cfg, opt), ValidationError);
    EXPECT_THROW(run_convergence_sweep(q, Variant::AlternativeScaling, {0.1}, {}, cfg, opt), ValidationError);
    opt.norm_horizon = 3.0;
    EXPECT_THROW(run_convergence_sweep(q, Variant::PerfectTransmission, {0.1}, {}, cfg, opt), ValidationError);
}

TEST(Sweep, DeterministicAcrossRunsAndThreads) {
    const auto cfg = small_config(3.0);
    SweepOptions opt;
    opt.norm_horizon = 3.0;
    const InitialDataSpec spec{0.8, 1.0, 0.5};
    const std::vector<double> eps{0.3, 0.1, 0.05};
    const auto a = run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, eps, spec, cfg, opt);
    opt.threads = 3;
    const auto b = run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, eps, spec, cfg, opt);
    EXPECT_EQ(a.epsilons, b.epsilons);
    EXPECT_EQ(a.err_p, b.err_p);
    EXPECT_EQ(a.err_m, b.err_m);
}

TEST(Sweep, SolverErrorTaggedWithEpsilon) {
    auto cfg = small_config(2.0);
    cfg.dt = 0.5; // explicit reaction blows up
    cfg.t_end = 50.0;
    SweepOptions opt;
    opt.norm_horizon = 2.0;
    try {
        run_convergence_sweep(WolbachiaParams{}, Variant::PerfectTransmission, {0.02}, {0.8, 1.0, 0.5}, cfg, opt);
        FAIL() << "expected an error";
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("eps = 0.02"), std::string::npos) << e.what();
    }
}

TEST(Threads, EnvironmentCap) {
    setenv("SINGLIMIT_THREADS", "0", 1);
    EXPECT_EQ(threads_from_env(), 0u);
    setenv("SINGLIMIT_THREADS", "3", 1);
    EXPECT_EQ(threads_from_env(), 3u);
    setenv("SINGLIMIT_THREADS", "junk", 1);
    EXPECT_GE(threads_from_env(), 1u);
    unsetenv("SINGLIMIT_THREADS");
}

TEST(LimitFront, MonotoneInvasionAndBoundaryIsolationOnWideDomain) {
    // On [-40, 40] the leading tail is negligible at the walls, so both the
    // boundary-isolation diagnostic and monotone front motion can be asserted.
    const auto g = Grid1D::from_spacing(-40.0, 40.0, 0.05);
    const auto cfg = SolverConfig::uniform(g, 0.005, 125.0, 0.1);
    const auto m = figure1();
    const auto traj = simulate_limit(m, make_frequency_profile({}, g), cfg, 100);
    const std::pair<double, double> window{75.0, 125.0};
    const auto track = front_track(traj.snapshots, 0.5, window);
    ASSERT_GT(track.size(), 10u);
    for (std::size_t k = 1; k < track.size(); ++k) EXPECT_GE(track[k].second, track[k - 1].second);
    EXPECT_LT(endpoint_deviation(traj.snapshots, window), 1e-6);
    EXPECT_GT(estimate_wave_speed(traj.snapshots, 0.5, window), 0.0);
}
