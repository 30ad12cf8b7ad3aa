#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "svbsc/scheduler.hpp"
#include "svbsc/dataset.hpp"

using namespace svbsc;

namespace {

// Small but fully consistent rig: W = 4 channel uses, K = 4 * 10 = 40 coded
// bits, aligned breakpoints {4, 8, ..., 40}.
struct Rig {
    ConstellationSet constellations;
    BerMap map;
    LadderCodecModel model;
    RicianModel rician{20.0, 10, 1.0};
    std::vector<std::vector<double>> holdout;

    Rig() {
        std::vector<double> grid;
        for (double s = -4.0; s <= 30.01; s += 2.0) grid.push_back(s);
        map = calibrate(constellations, grid, 100000, 2025, 2);

        CodecProfile profile;
        profile.n_source = 16;
        profile.k_coded = 40;
        for (std::uint32_t c = 4; c <= 40; c += 4) profile.breakpoints.push_back(c);
        std::vector<double> lambdas;
        double v = 0.012;
        for (int j = 0; j < 12; ++j) {
            lambdas.push_back(v);
            v *= 0.85;
        }
        model = train_ladder(synth_gaussian(2000, 16, lambdas, 7).vectors, profile);
        holdout = synth_gaussian(64, 16, lambdas, 8).vectors;
    }

    LinkBudget budget_at(double snr_db) const {
        return LinkBudget{db_to_linear(snr_db) * 4.0, 4, 1.0};
    }

    FramePipeline pipeline(const LinkBudget& budget, const std::vector<GammaThreshold>& th,
                           double epsilon, CsiMode mode) const {
        FramePipeline p;
        p.codec = &model;
        p.constellations = &constellations;
        p.channel = &rician;
        p.budget = &budget;
        p.thresholds = th;
        p.target = StabilityTarget{0.05, epsilon, 36, std::nullopt};
        p.csi_mode = mode;
        p.cdf_samples = 4000;
        return p;
    }
};

Rig& rig() {
    static Rig r;
    return r;
}

}  // namespace

TEST_CASE("pad_null appends exactly L null symbols") {
    const BitVec y{1, 0, 1};
    const NullableVec a = pad_null(y, 0);
    REQUIRE(a.size() == 3);
    CHECK(a[0] == NullableBit::One);
    CHECK(a[2] == NullableBit::One);

    const NullableVec b = pad_null(BitVec{1}, 7);  // one data bit then K-1 nulls
    REQUIRE(b.size() == 8);
    CHECK(b[0] == NullableBit::One);
    for (std::size_t i = 1; i < 8; ++i) CHECK(b[i] == NullableBit::Null);

    Rng rng(5);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t ny = rng.below(20), l = rng.below(20);
        const NullableVec v = pad_null(random_bits(ny, rng), l);
        std::size_t nulls = 0;
        for (auto x : v) nulls += x == NullableBit::Null;
        CHECK(nulls == l);
        CHECK(v.size() == ny + l);
    }
}

TEST_CASE("puncture arithmetic at W = 128") {
    const LinkBudget budget{128.0, 128, 1.0};
    Rng rng(6);
    const BitVec u = random_bits(1280, rng);
    {
        const auto [x, l] = puncture(u, 1024, budget);
        CHECK(l == 0);
        CHECK(x == u);
    }
    {
        const auto [x, l] = puncture(u, 2, budget);
        CHECK(l == 1152);
        CHECK(x.size() == 128);
        CHECK(std::equal(x.begin(), x.end(), u.begin()));
    }
    {
        const auto [x, l] = puncture(u, 16, budget);
        CHECK(l == 768);
        CHECK(x.size() == 512);
    }
    const BitVec small = random_bits(100, rng);
    CHECK_THROWS_AS(puncture(small, 1024, budget), std::invalid_argument);
}

TEST_CASE("select_modulation follows the outage constraint") {
    const std::vector<GammaThreshold> th{{2, 0.5}, {4, 1.0}, {16, 2.0}};
    EmpiricalCdf step;
    step.is_step = true;

    step.step_at = 2.0;  // estimate exactly at the M=16 threshold: still feasible
    CHECK(select_modulation(step, th, 0.0).order == 16);
    CHECK(select_modulation(step, th, 0.0).feasible);

    step.step_at = 1.3;
    CHECK(select_modulation(step, th, 0.05).order == 4);

    step.step_at = 0.2;  // below the lowest threshold: fallback
    const auto fb = select_modulation(step, th, 0.05);
    CHECK(fb.order == 2);
    CHECK_FALSE(fb.feasible);

    // epsilon = 1 makes the constraint vacuous
    CHECK(select_modulation(step, th, 1.0).order == 16);

    CHECK_THROWS_AS(select_modulation(step, {}, 0.05), std::invalid_argument);
    const std::vector<GammaThreshold> bad{{2, 2.0}, {4, 1.0}};
    CHECK_THROWS_AS(select_modulation(step, bad, 0.05), std::invalid_argument);
}

TEST_CASE("conditional_cdf: perfect CSI is the unit step at the estimate") {
    LinkBudget budget{128.0, 128, 1.0};
    Rng rng(7);
    const EmpiricalCdf cdf = conditional_cdf(0.8, rig().rician, budget, CsiMode::Perfect, 10, rng);
    CHECK(cdf.is_step);
    CHECK(cdf.eval(0.8) == 0.0);   // F(t) = 0 when estimate >= t
    CHECK(cdf.eval(0.80001) == 1.0);
    CHECK(cdf.eval(0.5) == 0.0);
    CHECK_THROWS_AS(conditional_cdf(-0.1, rig().rician, budget, CsiMode::Perfect, 10, rng), std::domain_error);
}

TEST_CASE("conditional_cdf degenerates to a step as sigma_e -> 0") {
    // enormous nominal snr drives sigma_e to ~1e-12
    LinkBudget budget{128.0 * 1e12, 128, 1.0};
    Rng rng(8);
    const EmpiricalCdf cdf = conditional_cdf(1.0, rig().rician, budget, CsiMode::Imperfect, 20000, rng);
    REQUIRE(!cdf.gammas.empty());
    CHECK(cdf.eval(1.0 - 0.05) <= 0.05);  // Levy-style closeness to the step at the estimate
    CHECK(cdf.eval(1.0 + 0.05) >= 0.95);
}

TEST_CASE("conditional_cdf median tracks the estimate at 10 dB") {
    LinkBudget budget{db_to_linear(10.0) * 128.0, 128, 1.0};
    Rng rng(9);
    const EmpiricalCdf cdf = conditional_cdf(1.0, rig().rician, budget, CsiMode::Imperfect, 1000000, rng);
    REQUIRE(cdf.gammas.size() >= 1000);
    const double median = cdf.gammas[cdf.gammas.size() / 2];
    CHECK(std::abs(median - 1.0) < 0.10);
    CHECK_FALSE(cdf.fallback);
}

TEST_CASE("conditional_cdf flags the widest-bin fallback") {
    LinkBudget budget{db_to_linear(10.0) * 128.0, 128, 1.0};
    Rng rng(10);
    // far outside the support of the estimate: the bin must widen to everything
    const EmpiricalCdf cdf = conditional_cdf(50.0, rig().rician, budget, CsiMode::Imperfect, 2000, rng);
    CHECK(cdf.fallback);
}

TEST_CASE("noiseless frame: highest order, zero puncturing, exact roundtrip") {
    Rig& r = rig();
    const LinkBudget budget{4.0, 4, 0.0};
    const auto th = gamma_thresholds(r.map, 0.05, budget);  // all zero thresholds
    const FramePipeline p = r.pipeline(budget, th, 0.05, CsiMode::Perfect);
    Rng rng(11);
    const FrameTrace t = run_frame(r.holdout[0], p, rng);
    CHECK(t.selected_m == 1024);
    CHECK(t.feasible);
    CHECK(t.punct_len == 0);
    CHECK(t.measured_q == 0.0);
    CHECK_FALSE(t.l_violation);
    CHECK(t.reconstruction == roundtrip_at(r.model, r.holdout[0], 0));
    CHECK(t.decoder_input.size() == 40);
}

TEST_CASE("zero gain drives the flip ratio to one half") {
    Rig& r = rig();
    const LinkBudget budget = r.budget_at(10.0);
    const auto th = gamma_thresholds(r.map, 0.05, budget);
    const FramePipeline p = r.pipeline(budget, th, 0.05, CsiMode::Perfect);
    const ChannelDraw dead{0.0, 0.0, 0.0};
    double q_acc = 0.0;
    const int frames = 400;
    for (int i = 0; i < frames; ++i) {
        Rng rng(derive_seed(12, static_cast<std::uint64_t>(i)));
        const FrameTrace t = run_frame_at(r.holdout[i % r.holdout.size()], p, dead, rng);
        CHECK_FALSE(t.feasible);  // nothing clears the constraint at gamma = 0
        q_acc += t.measured_q;
    }
    CHECK(std::abs(q_acc / frames - 0.5) < 0.05);
}

TEST_CASE("bits are conserved through the frame pipeline") {
    Rig& r = rig();
    for (double snr_db : {2.0, 10.0, 22.0}) {
        const LinkBudget budget = r.budget_at(snr_db);
        const auto th = gamma_thresholds(r.map, 0.05, budget);
        const FramePipeline p = r.pipeline(budget, th, 0.05, CsiMode::Imperfect);
        for (int i = 0; i < 40; ++i) {
            Rng rng(derive_seed(13, static_cast<std::uint64_t>(snr_db * 10), static_cast<std::uint64_t>(i)));
            const FrameTrace t = run_frame(r.holdout[i % r.holdout.size()], p, rng);
            CHECK(t.sent.size() + t.punct_len == 40);
            CHECK(t.received.size() == t.sent.size());
            CHECK(t.decoder_input.size() == 40);
            std::size_t nulls = 0;
            for (auto b : t.decoder_input) nulls += b == NullableBit::Null;
            CHECK(nulls == t.punct_len);
            CHECK(t.measured_q >= 0.0);
            CHECK(t.measured_q <= 1.0);
        }
    }
}

TEST_CASE("perfect CSI selection is the threshold staircase") {
    Rig& r = rig();
    const LinkBudget budget = r.budget_at(14.0);
    const auto th = gamma_thresholds(r.map, 0.05, budget);
    const FramePipeline p = r.pipeline(budget, th, 0.05, CsiMode::Perfect);
    for (int i = 0; i < 300; ++i) {
        Rng rng(derive_seed(14, static_cast<std::uint64_t>(i)));
        const ChannelDraw d = sample_channel(r.rician, budget, CsiMode::Perfect, rng);
        const FrameTrace t = run_frame_at(r.holdout[i % r.holdout.size()], p, d, rng);
        int expected = 0;
        for (const auto& g : th)
            if (d.gamma >= g.gamma_th) expected = g.order;
        if (expected == 0) {
            CHECK_FALSE(t.feasible);
            CHECK(t.selected_m == 2);
        } else {
            CHECK(t.selected_m == expected);
        }
    }
}

TEST_CASE("tightening epsilon never raises the selected order") {
    Rig& r = rig();
    const LinkBudget budget = r.budget_at(12.0);
    const auto th = gamma_thresholds(r.map, 0.05, budget);
    for (int i = 0; i < 300; ++i) {
        Rng rng(derive_seed(15, static_cast<std::uint64_t>(i)));
        const ChannelDraw d = sample_channel(r.rician, budget, CsiMode::Imperfect, rng);
        const EmpiricalCdf cdf = conditional_cdf(d.gamma_est, r.rician, budget, CsiMode::Imperfect, 4000, rng);
        int prev = 0;
        for (double eps : {0.01, 0.05, 0.1, 0.3}) {
            const int m = select_modulation(cdf, th, eps).order;
            CHECK(m >= prev);
            prev = m;
        }
    }
}

TEST_CASE("outage rate of the selected order stays within the epsilon budget") {
    // At this toy frame size (4..40 bits) measured q is too quantized for the
    // bit-level contract (the acceptance suite covers that at W = 128); here
    // we check the event the constraint controls: gamma below the selected
    // order's threshold.
    Rig& r = rig();
    const LinkBudget budget = r.budget_at(14.0);
    const auto th = gamma_thresholds(r.map, 0.05, budget);
    const double eps = 0.1;
    const FramePipeline p = r.pipeline(budget, th, eps, CsiMode::Imperfect);
    const int frames = 500;
    int outages = 0, feasible = 0;
    for (int i = 0; i < frames; ++i) {
        Rng rng(derive_seed(16, static_cast<std::uint64_t>(i)));
        const FrameTrace t = run_frame(r.holdout[i % r.holdout.size()], p, rng);
        if (!t.feasible) continue;
        ++feasible;
        double gamma_th = 0.0;
        for (const auto& g : th)
            if (g.order == t.selected_m) gamma_th = g.gamma_th;
        outages += t.channel.gamma < gamma_th ? 1 : 0;
    }
    REQUIRE(feasible > 400);
    const double rate = static_cast<double>(outages) / feasible;
    CHECK(rate <= eps + 2.0 * std::sqrt(eps / feasible));
}

TEST_CASE("pipeline validation catches inconsistent budgets") {
    Rig& r = rig();
    const LinkBudget wrong{128.0, 128, 1.0};  // W*10 = 1280 != K = 40
    const auto th = gamma_thresholds(r.map, 0.05, wrong);
    const FramePipeline p = r.pipeline(wrong, th, 0.05, CsiMode::Perfect);
    Rng rng(17);
    CHECK_THROWS_AS(run_frame(r.holdout[0], p, rng), std::invalid_argument);
}
