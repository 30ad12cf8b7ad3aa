#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "svbsc/ber_map.hpp"
#include "svbsc/channel.hpp"
#include "svbsc/codec.hpp"
#include "svbsc/metrics.hpp"
#include "svbsc/modem.hpp"

namespace svbsc {

// Conditional CDF of gamma given the observed estimate. Perfect CSI is the
// degenerate unit step; imperfect CSI is an empirical CDF over joint draws
// retained in a relative bin around the observed estimate.
struct EmpiricalCdf {
    bool is_step = false;
    double step_at = 0.0;
    std::vector<double> gammas;  // sorted, imperfect mode only
    bool fallback = false;       // bin had to widen past the whole sample set

    // F(t) = Pr[gamma < t], strict; left-continuous step convention
    double eval(double t) const {
        if (is_step) return step_at < t ? 1.0 : 0.0;
        const auto it = std::lower_bound(gammas.begin(), gammas.end(), t);
        return static_cast<double>(it - gammas.begin()) / static_cast<double>(gammas.size());
    }
};

inline constexpr std::size_t kCdfMinHits = 1000;
inline constexpr double kCdfRelHalfWidth = 0.05;

inline EmpiricalCdf conditional_cdf(double gamma_est, const RicianModel& model, const LinkBudget& budget,
                                    CsiMode mode, std::size_t samples, Rng& rng) {
    if (gamma_est < 0.0) throw std::domain_error("conditional_cdf: negative gamma_est");
    EmpiricalCdf cdf;
    if (mode == CsiMode::Perfect) {
        cdf.is_step = true;
        cdf.step_at = gamma_est;
        return cdf;
    }
    if (samples == 0) throw std::invalid_argument("conditional_cdf: samples must be positive");
    std::vector<double> g(samples), g_est(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const ChannelDraw d = sample_channel(model, budget, CsiMode::Imperfect, rng);
        g[i] = d.gamma;
        g_est[i] = d.gamma_est;
    }
    const std::size_t want = std::min(kCdfMinHits, samples);
    double half_width = kCdfRelHalfWidth * std::max(gamma_est, 1e-6);
    for (;;) {
        cdf.gammas.clear();
        for (std::size_t i = 0; i < samples; ++i)
            if (std::abs(g_est[i] - gamma_est) <= half_width) cdf.gammas.push_back(g[i]);
        if (cdf.gammas.size() >= want) break;
        if (cdf.gammas.size() == samples) break;
        half_width *= 2.0;
        if (!(half_width < 1e12)) {  // cannot widen further; take everything
            cdf.gammas = g;
            break;
        }
    }
    cdf.fallback = cdf.gammas.size() < kCdfMinHits || cdf.gammas.size() == samples;
    std::sort(cdf.gammas.begin(), cdf.gammas.end());
    return cdf;
}

struct ModulationChoice {
    int order = 0;
    bool feasible = false;
};

// Eq.-(1) style selection: largest order whose outage probability at its gain
// threshold stays within epsilon; falls back to the smallest order (flagged
// infeasible) when no order qualifies.
inline ModulationChoice select_modulation(const EmpiricalCdf& cdf, std::span<const GammaThreshold> thresholds,
                                          double epsilon) {
    if (thresholds.empty()) throw std::invalid_argument("select_modulation: empty threshold set");
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i].gamma_th < thresholds[i - 1].gamma_th)
            throw std::invalid_argument("select_modulation: thresholds must be non-decreasing in order");
    for (std::size_t i = thresholds.size(); i-- > 0;)
        if (cdf.eval(thresholds[i].gamma_th) <= epsilon) return {thresholds[i].order, true};
    return {thresholds.front().order, false};
}

// Network-side rate control: drop L = K - W*log2(M) bits from the end.
inline std::pair<BitVec, std::size_t> puncture(const BitVec& u, int order, const LinkBudget& budget) {
    const std::size_t capacity = budget.channel_uses * static_cast<std::size_t>(bits_per_symbol(order));
    if (u.size() < capacity)
        throw std::invalid_argument("puncture: codeword shorter than channel capacity at this order");
    const std::size_t l_punct = u.size() - capacity;
    return {BitVec(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(capacity)), l_punct};
}

// Receiver-side r*: append L null symbols so the decoder sees K positions.
inline NullableVec pad_null(const BitVec& y, std::size_t l_punct) {
    NullableVec out(y.size() + l_punct);
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = to_nullable(y[i]);
    for (std::size_t i = y.size(); i < out.size(); ++i) out[i] = NullableBit::Null;
    return out;
}

// One end-to-end frame with every intermediate stage recorded.
struct FrameTrace {
    std::vector<double> source;
    BitVec coded;             // u, K bits
    ChannelDraw channel;
    int selected_m = 0;
    bool feasible = false;
    std::size_t punct_len = 0;
    bool l_violation = false;  // punct_len exceeded the QoS cap
    bool cdf_fallback = false;
    BitVec sent;              // x, K - L bits
    BitVec received;          // y, K - L bits
    NullableVec decoder_input;  // u_hat, K positions
    std::vector<double> reconstruction;
    double measured_q = 0.0;
    double psnr_db = 0.0;
};

struct FramePipeline {
    const LadderCodecModel* codec = nullptr;
    const ConstellationSet* constellations = nullptr;
    const RicianModel* channel = nullptr;
    const LinkBudget* budget = nullptr;
    std::span<const GammaThreshold> thresholds;
    StabilityTarget target;
    CsiMode csi_mode = CsiMode::Perfect;
    std::size_t cdf_samples = 12000;

    void validate() const {
        if (!codec || !constellations || !channel || !budget) throw std::invalid_argument("FramePipeline: missing component");
        target.validate();
        budget->validate();
        channel->validate();
        const std::size_t k_expected = budget->channel_uses *
                                       static_cast<std::size_t>(bits_per_symbol(constellations->max_order()));
        if (codec->profile.k_coded != k_expected)
            throw std::invalid_argument("FramePipeline: codec K inconsistent with budget and max order");
        if (target.l_max >= codec->profile.k_coded)
            throw std::invalid_argument("FramePipeline: target l_max must be below K");
    }
};

// Pipeline with the channel realization supplied by the caller; run_frame
// below draws it. Split out so degenerate draws are testable directly.
inline FrameTrace run_frame_at(std::span<const double> source, const FramePipeline& p, const ChannelDraw& draw,
                               Rng& rng) {
    FrameTrace t;
    t.source.assign(source.begin(), source.end());
    t.coded = encode(*p.codec, source);
    t.channel = draw;

    const EmpiricalCdf cdf = conditional_cdf(draw.gamma_est, *p.channel, *p.budget, p.csi_mode, p.cdf_samples, rng);
    t.cdf_fallback = cdf.fallback;
    const ModulationChoice choice = select_modulation(cdf, p.thresholds, p.target.epsilon);
    t.selected_m = choice.order;
    t.feasible = choice.feasible;

    auto [sent, l_punct] = puncture(t.coded, t.selected_m, *p.budget);
    t.sent = std::move(sent);
    t.punct_len = l_punct;
    t.l_violation = l_punct > p.target.l_max;

    const Constellation& c = p.constellations->get(t.selected_m);
    std::vector<cplx> symbols = modulate(c, t.sent);
    const double amp = p.budget->symbol_amplitude();
    for (auto& s : symbols) s *= amp;
    const std::vector<cplx> raw = transmit(symbols, draw.gamma, *p.budget, rng);
    // coherent equalization with the estimated gain
    const double eq = 1.0 / (amp * std::sqrt(std::max(draw.gamma_est, 1e-300)));
    std::vector<cplx> equalized(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) equalized[i] = raw[i] * eq;
    t.received = demodulate(c, equalized);

    t.decoder_input = pad_null(t.received, t.punct_len);
    t.reconstruction = decode(*p.codec, t.decoder_input, t.punct_len);
    t.measured_q = flip_ratio(t.sent, t.received);
    t.psnr_db = psnr(mse(source, t.reconstruction));
    return t;
}

inline FrameTrace run_frame(std::span<const double> source, const FramePipeline& p, Rng& rng) {
    p.validate();
    const ChannelDraw draw = sample_channel(*p.channel, *p.budget, p.csi_mode, rng);
    return run_frame_at(source, p, draw, rng);
}

}  // namespace svbsc
