#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "svbsc/modem.hpp"
#include "svbsc/rng.hpp"

namespace svbsc {

// Rician block-fading model. One frame occupies one coherence block.
struct RicianModel {
    double k_factor_db = 20.0;  // line-of-sight to scatter power ratio
    int n_pilots = 10;          // pilot symbols per coherence block
    double mean_gain = 1.0;     // E[gamma], fixed at 1 in the experiments

    double k_linear() const { return std::pow(10.0, k_factor_db / 10.0); }

    void validate() const {
        if (!std::isfinite(k_factor_db)) throw std::invalid_argument("RicianModel: k_factor_db must be finite");
        if (n_pilots < 1) throw std::invalid_argument("RicianModel: n_pilots must be >= 1");
        if (!(mean_gain > 0.0)) throw std::invalid_argument("RicianModel: mean_gain must be positive");
    }
};

struct LinkBudget {
    double power_limit = 128.0;      // P bar, linear units; frame energy budget
    std::size_t channel_uses = 128;  // W bar, symbols per frame
    double noise_psd = 1.0;          // sigma_n, noise power per symbol

    // noise_psd == 0 is tolerated as the noiseless degenerate used in tests
    // and in the sigma_n -> 0 sweep rows
    void validate() const {
        if (!(power_limit > 0.0)) throw std::invalid_argument("LinkBudget: power_limit must be positive");
        if (channel_uses == 0) throw std::invalid_argument("LinkBudget: channel_uses must be positive");
        if (!(noise_psd >= 0.0)) throw std::invalid_argument("LinkBudget: noise_psd must be non-negative");
    }

    double snr(double gamma) const {
        if (gamma < 0.0) throw std::domain_error("LinkBudget::snr: negative gamma");
        if (noise_psd == 0.0) return std::numeric_limits<double>::infinity();
        return power_limit * gamma / (noise_psd * static_cast<double>(channel_uses));
    }

    double nominal_snr() const { return snr(1.0); }

    // per-symbol amplitude so the frame's total transmit power equals power_limit
    double symbol_amplitude() const { return std::sqrt(power_limit / static_cast<double>(channel_uses)); }
};

struct ChannelDraw {
    double gamma = 0.0;          // true power gain
    double gamma_est = 0.0;      // estimate available to the network
    double est_noise_var = 0.0;  // sigma_e used for the estimate
};

enum class CsiMode { Perfect, Imperfect };

// sigma_e = 1 / (1 + n_p * snr); pilot-based estimation error variance
inline double estimation_noise_variance(double snr, int n_pilots) {
    if (snr < 0.0) throw std::domain_error("estimation_noise_variance: negative snr");
    if (n_pilots < 1) throw std::invalid_argument("estimation_noise_variance: n_pilots must be >= 1");
    return 1.0 / (1.0 + static_cast<double>(n_pilots) * snr);
}

// gamma = |h|^2 with h Rician; the imperfect estimate perturbs the complex
// amplitude (gamma_est = |h + e|^2), which keeps gamma_est >= 0. sigma_e is
// evaluated at the budget's nominal SNR (mean gain), not per draw.
inline ChannelDraw sample_channel(const RicianModel& model, const LinkBudget& budget, CsiMode mode, Rng& rng) {
    model.validate();
    const double kr = model.k_linear();
    const double los = std::sqrt(kr / (kr + 1.0));
    const double sigma = std::sqrt(1.0 / (2.0 * (kr + 1.0)));
    const double re = los + sigma * rng.normal();
    const double im = sigma * rng.normal();
    ChannelDraw d;
    d.gamma = (re * re + im * im) * model.mean_gain;
    if (mode == CsiMode::Perfect) {
        d.gamma_est = d.gamma;
        d.est_noise_var = 0.0;
        return d;
    }
    d.est_noise_var = estimation_noise_variance(budget.nominal_snr(), model.n_pilots);
    double ere = 0.0, eim = 0.0;
    rng.cnormal(d.est_noise_var, ere, eim);
    const double tre = re + ere, tim = im + eim;
    d.gamma_est = (tre * tre + tim * tim) * model.mean_gain;
    return d;
}

// y[k] = sqrt(gamma) * x[k] + n[k], n circularly symmetric with per-symbol
// variance sigma_n. Caller scales symbols to the power budget beforehand.
inline std::vector<cplx> transmit(std::span<const cplx> symbols, double gamma, const LinkBudget& budget, Rng& rng) {
    budget.validate();
    if (symbols.size() != budget.channel_uses) throw std::invalid_argument("transmit: symbol count != channel_uses");
    if (gamma < 0.0) throw std::domain_error("transmit: negative gamma");
    const double a = std::sqrt(gamma);
    std::vector<cplx> out(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        double nre = 0.0, nim = 0.0;
        rng.cnormal(budget.noise_psd, nre, nim);
        out[k] = a * symbols[k] + cplx(nre, nim);
    }
    return out;
}

}  // namespace svbsc
