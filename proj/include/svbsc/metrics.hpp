#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "svbsc/bits.hpp"

namespace svbsc {

// Peak for PSNR is fixed at 1: all signals live in [0,1].
inline constexpr double kPsnrCapDb = 99.0;

inline double mse(std::span<const double> s, std::span<const double> s_hat) {
    if (s.size() != s_hat.size()) throw std::invalid_argument("mse: length mismatch");
    if (s.empty()) throw std::invalid_argument("mse: empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s[i] - s_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(s.size());
}

inline double psnr(double mse_value) {
    if (mse_value < 0.0) throw std::invalid_argument("psnr: negative mse");
    if (mse_value == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse_value));
}

inline double flip_ratio(const BitVec& x, const BitVec& y) {
    if (x.empty()) throw std::invalid_argument("flip_ratio: empty vectors");
    return static_cast<double>(hamming_distance(x, y)) / static_cast<double>(x.size());
}

// Link QoS contract: target flip ratio q0, instability tolerance epsilon,
// maximum puncturing length, optional cap on E[L].
struct StabilityTarget {
    double q0 = 0.05;
    double epsilon = 0.05;
    std::size_t l_max = 0;
    std::optional<double> l_avg_cap;

    void validate() const {
        if (!(q0 > 0.0 && q0 < 0.5)) throw std::invalid_argument("StabilityTarget: q0 must be in (0, 0.5)");
        if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("StabilityTarget: epsilon must be in [0, 1)");
    }
};

struct QosReport {
    double mean_ber = 0.0;
    double stability_violation_rate = 0.0;  // empirical Pr[q > q0], strict
    double mean_spectral_efficiency = 0.0;  // bits per channel use
    double mean_psnr_db = 0.0;
    double mean_l = 0.0;
    std::size_t max_l = 0;
    double infeasible_rate = 0.0;
    std::size_t frame_count = 0;
    bool l_avg_cap_exceeded = false;
    StabilityTarget target;
};

// Mean distortion per puncturing length over a dataset (Eq.-style d[L] vector).
struct DistortionReport {
    std::vector<std::size_t> l_values;     // breakpoint-induced L grid, descending
    std::vector<double> mean_distortion;   // same indexing as l_values
    std::vector<std::vector<double>> per_frame;  // [l index][frame]
};

namespace detail {
// Sum in ascending value order so aggregation is permutation-invariant
// bit-for-bit, not just up to rounding.
inline double ordered_mean(std::vector<double>& values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}
}  // namespace detail

// Aggregates per-frame traces into one QoS row. Works on any range whose
// elements expose the FrameTrace measurement fields.
template <class TraceRange>
QosReport aggregate(const TraceRange& traces, const StabilityTarget& target) {
    QosReport r;
    r.target = target;
    std::vector<double> qs, ses, psnrs, ls;
    std::size_t violations = 0, infeasible = 0;
    for (const auto& t : traces) {
        qs.push_back(t.measured_q);
        ses.push_back(std::log2(static_cast<double>(t.selected_m)));
        psnrs.push_back(t.psnr_db);
        ls.push_back(static_cast<double>(t.punct_len));
        r.max_l = std::max(r.max_l, t.punct_len);
        violations += t.measured_q > target.q0 ? 1 : 0;
        infeasible += t.feasible ? 0 : 1;
        ++r.frame_count;
    }
    if (r.frame_count == 0) throw std::invalid_argument("aggregate: empty trace list");
    r.mean_ber = detail::ordered_mean(qs);
    r.mean_spectral_efficiency = detail::ordered_mean(ses);
    r.mean_psnr_db = detail::ordered_mean(psnrs);
    r.mean_l = detail::ordered_mean(ls);
    r.stability_violation_rate = static_cast<double>(violations) / static_cast<double>(r.frame_count);
    r.infeasible_rate = static_cast<double>(infeasible) / static_cast<double>(r.frame_count);
    if (target.l_avg_cap && r.mean_l > *target.l_avg_cap) r.l_avg_cap_exceeded = true;
    return r;
}

}  // namespace svbsc
