#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svbsc/channel.hpp"
#include "svbsc/modem.hpp"
#include "svbsc/threading.hpp"

namespace svbsc {

// Empirical Q(snr, M) = ber table with a monotone inverse. Cells are Monte
// Carlo measurements smoothed per order (isotonic, non-increasing in snr)
// and made non-decreasing across orders at fixed snr.
struct BerMap {
    std::vector<int> orders;                // ascending
    std::vector<double> snr_db;             // ascending, shared by all orders
    std::vector<std::vector<double>> ber;   // [order index][snr index]
    std::uint64_t seed = 0;
    std::uint64_t bits_per_point = 0;

    std::size_t order_index(int m) const {
        for (std::size_t i = 0; i < orders.size(); ++i)
            if (orders[i] == m) return i;
        throw std::invalid_argument("BerMap: unsupported modulation order " + std::to_string(m));
    }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Measured flip ratio of one constellation through AWGN at the given linear
// snr (gamma = 1 fixed, unit-energy symbols).
inline double measure_ber(const Constellation& c, double snr_linear, std::size_t nbits, Rng& rng) {
    if (snr_linear < 0.0) throw std::domain_error("measure_ber: negative snr");
    const int bps = c.bits_per_symbol();
    const std::size_t nsym = (nbits + static_cast<std::size_t>(bps) - 1) / static_cast<std::size_t>(bps);
    const double noise_var = std::isinf(snr_linear) ? 0.0 : 1.0 / snr_linear;
    std::size_t flips = 0;
    for (std::size_t s = 0; s < nsym; ++s) {
        int label = 0;
        for (int b = 0; b < bps; ++b) label = (label << 1) | rng.bit();
        double nre = 0.0, nim = 0.0;
        rng.cnormal(noise_var, nre, nim);
        const int hat = c.demap(c.map(label) + cplx(nre, nim));
        unsigned diff = static_cast<unsigned>(label ^ hat);
        while (diff) {
            flips += diff & 1u;
            diff >>= 1u;
        }
    }
    return static_cast<double>(flips) / static_cast<double>(nsym * static_cast<std::size_t>(bps));
}

namespace detail {
// pool-adjacent-violators, non-increasing fit
inline void isotonic_non_increasing(std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> level(n);
    std::vector<std::size_t> weight(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = y[i];
        weight[blocks] = 1;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] < level[blocks - 1]) {
            const double merged = (level[blocks - 2] * static_cast<double>(weight[blocks - 2]) +
                                   level[blocks - 1] * static_cast<double>(weight[blocks - 1])) /
                                  static_cast<double>(weight[blocks - 2] + weight[blocks - 1]);
            weight[blocks - 2] += weight[blocks - 1];
            level[blocks - 2] = merged;
            --blocks;
        }
    }
    std::size_t i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t k = 0; k < weight[b]; ++k) y[i++] = level[b];
}
}  // namespace detail

inline BerMap calibrate(const ConstellationSet& set, std::vector<double> snr_grid_db,
                        std::size_t bits_per_point, std::uint64_t seed, unsigned threads = 1) {
    if (bits_per_point < 100000) throw std::invalid_argument("calibrate: bits_per_point must be >= 1e5");
    if (snr_grid_db.size() < 2) throw std::invalid_argument("calibrate: grid needs at least two points");
    std::sort(snr_grid_db.begin(), snr_grid_db.end());
    BerMap map;
    map.orders.assign(ConstellationSet::orders().begin(), ConstellationSet::orders().end());
    map.snr_db = std::move(snr_grid_db);
    map.seed = seed;
    map.bits_per_point = bits_per_point;
    map.ber.assign(map.orders.size(), std::vector<double>(map.snr_db.size(), 0.0));

    const std::size_t cells = map.orders.size() * map.snr_db.size();
    parallel_for(cells, threads, [&](std::size_t cell) {
        const std::size_t oi = cell / map.snr_db.size();
        const std::size_t si = cell % map.snr_db.size();
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(map.orders[oi]), si));
        const double raw = measure_ber(set.get(map.orders[oi]), db_to_linear(map.snr_db[si]), bits_per_point, rng);
        map.ber[oi][si] = std::min(raw, 0.5);
    });

    for (auto& row : map.ber) detail::isotonic_non_increasing(row);
    // cross-order monotonicity: ber non-decreasing in M at fixed snr
    for (std::size_t oi = 1; oi < map.orders.size(); ++oi)
        for (std::size_t si = 0; si < map.snr_db.size(); ++si)
            map.ber[oi][si] = std::max(map.ber[oi][si], map.ber[oi - 1][si]);
    return map;
}

namespace detail {
inline constexpr double kLogBerFloor = 1e-12;  // for log-space interpolation of zero cells
inline double log_ber(double b) { return std::log10(std::max(b, kLogBerFloor)); }
}  // namespace detail

// log-linear interpolation (linear in snr_db against log10 ber); clamps to
// the grid ends and reproduces stored values exactly at grid nodes.
inline double ber_lookup(const BerMap& map, double snr_db, int order) {
    const auto& row = map.ber[map.order_index(order)];
    const auto& grid = map.snr_db;
    if (snr_db <= grid.front()) return row.front();
    if (snr_db >= grid.back()) return row.back();
    const auto it = std::lower_bound(grid.begin(), grid.end(), snr_db);
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    if (grid[hi] == snr_db) return row[hi];
    const std::size_t lo = hi - 1;
    const double t = (snr_db - grid[lo]) / (grid[hi] - grid[lo]);
    return std::pow(10.0, detail::log_ber(row[lo]) + t * (detail::log_ber(row[hi]) - detail::log_ber(row[lo])));
}

// Smallest grid-interpolated snr whose (smoothed) ber is <= q0.
inline double snr_threshold(const BerMap& map, double q0, int order) {
    if (!(q0 > 0.0)) throw std::invalid_argument("snr_threshold: q0 must be positive");
    const auto& row = map.ber[map.order_index(order)];
    const auto& grid = map.snr_db;
    if (row.back() > q0)
        throw std::out_of_range("snr_threshold: q0=" + std::to_string(q0) +
                                " below minimum achievable ber for M=" + std::to_string(order));
    std::size_t i = 0;
    while (row[i] > q0) ++i;
    if (i == 0) return grid.front();
    // invert the log-linear segment (row[i-1] > q0 >= row[i])
    const double la = detail::log_ber(row[i - 1]), lb = detail::log_ber(row[i]);
    const double lq = detail::log_ber(q0);
    const double t = la == lb ? 1.0 : (lq - la) / (lb - la);
    return grid[i - 1] + t * (grid[i] - grid[i - 1]);
}

// gamma_th = (sigma_n * W / P) * snr_th
inline double gamma_threshold(double snr_th_db, const LinkBudget& budget) {
    budget.validate();
    return budget.noise_psd * static_cast<double>(budget.channel_uses) / budget.power_limit *
           db_to_linear(snr_th_db);
}

struct GammaThreshold {
    int order = 0;
    double gamma_th = 0.0;
};

// Per-order gain thresholds for a target q0, ascending in order.
inline std::vector<GammaThreshold> gamma_thresholds(const BerMap& map, double q0, const LinkBudget& budget) {
    std::vector<GammaThreshold> out;
    out.reserve(map.orders.size());
    for (int m : map.orders)
        out.push_back({m, gamma_threshold(snr_threshold(map, q0, m), budget)});
    return out;
}

namespace detail {
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed number: '" + s + "'");
    return v;
}
}  // namespace detail

inline std::string to_csv(const BerMap& map) {
    std::string out;
    out += "#seed=" + std::to_string(map.seed) + ",#bits=" + std::to_string(map.bits_per_point) + "\n";
    out += "M,snr_db,ber\n";
    for (std::size_t oi = 0; oi < map.orders.size(); ++oi)
        for (std::size_t si = 0; si < map.snr_db.size(); ++si)
            out += std::to_string(map.orders[oi]) + "," + detail::format_double(map.snr_db[si]) + "," +
                   detail::format_double(map.ber[oi][si]) + "\n";
    return out;
}

inline BerMap from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    BerMap map;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto seed_pos = line.find("#seed=");
            const auto bits_pos = line.find("#bits=");
            if (seed_pos != std::string::npos)
                map.seed = std::stoull(line.substr(seed_pos + 6, line.find(',', seed_pos) - seed_pos - 6));
            if (bits_pos != std::string::npos) map.bits_per_point = std::stoull(line.substr(bits_pos + 6));
            continue;
        }
        if (!header_seen) {
            if (line != "M,snr_db,ber") throw std::invalid_argument("BerMap csv: bad header '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("BerMap csv: bad row '" + line + "'");
        const int m = std::stoi(line.substr(0, c1));
        const double snr = detail::parse_double(line.substr(c1 + 1, c2 - c1 - 1));
        const double ber = detail::parse_double(line.substr(c2 + 1));
        if (map.orders.empty() || map.orders.back() != m) {
            map.orders.push_back(m);
            map.ber.emplace_back();
        }
        if (map.orders.size() == 1) {
            map.snr_db.push_back(snr);
        } else {
            const std::size_t si = map.ber.back().size();
            if (si >= map.snr_db.size() || map.snr_db[si] != snr)
                throw std::invalid_argument("BerMap csv: grid mismatch across orders");
        }
        map.ber.back().push_back(ber);
    }
    if (!header_seen || map.orders.empty()) throw std::invalid_argument("BerMap csv: empty or truncated file");
    for (const auto& row : map.ber)
        if (row.size() != map.snr_db.size()) throw std::invalid_argument("BerMap csv: ragged rows");
    return map;
}

inline void save_csv(const BerMap& map, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    const std::string body = to_csv(map);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline BerMap load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_csv(ss.str());
}

}  // namespace svbsc
