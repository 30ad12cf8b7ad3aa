#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "svbsc/bits.hpp"

namespace svbsc {

using cplx = std::complex<double>;

inline constexpr std::array<int, 10> kModulationOrders = {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};

inline int bits_per_symbol(int order) {
    int b = 0;
    while ((1 << b) < order) ++b;
    if ((1 << b) != order || order < 2) throw std::invalid_argument("unsupported modulation order");
    return b;
}

inline double spectral_efficiency(int order) {
    return static_cast<double>(bits_per_symbol(order));
}

namespace detail {
inline int gray(int i) { return i ^ (i >> 1); }

// Optimized quasi-Gray labeling for the 32-cross. The plain Gray-product
// fold cannot reach the 1.15 average-Hamming bound at M = 32 (its optimum
// over all strip assignments is 60/52); this table averages 56/52.
struct CrossEntry { int x, y, label; };
inline constexpr std::array<CrossEntry, 32> kCross32 = {{
    {-5, -3, 2},  {-5, -1, 10}, {-5, 1, 11}, {-5, 3, 3},
    {-3, -5, 19}, {-3, -3, 18}, {-3, -1, 14}, {-3, 1, 15}, {-3, 3, 7},  {-3, 5, 6},
    {-1, -5, 27}, {-1, -3, 26}, {-1, -1, 30}, {-1, 1, 31}, {-1, 3, 23}, {-1, 5, 22},
    {1, -5, 25},  {1, -3, 24},  {1, -1, 28},  {1, 1, 29},  {1, 3, 21},  {1, 5, 20},
    {3, -5, 17},  {3, -3, 16},  {3, -1, 12},  {3, 1, 13},  {3, 3, 5},   {3, 5, 4},
    {5, -3, 0},   {5, -1, 8},   {5, 1, 9},    {5, 3, 1},
}};
}  // namespace detail

// One Gray-labeled constellation: unit average energy, label-indexed points,
// plus the integer-lattice geometry used for exact hard-decision demapping.
class Constellation {
public:
    explicit Constellation(int order) : order_(order), bps_(svbsc::bits_per_symbol(order)) {
        build_lattice();
        double energy = 0.0;
        for (auto [x, y] : lattice_) energy += static_cast<double>(x) * x + static_cast<double>(y) * y;
        scale_ = 1.0 / std::sqrt(energy / static_cast<double>(order_));
        points_.resize(static_cast<std::size_t>(order_));
        for (int lab = 0; lab < order_; ++lab)
            points_[static_cast<std::size_t>(lab)] =
                cplx(lattice_[static_cast<std::size_t>(lab)].first * scale_, lattice_[static_cast<std::size_t>(lab)].second * scale_);
        build_grid();
    }

    int order() const { return order_; }
    int bits_per_symbol() const { return bps_; }
    const std::vector<cplx>& points() const { return points_; }
    double scale() const { return scale_; }

    cplx map(int label) const { return points_[static_cast<std::size_t>(label)]; }

    // Minimum-Euclidean-distance label; ties break toward the lower label.
    int demap(cplx r) const {
        if (order_ == 2) return std::real(r) < 0.0 ? 1 : 0;
        const double u = std::real(r) / scale_;
        const double v = std::imag(r) / scale_;
        const int ix = snap_index(u, xmax_);
        const int iy = snap_index(v, ymax_);
        int best = -1;
        double best_d2 = 0.0;
        if (grid_at(ix, iy) >= 0) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int lab = grid_at(ix + dx, iy + dy);
                    if (lab < 0) continue;
                    consider(lab, u, v, best, best_d2);
                }
            }
        } else {
            // snapped into a cut corner (cross shapes only): full scan
            for (int lab = 0; lab < order_; ++lab) consider(lab, u, v, best, best_d2);
        }
        return best;
    }

private:
    static int snap_index(double coord, int cmax) {
        const double idx = (coord + cmax) * 0.5;
        int i = static_cast<int>(std::lround(idx));
        if (i < 0) i = 0;
        if (i > cmax) i = cmax;
        return i;
    }

    void consider(int lab, double u, double v, int& best, double& best_d2) const {
        const auto [x, y] = lattice_[static_cast<std::size_t>(lab)];
        const double du = u - x, dv = v - y;
        const double d2 = du * du + dv * dv;
        if (best < 0 || d2 < best_d2 || (d2 == best_d2 && lab < best)) {
            best = lab;
            best_d2 = d2;
        }
    }

    int grid_at(int ix, int iy) const {
        if (ix < 0 || ix > xmax_ || iy < 0 || iy > ymax_) return -1;
        return grid_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(xmax_ + 1) + static_cast<std::size_t>(ix)];
    }

    void set_point(int label, int x, int y) { lattice_[static_cast<std::size_t>(label)] = {x, y}; }

    void build_lattice() {
        lattice_.resize(static_cast<std::size_t>(order_));
        if (order_ == 2) {
            set_point(0, 1, 0);
            set_point(1, -1, 0);
            xmax_ = 1;
            ymax_ = 0;
            return;
        }
        if (bps_ % 2 == 0) {
            // square: per-axis reflected Gray labels
            const int m = 1 << (bps_ / 2);
            for (int ki = 0; ki < m; ++ki)
                for (int kq = 0; kq < m; ++kq)
                    set_point((detail::gray(ki) << (bps_ / 2)) | detail::gray(kq), 2 * ki + 1 - m, 2 * kq + 1 - m);
            xmax_ = ymax_ = m - 1;
            return;
        }
        if (order_ == 8) {
            // 4x2 rectangle; the Gray product needs no fold here
            for (int ki = 0; ki < 4; ++ki)
                for (int kq = 0; kq < 2; ++kq)
                    set_point((detail::gray(ki) << 1) | detail::gray(kq), 2 * ki + 1 - 4, 2 * kq + 1 - 2);
            xmax_ = 3;
            ymax_ = 1;
            return;
        }
        if (order_ == 32) {
            for (const auto& e : detail::kCross32) set_point(e.label, e.x, e.y);
            xmax_ = ymax_ = 5;
            return;
        }
        // 128 / 512 cross: Gray-labeled 2H x H rectangle with the outer
        // columns folded into the top/bottom strips
        const int nI = (bps_ + 1) / 2, nQ = bps_ / 2;
        const int W = 1 << nI, H = 1 << nQ, S = 3 * H / 2;
        for (int ki = 0; ki < W; ++ki) {
            for (int kq = 0; kq < H; ++kq) {
                const int label = (detail::gray(ki) << nQ) | detail::gray(kq);
                const int x = 2 * ki + 1 - W, y = 2 * kq + 1 - H;
                if (std::abs(x) <= S - 1) {
                    set_point(label, x, y);
                } else {
                    const int s = x > 0 ? 1 : -1, t = y > 0 ? 1 : -1;
                    const int c = (std::abs(x) - S - 1) / 2;
                    const int k = (std::abs(y) - 1) / 2;
                    set_point(label, s * (2 * k + 1), t * (H + 1 + 2 * c));
                }
            }
        }
        xmax_ = ymax_ = S - 1;
    }

    void build_grid() {
        if (order_ == 2) return;
        grid_.assign(static_cast<std::size_t>(xmax_ + 1) * static_cast<std::size_t>(ymax_ + 1), -1);
        for (int lab = 0; lab < order_; ++lab) {
            const auto [x, y] = lattice_[static_cast<std::size_t>(lab)];
            grid_[static_cast<std::size_t>((y + ymax_) / 2) * static_cast<std::size_t>(xmax_ + 1) +
                  static_cast<std::size_t>((x + xmax_) / 2)] = lab;
        }
    }

    int order_;
    int bps_;
    double scale_ = 1.0;
    int xmax_ = 0, ymax_ = 0;
    std::vector<std::pair<int, int>> lattice_;  // label -> integer coordinates
    std::vector<cplx> points_;                  // label -> unit-energy point
    std::vector<int> grid_;                     // lattice cell -> label, -1 for holes
};

// All supported orders, built once and shared read-only.
class ConstellationSet {
public:
    ConstellationSet() {
        for (int m : kModulationOrders) table_.emplace_back(m);
    }

    static const std::array<int, 10>& orders() { return kModulationOrders; }

    const Constellation& get(int order) const {
        for (const auto& c : table_)
            if (c.order() == order) return c;
        throw std::invalid_argument("unsupported modulation order");
    }

    int max_order() const { return table_.back().order(); }

private:
    std::vector<Constellation> table_;
};

inline std::vector<cplx> modulate(const Constellation& c, std::span<const Bit> bits) {
    const int bps = c.bits_per_symbol();
    if (bits.size() % static_cast<std::size_t>(bps) != 0)
        throw std::invalid_argument("modulate: bit count not divisible by log2(M)");
    std::vector<cplx> out(bits.size() / static_cast<std::size_t>(bps));
    for (std::size_t s = 0; s < out.size(); ++s) {
        int label = 0;
        for (int b = 0; b < bps; ++b) label = (label << 1) | bits[s * static_cast<std::size_t>(bps) + static_cast<std::size_t>(b)];
        out[s] = c.map(label);
    }
    return out;
}

inline BitVec demodulate(const Constellation& c, std::span<const cplx> received) {
    const int bps = c.bits_per_symbol();
    BitVec out(received.size() * static_cast<std::size_t>(bps));
    for (std::size_t s = 0; s < received.size(); ++s) {
        const int label = c.demap(received[s]);
        for (int b = 0; b < bps; ++b)
            out[s * static_cast<std::size_t>(bps) + static_cast<std::size_t>(b)] =
                static_cast<Bit>((label >> (bps - 1 - b)) & 1);
    }
    return out;
}

inline std::vector<cplx> modulate(const ConstellationSet& set, std::span<const Bit> bits, int order) {
    return modulate(set.get(order), bits);
}

inline BitVec demodulate(const ConstellationSet& set, std::span<const cplx> received, int order) {
    return demodulate(set.get(order), received);
}

}  // namespace svbsc
