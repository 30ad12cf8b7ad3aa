#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svbsc/bits.hpp"
#include "svbsc/metrics.hpp"
#include "svbsc/rng.hpp"

namespace svbsc {

static_assert(std::endian::native == std::endian::little, "model serialization assumes little-endian");

// Stage ladder contract: C_1 = K - L_max, C_F = K, strictly increasing.
struct CodecProfile {
    std::size_t n_source = 0;                 // N
    std::size_t k_coded = 0;                  // K
    std::vector<std::uint32_t> breakpoints;   // C_1 .. C_F

    std::size_t n_stages() const { return breakpoints.size(); }
    std::size_t l_max() const { return k_coded - breakpoints.front(); }
    double rate_lo() const { return static_cast<double>(breakpoints.front()) / static_cast<double>(n_source); }
    double rate_hi() const { return static_cast<double>(k_coded) / static_cast<double>(n_source); }

    void validate() const {
        if (n_source == 0 || k_coded == 0) throw std::invalid_argument("CodecProfile: empty dimensions");
        if (breakpoints.empty()) throw std::invalid_argument("CodecProfile: no breakpoints");
        for (std::size_t i = 1; i < breakpoints.size(); ++i)
            if (breakpoints[i] <= breakpoints[i - 1])
                throw std::invalid_argument("CodecProfile: breakpoints must be strictly increasing");
        if (breakpoints.back() != k_coded)
            throw std::invalid_argument("CodecProfile: last breakpoint must equal K");
    }

    std::uint64_t hash() const {
        std::uint64_t h = derive_seed(0x524c4a43, n_source, k_coded);
        for (auto c : breakpoints) h = derive_seed(h, c);
        return h;
    }
};

struct BitAssignment {
    std::uint32_t coeff = 0;
    std::uint16_t significance = 0;  // 0 = MSB
};

// Trained linear-transform ladder codec. basis rows are orthonormal principal
// directions, one per used coefficient; alloc_order is the global importance
// order in which coded bits are emitted.
struct LadderCodecModel {
    CodecProfile profile;
    std::vector<double> mean;                  // N
    std::vector<std::vector<double>> basis;    // rows x N
    std::vector<double> coeff_lo, coeff_hi;    // per row
    std::vector<double> variances;             // per row
    std::vector<BitAssignment> alloc_order;    // K entries
    std::vector<std::uint16_t> depth;          // per row, derived from alloc_order

    std::size_t rows() const { return basis.size(); }
};

inline constexpr std::uint16_t kMaxQuantBits = 32;  // per-coefficient depth cap

// Greedy bit allocation on the distortion-reduction proxy lambda * 4^-b.
// With a uniform flip rate q the flip-damage term scales identically, so the
// order is invariant in flip_q; the knob is kept for the training contract.
inline std::vector<BitAssignment> greedy_allocation(const std::vector<double>& variances, std::size_t k_bits,
                                                    double flip_q = 0.0) {
    if (!(flip_q >= 0.0 && flip_q < 0.25))
        throw std::invalid_argument("greedy_allocation: flip_q must be in [0, 0.25)");
    const double gain_scale = 4.0 - 16.0 * flip_q;
    std::vector<std::uint16_t> bits(variances.size(), 0);
    std::vector<double> score(variances.size());
    for (std::size_t j = 0; j < variances.size(); ++j) score[j] = variances[j] * gain_scale;
    std::vector<BitAssignment> order;
    order.reserve(k_bits);
    for (std::size_t t = 0; t < k_bits; ++t) {
        std::size_t pick = variances.size();
        double best = 0.0;
        for (std::size_t j = 0; j < variances.size(); ++j) {
            if (bits[j] >= kMaxQuantBits) continue;
            if (pick == variances.size() || score[j] > best) {
                pick = j;
                best = score[j];
            }
        }
        if (pick == variances.size())
            throw std::invalid_argument("greedy_allocation: K exceeds quantizer capacity of usable coefficients");
        order.push_back({static_cast<std::uint32_t>(pick), bits[pick]});
        ++bits[pick];
        score[pick] *= 0.25;
    }
    return order;
}

namespace detail {

inline void check_unit_range(const std::vector<std::vector<double>>& data) {
    for (const auto& v : data)
        for (double x : v)
            if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("training data must lie in [0,1]");
}

// Expectation-form reconstruction: start at 0.5 (the all-unknown midpoint)
// and shift by (b - 0.5) * 2^-(sig+1) for each known bit. For an MSB-side
// known prefix this is exactly the midpoint of the dyadic interval the
// prefix fixes.
inline double fraction_base() { return 0.5; }
inline double fraction_shift(std::uint16_t significance, Bit value) {
    return (static_cast<double>(value) - 0.5) * std::ldexp(1.0, -(static_cast<int>(significance) + 1));
}

inline double reconstruct_fraction(std::span<const NullableBit> bits) {
    double v = fraction_base();
    for (std::size_t k = 0; k < bits.size(); ++k)
        if (bits[k] != NullableBit::Null)
            v += fraction_shift(static_cast<std::uint16_t>(k), bits[k] == NullableBit::One ? Bit{1} : Bit{0});
    return v;
}

}  // namespace detail

inline LadderCodecModel train_ladder(const std::vector<std::vector<double>>& data, const CodecProfile& profile,
                                     double flip_q = 0.0) {
    profile.validate();
    if (data.size() < 2) throw std::invalid_argument("train_ladder: dataset too small");
    const std::size_t n = data.size();
    const std::size_t dim = profile.n_source;
    for (const auto& v : data)
        if (v.size() != dim) throw std::invalid_argument("train_ladder: sample dimension mismatch");
    detail::check_unit_range(data);

    std::vector<double> mean(dim, 0.0);
    for (const auto& v : data)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
    for (auto& m : mean) m /= static_cast<double>(n);

    // covariance accumulated in fixed-size blocks (order independent of
    // thread count by virtue of being sequential)
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    constexpr std::size_t kBlock = 512;
    Eigen::MatrixXd block(static_cast<Eigen::Index>(std::min(kBlock, n)), static_cast<Eigen::Index>(dim));
    std::size_t done = 0;
    while (done < n) {
        const std::size_t take = std::min(kBlock, n - done);
        for (std::size_t r = 0; r < take; ++r)
            for (std::size_t i = 0; i < dim; ++i)
                block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = data[done + r][i] - mean[i];
        const auto rows = block.topRows(static_cast<Eigen::Index>(take));
        cov.noalias() += rows.transpose() * rows;
        done += take;
    }
    cov /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("train_ladder: eigendecomposition failed");

    // eigenpairs descending, numerically-negative eigenvalues clamped
    std::vector<double> lambda(dim);
    for (std::size_t j = 0; j < dim; ++j)
        lambda[j] = std::max(es.eigenvalues()(static_cast<Eigen::Index>(dim - 1 - j)), 0.0);
    if (lambda[0] <= 0.0) throw std::invalid_argument("train_ladder: degenerate (zero-variance) data");
    std::size_t usable = dim;
    while (usable > 0 && lambda[usable - 1] <= lambda[0] * 1e-12) --usable;

    auto alloc = greedy_allocation(std::vector<double>(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(usable)),
                                   profile.k_coded, flip_q);
    std::uint32_t used = 0;
    for (const auto& a : alloc) used = std::max(used, a.coeff + 1);
    if (n < 10 * static_cast<std::size_t>(used))
        throw std::invalid_argument("train_ladder: dataset too small (need >= 10 samples per used coefficient)");

    LadderCodecModel model;
    model.profile = profile;
    model.mean = std::move(mean);
    model.basis.resize(used, std::vector<double>(dim));
    model.coeff_lo.resize(used);
    model.coeff_hi.resize(used);
    model.variances.resize(used);
    model.depth.assign(used, 0);
    for (std::uint32_t j = 0; j < used; ++j) {
        const Eigen::Index col = static_cast<Eigen::Index>(dim - 1 - j);
        // canonical sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        es.eigenvectors().col(col).cwiseAbs().maxCoeff(&arg);
        const double sign = es.eigenvectors()(arg, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < dim; ++i)
            model.basis[j][i] = sign * es.eigenvectors()(static_cast<Eigen::Index>(i), col);
        const double sd = std::sqrt(lambda[j]);
        model.coeff_lo[j] = -4.0 * sd;
        model.coeff_hi[j] = 4.0 * sd;
        model.variances[j] = lambda[j];
    }
    model.alloc_order = std::move(alloc);
    for (const auto& a : model.alloc_order)
        model.depth[a.coeff] = std::max(model.depth[a.coeff], static_cast<std::uint16_t>(a.significance + 1));
    return model;
}

// Non-rateless benchmark: same transform and bit set, emission order shuffled
// by a deterministic permutation seeded from the profile, which destroys the
// importance-prefix property.
inline LadderCodecModel train_baseline(const std::vector<std::vector<double>>& data, const CodecProfile& profile,
                                       double flip_q = 0.0) {
    LadderCodecModel model = train_ladder(data, profile, flip_q);
    Rng rng(model.profile.hash());
    auto& order = model.alloc_order;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return model;
}

namespace detail {
inline std::vector<double> project(const LadderCodecModel& m, std::span<const double> s) {
    std::vector<double> c(m.rows(), 0.0);
    for (std::size_t j = 0; j < m.rows(); ++j) {
        double acc = 0.0;
        const auto& row = m.basis[j];
        for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * (s[i] - m.mean[i]);
        c[j] = acc;
    }
    return c;
}
}  // namespace detail

inline BitVec encode(const LadderCodecModel& m, std::span<const double> s) {
    if (s.size() != m.profile.n_source) throw std::invalid_argument("encode: source dimension mismatch");
    const auto coeffs = detail::project(m, s);
    std::vector<std::uint64_t> code(m.rows(), 0);
    for (std::size_t j = 0; j < m.rows(); ++j) {
        const double lo = m.coeff_lo[j], hi = m.coeff_hi[j];
        const double c = std::clamp(coeffs[j], lo, hi);
        const double v = std::clamp((c - lo) / (hi - lo), 0.0, 1.0);
        const int d = m.depth[j];
        const auto top = (std::uint64_t{1} << d) - 1;
        code[j] = std::min(static_cast<std::uint64_t>(std::floor(std::ldexp(v, d))), top);
    }
    BitVec out(m.profile.k_coded);
    for (std::size_t p = 0; p < out.size(); ++p) {
        const auto& a = m.alloc_order[p];
        const int shift = m.depth[a.coeff] - 1 - a.significance;
        out[p] = static_cast<Bit>((code[a.coeff] >> shift) & 1u);
    }
    return out;
}

// Alg.-2 stage selection: smallest j with C_j >= K - L (1-based index). The
// codec decodes any L in [0, K]; exceeding the QoS cap L_max is recorded by
// the scheduler as a violation rather than rejected here.
inline std::size_t select_decoder(std::span<const std::uint32_t> breakpoints, std::size_t k_coded, std::size_t l_punct) {
    if (breakpoints.empty()) throw std::invalid_argument("select_decoder: no breakpoints");
    if (l_punct > k_coded) throw std::out_of_range("select_decoder: L exceeds codeword length");
    const std::size_t need = k_coded - l_punct;
    for (std::size_t j = 0; j < breakpoints.size(); ++j)
        if (breakpoints[j] >= need) return j + 1;
    throw std::out_of_range("select_decoder: breakpoints do not reach K");
}

inline std::vector<double> decode(const LadderCodecModel& m, std::span<const NullableBit> u_hat, std::size_t l_punct) {
    const std::size_t k = m.profile.k_coded;
    if (u_hat.size() != k) throw std::invalid_argument("decode: input must have K positions");
    if (l_punct > k) throw std::out_of_range("decode: L exceeds codeword length");
    const std::size_t known = k - l_punct;
    const std::size_t stage = select_decoder(m.profile.breakpoints, k, l_punct);
    const std::size_t prefix = m.profile.breakpoints[stage - 1];
    for (std::size_t p = 0; p < known; ++p)
        if (u_hat[p] == NullableBit::Null)
            throw std::invalid_argument("decode: null in a non-tail position within the used prefix");
    for (std::size_t p = known; p < k; ++p)
        if (u_hat[p] != NullableBit::Null) throw std::invalid_argument("decode: non-null bit inside the punctured tail");

    std::vector<double> frac(m.rows(), detail::fraction_base());
    for (std::size_t p = 0; p < std::min(prefix, known); ++p) {
        const auto& a = m.alloc_order[p];
        frac[a.coeff] += detail::fraction_shift(a.significance, u_hat[p] == NullableBit::One ? Bit{1} : Bit{0});
    }
    std::vector<double> out = m.mean;
    for (std::size_t j = 0; j < m.rows(); ++j) {
        const double c = m.coeff_lo[j] + frac[j] * (m.coeff_hi[j] - m.coeff_lo[j]);
        const auto& row = m.basis[j];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * row[i];
    }
    for (auto& x : out) x = std::clamp(x, 0.0, 1.0);
    return out;
}

// Noiseless encode -> puncture L -> null-pad -> decode; the codec-side view
// of one rate point.
inline std::vector<double> roundtrip_at(const LadderCodecModel& m, std::span<const double> s, std::size_t l_punct) {
    const BitVec u = encode(m, s);
    NullableVec u_hat(u.size());
    for (std::size_t i = 0; i + l_punct < u.size(); ++i) u_hat[i] = to_nullable(u[i]);
    for (std::size_t i = u.size() - l_punct; i < u.size(); ++i) u_hat[i] = NullableBit::Null;
    return decode(m, u_hat, l_punct);
}

// Mean distortion at every breakpoint-induced puncturing length (noiseless
// bit pipe), largest L first: the empirical d[L] vector.
inline DistortionReport distortion_profile(const LadderCodecModel& m,
                                           const std::vector<std::vector<double>>& images) {
    if (images.empty()) throw std::invalid_argument("distortion_profile: no images");
    DistortionReport r;
    for (const auto c : m.profile.breakpoints) r.l_values.push_back(m.profile.k_coded - c);
    std::sort(r.l_values.begin(), r.l_values.end(), std::greater<>());
    for (const std::size_t l : r.l_values) {
        std::vector<double> frame_mse;
        frame_mse.reserve(images.size());
        double acc = 0.0;
        for (const auto& img : images) {
            const double d = mse(img, roundtrip_at(m, img, l));
            frame_mse.push_back(d);
            acc += d;
        }
        r.mean_distortion.push_back(acc / static_cast<double>(images.size()));
        r.per_frame.push_back(std::move(frame_mse));
    }
    return r;
}

// ---- serialization ---------------------------------------------------------

namespace detail {

inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = crc32_table()[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::invalid_argument("model file truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_model(const LadderCodecModel& m) {
    std::vector<std::uint8_t> out;
    out.reserve(64 + m.mean.size() * 8 + m.rows() * (m.mean.size() + 3) * 8 + m.alloc_order.size() * 6);
    out.insert(out.end(), {'R', 'L', 'J', 'C'});
    detail::put<std::uint16_t>(out, 1);  // version
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.profile.n_source));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.profile.k_coded));
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(m.profile.n_stages()));
    for (auto c : m.profile.breakpoints) detail::put<std::uint32_t>(out, c);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    for (double v : m.mean) detail::put<double>(out, v);
    for (const auto& row : m.basis)
        for (double v : row) detail::put<double>(out, v);
    for (double v : m.coeff_lo) detail::put<double>(out, v);
    for (double v : m.coeff_hi) detail::put<double>(out, v);
    for (double v : m.variances) detail::put<double>(out, v);
    for (const auto& a : m.alloc_order) {
        detail::put<std::uint32_t>(out, a.coeff);
        detail::put<std::uint16_t>(out, a.significance);
    }
    detail::put<std::uint32_t>(out, detail::crc32(out.data(), out.size()));
    return out;
}

inline LadderCodecModel deserialize_model(const std::vector<std::uint8_t>& in) {
    if (in.size() < 20 || in[0] != 'R' || in[1] != 'L' || in[2] != 'J' || in[3] != 'C')
        throw std::invalid_argument("model file: bad magic");
    const std::uint32_t stored_crc = [&] {
        std::size_t pos = in.size() - 4;
        return detail::take<std::uint32_t>(in, pos);
    }();
    if (detail::crc32(in.data(), in.size() - 4) != stored_crc)
        throw std::invalid_argument("model file: CRC mismatch");
    std::size_t pos = 4;
    const auto version = detail::take<std::uint16_t>(in, pos);
    if (version != 1) throw std::invalid_argument("model file: unsupported version");
    LadderCodecModel m;
    m.profile.n_source = detail::take<std::uint32_t>(in, pos);
    m.profile.k_coded = detail::take<std::uint32_t>(in, pos);
    const auto stages = detail::take<std::uint16_t>(in, pos);
    m.profile.breakpoints.resize(stages);
    for (auto& c : m.profile.breakpoints) c = detail::take<std::uint32_t>(in, pos);
    m.profile.validate();
    const auto rows = detail::take<std::uint32_t>(in, pos);
    m.mean.resize(m.profile.n_source);
    for (auto& v : m.mean) v = detail::take<double>(in, pos);
    m.basis.assign(rows, std::vector<double>(m.profile.n_source));
    for (auto& row : m.basis)
        for (auto& v : row) v = detail::take<double>(in, pos);
    m.coeff_lo.resize(rows);
    m.coeff_hi.resize(rows);
    m.variances.resize(rows);
    for (auto& v : m.coeff_lo) v = detail::take<double>(in, pos);
    for (auto& v : m.coeff_hi) v = detail::take<double>(in, pos);
    for (auto& v : m.variances) v = detail::take<double>(in, pos);
    m.alloc_order.resize(m.profile.k_coded);
    m.depth.assign(rows, 0);
    for (auto& a : m.alloc_order) {
        a.coeff = detail::take<std::uint32_t>(in, pos);
        a.significance = detail::take<std::uint16_t>(in, pos);
        if (a.coeff >= rows || a.significance >= kMaxQuantBits)
            throw std::invalid_argument("model file: bad allocation entry");
        m.depth[a.coeff] = std::max(m.depth[a.coeff], static_cast<std::uint16_t>(a.significance + 1));
    }
    if (pos != in.size() - 4) throw std::invalid_argument("model file: trailing bytes");
    return m;
}

inline void save_model(const LadderCodecModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    const auto bytes = serialize_model(m);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline LadderCodecModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>{});
    return deserialize_model(bytes);
}

}  // namespace svbsc
