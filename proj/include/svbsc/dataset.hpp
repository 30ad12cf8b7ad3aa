#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "svbsc/rng.hpp"

namespace svbsc {

struct SampleSet {
    std::size_t n_source = 0;
    std::vector<std::vector<double>> vectors;  // each length n_source, values in [0,1]
    std::string provenance;
    std::vector<std::size_t> train_idx, val_idx, test_idx;
};

// Disjoint shuffled splits; sizes must not exceed the sample count.
inline void assign_splits(SampleSet& set, std::size_t n_train, std::size_t n_val, std::size_t n_test,
                          std::uint64_t seed) {
    if (n_train + n_val + n_test > set.vectors.size())
        throw std::invalid_argument("assign_splits: split sizes exceed dataset size");
    std::vector<std::size_t> idx(set.vectors.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, 0x5b115, 0));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    set.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    set.val_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                       idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    set.test_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val + n_test));
}

inline std::vector<std::vector<double>> gather(const SampleSet& set, const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(set.vectors.at(i));
    return out;
}

namespace detail {
inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}
}  // namespace detail

// CIFAR-10 binary batch: records of 1 label byte (discarded) + 3072 pixel
// bytes, channel-major; pixels scaled by 1/255.
inline SampleSet load_cifar10(const std::string& path) {
    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPixels = 3072;
    const auto bytes = detail::read_file(path);
    if (bytes.empty()) throw std::invalid_argument("load_cifar10: empty file " + path);
    if (bytes.size() % kRecord != 0)
        throw std::invalid_argument("load_cifar10: file length not a multiple of 3073: " + path);
    SampleSet set;
    set.n_source = kPixels;
    set.provenance = "cifar10:" + path;
    const std::size_t records = bytes.size() / kRecord;
    set.vectors.reserve(records);
    for (std::size_t r = 0; r < records; ++r) {
        std::vector<double> v(kPixels);
        const std::uint8_t* p = bytes.data() + r * kRecord + 1;
        for (std::size_t i = 0; i < kPixels; ++i) v[i] = static_cast<double>(p[i]) / 255.0;
        set.vectors.push_back(std::move(v));
    }
    return set;
}

namespace detail {
inline std::size_t pnm_token(const std::vector<std::uint8_t>& b, std::size_t pos, std::string& tok) {
    // tokens separated by whitespace; '#' starts a comment through end of line
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    tok.clear();
    while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
    if (tok.empty()) throw std::invalid_argument("pnm: truncated header");
    return pos;
}
}  // namespace detail

// Binary PGM (P5) or PPM (P6), maxval 255. PPM output is flattened
// channel-major so one codec layout serves both this and CIFAR-10.
inline std::vector<double> load_pnm(const std::string& path) {
    const auto bytes = detail::read_file(path);
    std::string tok;
    std::size_t pos = detail::pnm_token(bytes, 0, tok);
    const bool color = tok == "P6";
    if (tok != "P5" && tok != "P6") throw std::invalid_argument("load_pnm: unsupported magic '" + tok + "'");
    pos = detail::pnm_token(bytes, pos, tok);
    const std::size_t width = std::stoul(tok);
    pos = detail::pnm_token(bytes, pos, tok);
    const std::size_t height = std::stoul(tok);
    pos = detail::pnm_token(bytes, pos, tok);
    if (tok != "255") throw std::invalid_argument("load_pnm: only maxval 255 supported");
    ++pos;  // single whitespace byte after maxval
    const std::size_t channels = color ? 3 : 1;
    const std::size_t payload = width * height * channels;
    if (width == 0 || height == 0) throw std::invalid_argument("load_pnm: zero dimensions");
    if (pos + payload > bytes.size()) throw std::invalid_argument("load_pnm: truncated payload in " + path);
    std::vector<double> v(payload);
    const std::size_t wh = width * height;
    for (std::size_t i = 0; i < wh; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            v[c * wh + i] = static_cast<double>(bytes[pos + i * channels + c]) / 255.0;
    return v;
}

inline void save_pnm(const std::string& path, const std::vector<double>& v, std::size_t width,
                     std::size_t height, std::size_t channels) {
    if (channels != 1 && channels != 3) throw std::invalid_argument("save_pnm: channels must be 1 or 3");
    const std::size_t wh = width * height;
    if (v.size() != wh * channels) throw std::invalid_argument("save_pnm: size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << (channels == 3 ? "P6" : "P5") << "\n" << width << " " << height << "\n255\n";
    std::vector<std::uint8_t> payload(v.size());
    for (std::size_t i = 0; i < wh; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            const double x = std::clamp(v[c * wh + i], 0.0, 1.0);
            payload[i * channels + c] = static_cast<std::uint8_t>(std::lround(x * 255.0));
        }
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

// Synthetic source with documented covariance: coordinate j of each sample is
// clip(0.5 + sqrt(lambda_j) * z_j); coordinates beyond the profile stay 0.5.
inline SampleSet synth_gaussian(std::size_t count, std::size_t n_source,
                                const std::vector<double>& variance_profile, std::uint64_t seed) {
    if (variance_profile.size() > n_source)
        throw std::invalid_argument("synth_gaussian: variance profile longer than n_source");
    for (double l : variance_profile)
        if (l < 0.0) throw std::invalid_argument("synth_gaussian: negative variance");
    SampleSet set;
    set.n_source = n_source;
    set.provenance = "synthetic";
    set.vectors.reserve(count);
    std::vector<double> sigma(variance_profile.size());
    for (std::size_t j = 0; j < sigma.size(); ++j) sigma[j] = std::sqrt(variance_profile[j]);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, 0x5f4e7, i));
        std::vector<double> v(n_source, 0.5);
        for (std::size_t j = 0; j < sigma.size(); ++j)
            v[j] = std::clamp(0.5 + sigma[j] * rng.normal(), 0.0, 1.0);
        set.vectors.push_back(std::move(v));
    }
    return set;
}

}  // namespace svbsc
