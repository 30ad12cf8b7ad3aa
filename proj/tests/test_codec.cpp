#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "svbsc/codec.hpp"
#include "svbsc/dataset.hpp"
#include "svbsc/metrics.hpp"

using namespace svbsc;

namespace {

CodecProfile small_profile() {
    CodecProfile p;
    p.n_source = 8;
    p.k_coded = 16;
    p.breakpoints = {4, 8, 16};
    return p;
}

const std::vector<double> kSmallVariances = {0.01, 0.0064, 0.004, 0.0025};

std::vector<std::vector<double>> small_training_data() {
    return synth_gaussian(3000, 8, kSmallVariances, 123).vectors;
}

NullableVec with_tail_nulls(const BitVec& u, std::size_t l) {
    NullableVec v(u.size());
    for (std::size_t i = 0; i + l < u.size(); ++i) v[i] = to_nullable(u[i]);
    for (std::size_t i = u.size() - l; i < u.size(); ++i) v[i] = NullableBit::Null;
    return v;
}

}  // namespace

TEST_CASE("greedy allocation: equal weights round-robin the significance levels") {
    const auto order = greedy_allocation({0.5, 0.5, 0.5, 0.5}, 8);
    for (std::size_t t = 0; t < 8; ++t) {
        CHECK(order[t].coeff == t % 4);
        CHECK(order[t].significance == t / 4);
    }
    std::array<int, 4> counts{};
    for (const auto& a : order) counts[a.coeff]++;
    for (int c : counts) CHECK(c == 2);
}

TEST_CASE("greedy allocation: a dominant coefficient takes bits until its proxy drops") {
    // 1.0 * 4^-b stays above 0.001 through b = 4, so five bits go to j=0 first
    const auto order = greedy_allocation({1.0, 0.001}, 6);
    for (std::size_t t = 0; t < 5; ++t) CHECK(order[t].coeff == 0);
    CHECK(order[5].coeff == 1);
}

TEST_CASE("greedy allocation: the hand-checked (0.01, 0.0025) case") {
    // step 2 is a tie (0.01/4 == 0.0025) broken toward the lower index
    const auto order = greedy_allocation({0.01, 0.0025}, 3);
    CHECK(order[0].coeff == 0);
    CHECK(order[0].significance == 0);
    CHECK(order[1].coeff == 0);
    CHECK(order[1].significance == 1);
    CHECK(order[2].coeff == 1);
    CHECK(order[2].significance == 0);

    const auto longer = greedy_allocation({0.01, 0.0025}, 16);
    int c0 = 0, c1 = 0;
    for (const auto& a : longer) (a.coeff == 0 ? c0 : c1)++;
    CHECK(c0 >= c1);
}

TEST_CASE("greedy allocation: flip-aware proxy leaves the order unchanged") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> lambdas(2 + rng.below(6));
        for (auto& l : lambdas) l = 1e-4 + rng.uniform01() * 0.05;
        const std::size_t k = 1 + rng.below(24);
        const auto a = greedy_allocation(lambdas, k, 0.0);
        const auto b = greedy_allocation(lambdas, k, 0.1);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].coeff == b[i].coeff);
            CHECK(a[i].significance == b[i].significance);
        }
    }
}

TEST_CASE("greedy allocation: capacity and argument errors") {
    CHECK_THROWS_AS(greedy_allocation({0.5}, 33), std::invalid_argument);  // one coeff caps at 32 bits
    CHECK_THROWS_AS(greedy_allocation({0.5, 0.1}, 4, 0.3), std::invalid_argument);
}

TEST_CASE("training recovers a known diagonal covariance") {
    const auto data = small_training_data();
    const auto model = train_ladder(data, small_profile());
    REQUIRE(model.rows() == 4);  // zero-variance coordinates drop out
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(model.variances[j] - kSmallVariances[j]) / kSmallVariances[j] < 0.10);
        // principal directions match the canonical axes up to sign
        double peak = 0.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < 8; ++i)
            if (std::abs(model.basis[j][i]) > peak) {
                peak = std::abs(model.basis[j][i]);
                arg = i;
            }
        CHECK(arg == j);
        CHECK(peak > 0.95);
    }
    // orthonormal rows
    for (std::size_t a = 0; a < model.rows(); ++a)
        for (std::size_t b = 0; b < model.rows(); ++b) {
            const double dot = std::inner_product(model.basis[a].begin(), model.basis[a].end(),
                                                  model.basis[b].begin(), 0.0);
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-9);
        }
}

TEST_CASE("training validates its inputs") {
    CodecProfile p = small_profile();
    CHECK_THROWS_AS(train_ladder({}, p), std::invalid_argument);
    const std::vector<std::vector<double>> constant(100, std::vector<double>(8, 0.5));
    CHECK_THROWS_AS(train_ladder(constant, p), std::invalid_argument);  // degenerate
    std::vector<std::vector<double>> bad(100, std::vector<double>(8, 0.5));
    bad[3][2] = 1.5;
    CHECK_THROWS_AS(train_ladder(bad, p), std::invalid_argument);  // outside [0,1]
    const auto tiny = synth_gaussian(20, 8, kSmallVariances, 5).vectors;
    CHECK_THROWS_AS(train_ladder(tiny, p), std::invalid_argument);  // < 10 samples per used coeff
    std::vector<std::vector<double>> wrong_dim(100, std::vector<double>(7, 0.5));
    CHECK_THROWS_AS(train_ladder(wrong_dim, p), std::invalid_argument);
}

TEST_CASE("encoding the mean gives the midpoint code 10...0 per coefficient") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const BitVec bits = encode(model, model.mean);
    for (std::size_t pos = 0; pos < bits.size(); ++pos)
        CHECK(bits[pos] == (model.alloc_order[pos].significance == 0 ? 1 : 0));
}

TEST_CASE("prefix consistency: truncated profiles emit identical leading bits") {
    const auto data = small_training_data();
    const auto full = train_ladder(data, small_profile());
    CodecProfile trunc;
    trunc.n_source = 8;
    trunc.k_coded = 8;
    trunc.breakpoints = {4, 8};
    const auto shorter = train_ladder(data, trunc);
    const auto holdout = synth_gaussian(1200, 8, kSmallVariances, 321).vectors;
    for (const auto& s : holdout) {
        const BitVec a = encode(full, s);
        const BitVec b = encode(shorter, s);
        REQUIRE(b.size() == 8);
        bool equal = true;
        for (std::size_t i = 0; i < 8; ++i) equal = equal && a[i] == b[i];
        CHECK(equal);
    }
}

TEST_CASE("sources differing outside the basis span encode identically") {
    const auto model = train_ladder(small_training_data(), small_profile());
    std::vector<double> s1(8, 0.5);
    s1[0] = 0.61;
    std::vector<double> s2 = s1;
    s2[6] = 0.9;  // zero-variance coordinate, not in the span
    s2[7] = 0.1;
    CHECK(encode(model, s1) == encode(model, s2));
}

TEST_CASE("select_decoder follows the argmin rule") {
    const std::vector<std::uint32_t> bp{640, 1280};
    CHECK(select_decoder(bp, 1280, 0) == 2);
    CHECK(select_decoder(bp, 1280, 640) == 1);
    CHECK(select_decoder(bp, 1280, 100) == 2);
    // pad count to reach the stage input size
    CHECK(bp[select_decoder(bp, 1280, 100) - 1] - (1280 - 100) == 100);
    CHECK_THROWS_AS(select_decoder(bp, 1280, 1281), std::out_of_range);
    CHECK_THROWS_AS(select_decoder(std::vector<std::uint32_t>{}, 1280, 0), std::invalid_argument);

    Rng rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t l = rng.below(1281);
        const std::size_t stage = select_decoder(bp, 1280, l);
        CHECK(bp[stage - 1] >= 1280 - l);
        if (stage > 1) CHECK(bp[stage - 2] < 1280 - l);
    }
}

TEST_CASE("fraction reconstruction: known-prefix midpoints") {
    using detail::reconstruct_fraction;
    CHECK(reconstruct_fraction(std::vector<NullableBit>{NullableBit::One, NullableBit::Null}) == 0.75);
    CHECK(reconstruct_fraction(std::vector<NullableBit>{NullableBit::Null, NullableBit::Null}) == 0.5);
    CHECK(reconstruct_fraction(std::vector<NullableBit>{NullableBit::One, NullableBit::Zero}) == 0.625);

    Rng rng(19);
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t depth = 1 + rng.below(10);
        const std::size_t known = rng.below(depth + 1);
        NullableVec bits(depth, NullableBit::Null);
        std::uint64_t prefix = 0;
        for (std::size_t k = 0; k < known; ++k) {
            const Bit b = rng.bit();
            bits[k] = to_nullable(b);
            prefix = (prefix << 1) | b;
        }
        const double v = reconstruct_fraction(bits);
        const double cell = std::ldexp(1.0, -static_cast<int>(known));
        const double lo = static_cast<double>(prefix) * cell;
        CHECK(v >= lo);
        CHECK(v <= lo + cell);  // inside the dyadic interval its known bits fix
    }
}

TEST_CASE("decode: all-null input reconstructs the clipped mean") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const NullableVec nulls(16, NullableBit::Null);
    const auto out = decode(model, nulls, 16);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == Catch::Approx(model.mean[i]).margin(1e-12));
}

TEST_CASE("decode: noiseless roundtrip error is at most half a quantization step") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const auto holdout = synth_gaussian(500, 8, kSmallVariances, 77).vectors;
    for (const auto& s : holdout) {
        const auto out = roundtrip_at(model, s, 0);
        for (std::size_t j = 0; j < model.rows(); ++j) {
            double c_true = 0.0, c_hat = 0.0;
            for (std::size_t i = 0; i < 8; ++i) {
                c_true += model.basis[j][i] * (s[i] - model.mean[i]);
                c_hat += model.basis[j][i] * (out[i] - model.mean[i]);
            }
            c_true = std::clamp(c_true, model.coeff_lo[j], model.coeff_hi[j]);
            const double half_step =
                0.5 * (model.coeff_hi[j] - model.coeff_lo[j]) * std::ldexp(1.0, -static_cast<int>(model.depth[j]));
            CHECK(std::abs(c_hat - c_true) <= half_step + 1e-9);
        }
    }
}

TEST_CASE("decode enforces the tail-null contract") {
    const auto model = train_ladder(small_training_data(), small_profile());
    std::vector<double> s(8, 0.5);
    s[1] = 0.62;
    const BitVec u = encode(model, s);
    NullableVec bad = with_tail_nulls(u, 4);
    bad[2] = NullableBit::Null;  // non-tail null inside the used prefix
    CHECK_THROWS_AS(decode(model, bad, 4), std::invalid_argument);
    NullableVec bad2 = with_tail_nulls(u, 4);
    bad2[14] = NullableBit::One;  // non-null inside the punctured tail
    CHECK_THROWS_AS(decode(model, bad2, 4), std::invalid_argument);
    CHECK_THROWS_AS(decode(model, with_tail_nulls(u, 0), 17), std::out_of_range);
    NullableVec short_vec(8, NullableBit::Null);
    CHECK_THROWS_AS(decode(model, short_vec, 0), std::invalid_argument);
}

TEST_CASE("mean distortion is non-increasing as puncturing shrinks") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const auto holdout = synth_gaussian(300, 8, kSmallVariances, 99).vectors;
    const DistortionReport report = distortion_profile(model, holdout);
    REQUIRE(report.l_values == std::vector<std::size_t>{12, 8, 0});  // breakpoint-induced L grid
    REQUIRE(report.per_frame.size() == 3);
    CHECK(report.per_frame[0].size() == holdout.size());
    CHECK(report.mean_distortion[1] <= report.mean_distortion[0]);
    CHECK(report.mean_distortion[2] <= report.mean_distortion[1]);
    CHECK(report.mean_distortion[2] < report.mean_distortion[0]);  // strict across the full range
}

TEST_CASE("baseline codec: shuffled emission order, same bits") {
    const auto data = small_training_data();
    const CodecProfile p = small_profile();
    const auto ladder = train_ladder(data, p);
    const auto base1 = train_baseline(data, p);
    const auto base2 = train_baseline(data, p);
    // reproducible permutation
    REQUIRE(base1.alloc_order.size() == base2.alloc_order.size());
    for (std::size_t i = 0; i < base1.alloc_order.size(); ++i) {
        CHECK(base1.alloc_order[i].coeff == base2.alloc_order[i].coeff);
        CHECK(base1.alloc_order[i].significance == base2.alloc_order[i].significance);
    }
    // same multiset of assignments, different order
    auto key = [](const BitAssignment& a) { return (static_cast<std::uint64_t>(a.coeff) << 16) | a.significance; };
    std::vector<std::uint64_t> ka, kb;
    for (const auto& a : ladder.alloc_order) ka.push_back(key(a));
    for (const auto& a : base1.alloc_order) kb.push_back(key(a));
    std::vector<std::uint64_t> sa = ka, sb = kb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    CHECK(sa == sb);
    CHECK(ka != kb);

    const auto holdout = synth_gaussian(300, 8, kSmallVariances, 55).vectors;
    // L = 0: identical reconstruction bit-exactly
    for (const auto& s : holdout) {
        const auto a = roundtrip_at(ladder, s, 0);
        const auto b = roundtrip_at(base1, s, 0);
        CHECK(a == b);
    }
    // L = l_max: the importance-ordered ladder wins on average
    const std::size_t lmax = p.l_max();
    double mse_ladder = 0.0, mse_base = 0.0;
    for (const auto& s : holdout) {
        mse_ladder += mse(s, roundtrip_at(ladder, s, lmax));
        mse_base += mse(s, roundtrip_at(base1, s, lmax));
    }
    CHECK(mse_ladder < mse_base);
}

TEST_CASE("flipping one bit moves the output by at most one quantization step") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const auto holdout = synth_gaussian(200, 8, kSmallVariances, 42).vectors;
    Rng rng(43);
    for (const auto& s : holdout) {
        const BitVec u = encode(model, s);
        const std::size_t pos = rng.below(u.size());
        BitVec flipped = u;
        flipped[pos] ^= 1;
        const auto base = decode(model, with_tail_nulls(u, 0), 0);
        const auto pert = decode(model, with_tail_nulls(flipped, 0), 0);
        const auto& a = model.alloc_order[pos];
        const double step = (model.coeff_hi[a.coeff] - model.coeff_lo[a.coeff]) *
                            std::ldexp(1.0, -(static_cast<int>(a.significance) + 1));
        const double m0 = mse(s, base), m1 = mse(s, pert);
        const double n = 8.0;
        const double bound = step * (std::sqrt(n * m0) + std::sqrt(n * m1)) / n;
        CHECK(std::abs(m1 - m0) <= bound + 1e-12);
    }
}

TEST_CASE("model serialization roundtrip is bit-exact and CRC-protected") {
    const auto model = train_ladder(small_training_data(), small_profile());
    const auto bytes = serialize_model(model);
    CHECK(bytes.size() >= 4);
    CHECK(bytes[0] == 'R');
    const auto back = deserialize_model(bytes);
    CHECK(serialize_model(back) == bytes);
    CHECK(back.basis == model.basis);  // orthonormal rows survive exactly
    CHECK(back.mean == model.mean);
    CHECK(back.coeff_lo == model.coeff_lo);
    CHECK(back.coeff_hi == model.coeff_hi);
    CHECK(back.variances == model.variances);
    CHECK(back.depth == model.depth);

    auto corrupted = bytes;
    corrupted[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(deserialize_model(corrupted), std::invalid_argument);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), std::invalid_argument);

    const std::string path = "test_model_roundtrip.rljc";
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK(serialize_model(loaded) == bytes);
    std::remove(path.c_str());
}

TEST_CASE("profile validation") {
    CodecProfile p;
    p.n_source = 8;
    p.k_coded = 16;
    p.breakpoints = {8, 8, 16};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.breakpoints = {8, 12};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // last != K
    p.breakpoints = {8, 16};
    p.validate();
    CHECK(p.l_max() == 8);
    CHECK(p.rate_hi() == 2.0);
    CHECK(p.rate_lo() == 1.0);
}
