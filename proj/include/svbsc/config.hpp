#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svbsc/ber_map.hpp"
#include "svbsc/channel.hpp"
#include "svbsc/codec.hpp"
#include "svbsc/dataset.hpp"
#include "svbsc/metrics.hpp"
#include "svbsc/modem.hpp"

namespace svbsc {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double to_double(const std::string& s) {
    double v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("config: malformed number '" + s + "'");
    return v;
}

// "a,b,c" or "lo:hi:step" (inclusive ends)
inline std::vector<double> parse_number_list(const std::string& text) {
    if (text.find(':') != std::string::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("config: range must be lo:hi:step, got '" + text + "'");
        const double lo = to_double(parts[0]), hi = to_double(parts[1]), step = to_double(parts[2]);
        if (!(step > 0.0) || hi < lo) throw std::invalid_argument("config: bad range '" + text + "'");
        std::vector<double> out;
        for (double v = lo; v <= hi + step * 1e-9; v += step) out.push_back(v);
        return out;
    }
    std::vector<double> out;
    for (const auto& tok : split(text, ','))
        if (!tok.empty()) out.push_back(to_double(tok));
    if (out.empty()) throw std::invalid_argument("config: empty number list");
    return out;
}

}  // namespace detail

enum class CsiSelection { Perfect, Imperfect, Both };
enum class CodecVariant { Ladder, Baseline };
enum class DatasetKind { Synthetic, Cifar10 };

struct ExperimentConfig {
    std::uint64_t seed = 1;

    double k_factor_db = 20.0;
    int n_pilots = 10;
    CsiSelection csi_mode = CsiSelection::Both;

    std::size_t channel_uses = 128;
    double noise_psd = 1.0;
    double power_limit = 128.0;

    double q0 = 0.05;
    std::vector<double> epsilons = {0.01, 0.05, 0.1};
    std::size_t l_max = 1152;
    std::optional<double> l_avg_cap;

    std::vector<double> sweep_snr_db;        // default set in normalize()
    std::size_t sweep_frames = 2000;
    std::size_t cdf_samples = 12000;

    std::vector<double> calib_snr_db;        // default set in normalize()
    std::size_t calib_bits_per_point = 1000000;

    std::string codec_preset = "code3";      // code1|code2|code3|"" (explicit breakpoints)
    std::vector<std::uint32_t> codec_breakpoints;
    CodecVariant codec_variant = CodecVariant::Ladder;
    std::string model_path = "model.rljc";
    double flip_q = 0.0;

    std::string bermap_path = "bermap.csv";

    DatasetKind dataset_kind = DatasetKind::Synthetic;
    std::string dataset_path;
    std::size_t dataset_count = 4000;
    std::size_t dataset_n_source = 256;
    std::string dataset_variances = "geometric:0.08,0.94,192";
    std::uint64_t dataset_seed = 7;
    std::size_t dataset_train = 3000;
    std::size_t dataset_val = 400;
    std::size_t dataset_test = 500;

    std::string output_results = "results.csv";
    std::string output_report_prefix = "report";

    // ---- derived views ----

    LinkBudget budget() const { return LinkBudget{power_limit, channel_uses, noise_psd}; }

    // sweep points pin the nominal snr by scaling the power budget; with a
    // noiseless PSD the snr is infinite already and the power stays put
    LinkBudget budget_at_snr_db(double snr_db) const {
        LinkBudget b = budget();
        if (noise_psd > 0.0) b.power_limit = db_to_linear(snr_db) * noise_psd * static_cast<double>(channel_uses);
        return b;
    }

    RicianModel rician() const { return RicianModel{k_factor_db, n_pilots, 1.0}; }

    StabilityTarget target(double eps) const { return StabilityTarget{q0, eps, l_max, l_avg_cap}; }

    CodecProfile profile() const {
        CodecProfile p;
        p.n_source = dataset_n_source;
        const std::size_t max_bps = static_cast<std::size_t>(bits_per_symbol(kModulationOrders.back()));
        p.k_coded = channel_uses * max_bps;
        if (!codec_breakpoints.empty()) {
            p.breakpoints = codec_breakpoints;
        } else if (codec_preset == "code1") {
            p.breakpoints = {static_cast<std::uint32_t>(p.k_coded)};
        } else if (codec_preset == "code2") {
            p.breakpoints = {static_cast<std::uint32_t>(p.k_coded / 2), static_cast<std::uint32_t>(p.k_coded)};
        } else if (codec_preset == "code3") {
            for (std::size_t b = 1; b <= max_bps; ++b)
                p.breakpoints.push_back(static_cast<std::uint32_t>(channel_uses * b));
        } else {
            throw std::invalid_argument("config: unknown codec.preset '" + codec_preset + "'");
        }
        p.validate();
        return p;
    }

    std::vector<double> variance_profile() const {
        const std::string g = "geometric:";
        if (dataset_variances.rfind(g, 0) == 0) {
            const auto parts = detail::split(dataset_variances.substr(g.size()), ',');
            if (parts.size() != 3) throw std::invalid_argument("config: geometric profile needs a,r,count");
            const double a = detail::to_double(parts[0]);
            const double r = detail::to_double(parts[1]);
            const std::size_t count = static_cast<std::size_t>(detail::to_double(parts[2]));
            std::vector<double> out(count);
            double v = a;
            for (auto& x : out) {
                x = v;
                v *= r;
            }
            return out;
        }
        return detail::parse_number_list(dataset_variances);
    }

    SampleSet make_dataset() const {
        SampleSet set;
        if (dataset_kind == DatasetKind::Synthetic) {
            set = synth_gaussian(dataset_count, dataset_n_source, variance_profile(), dataset_seed);
        } else {
            set = load_cifar10(dataset_path);
            if (set.n_source != dataset_n_source)
                throw std::invalid_argument("config: dataset.n_source does not match loaded data");
        }
        assign_splits(set, dataset_train, dataset_val, dataset_test, dataset_seed);
        return set;
    }

    std::vector<CsiMode> csi_modes() const {
        switch (csi_mode) {
            case CsiSelection::Perfect: return {CsiMode::Perfect};
            case CsiSelection::Imperfect: return {CsiMode::Imperfect};
            default: return {CsiMode::Perfect, CsiMode::Imperfect};
        }
    }

    // ---- parsing / canonical form ----

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
    std::string canonical() const;
    std::string hash_hex() const;
    void validate() const;
};

namespace detail {
inline std::string csv_join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}
}  // namespace detail

inline void ExperimentConfig::validate() const {
    rician().validate();
    budget().validate();
    if (!(q0 > 0.0 && q0 < 0.5)) throw std::invalid_argument("config: target.q0 must be in (0,0.5)");
    for (double e : epsilons)
        if (!(e >= 0.0 && e < 1.0)) throw std::invalid_argument("config: target.epsilon values must be in [0,1)");
    if (epsilons.empty()) throw std::invalid_argument("config: target.epsilon list is empty");
    if (sweep_frames == 0) throw std::invalid_argument("config: sweep.frames must be positive");
    if (sweep_snr_db.empty()) throw std::invalid_argument("config: sweep.snr_db is empty");
    if (calib_snr_db.size() < 2) throw std::invalid_argument("config: calibrate.snr_db needs >= 2 points");
    profile();  // throws on inconsistency
    if (dataset_kind == DatasetKind::Cifar10 && dataset_path.empty())
        throw std::invalid_argument("config: dataset.path required for cifar10");
    if (l_max >= profile().k_coded) throw std::invalid_argument("config: target.l_max must be below K");
}

inline ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    c.sweep_snr_db = detail::parse_number_list("-5:30:1");
    c.calib_snr_db = detail::parse_number_list("-10:40:0.5");
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string val = detail::trim(t.substr(eq + 1));
        try {
            if (key == "seed") c.seed = std::stoull(val);
            else if (key == "channel.k_factor_db") c.k_factor_db = detail::to_double(val);
            else if (key == "channel.n_pilots") c.n_pilots = std::stoi(val);
            else if (key == "channel.csi_mode") {
                if (val == "perfect") c.csi_mode = CsiSelection::Perfect;
                else if (val == "imperfect") c.csi_mode = CsiSelection::Imperfect;
                else if (val == "both") c.csi_mode = CsiSelection::Both;
                else throw std::invalid_argument("csi_mode must be perfect|imperfect|both");
            }
            else if (key == "budget.channel_uses") c.channel_uses = std::stoul(val);
            else if (key == "budget.noise_psd") c.noise_psd = detail::to_double(val);
            else if (key == "budget.power_limit") c.power_limit = detail::to_double(val);
            else if (key == "target.q0") c.q0 = detail::to_double(val);
            else if (key == "target.epsilon") c.epsilons = detail::parse_number_list(val);
            else if (key == "target.l_max") c.l_max = std::stoul(val);
            else if (key == "target.l_avg_cap") c.l_avg_cap = val.empty() ? std::nullopt : std::optional<double>(detail::to_double(val));
            else if (key == "sweep.snr_db") c.sweep_snr_db = detail::parse_number_list(val);
            else if (key == "sweep.frames") c.sweep_frames = std::stoul(val);
            else if (key == "sweep.cdf_samples") c.cdf_samples = std::stoul(val);
            else if (key == "calibrate.snr_db") c.calib_snr_db = detail::parse_number_list(val);
            else if (key == "calibrate.bits_per_point") c.calib_bits_per_point = std::stoul(val);
            else if (key == "codec.preset") c.codec_preset = val;
            else if (key == "codec.breakpoints") {
                c.codec_breakpoints.clear();
                for (double v : detail::parse_number_list(val))
                    c.codec_breakpoints.push_back(static_cast<std::uint32_t>(v));
            }
            else if (key == "codec.variant") {
                if (val == "ladder") c.codec_variant = CodecVariant::Ladder;
                else if (val == "baseline") c.codec_variant = CodecVariant::Baseline;
                else throw std::invalid_argument("codec.variant must be ladder|baseline");
            }
            else if (key == "codec.model_path") c.model_path = val;
            else if (key == "codec.flip_q") c.flip_q = detail::to_double(val);
            else if (key == "bermap.path") c.bermap_path = val;
            else if (key == "dataset.kind") {
                if (val == "synthetic") c.dataset_kind = DatasetKind::Synthetic;
                else if (val == "cifar10") c.dataset_kind = DatasetKind::Cifar10;
                else throw std::invalid_argument("dataset.kind must be synthetic|cifar10");
            }
            else if (key == "dataset.path") c.dataset_path = val;
            else if (key == "dataset.count") c.dataset_count = std::stoul(val);
            else if (key == "dataset.n_source") c.dataset_n_source = std::stoul(val);
            else if (key == "dataset.variances") c.dataset_variances = val;
            else if (key == "dataset.seed") c.dataset_seed = std::stoull(val);
            else if (key == "dataset.train") c.dataset_train = std::stoul(val);
            else if (key == "dataset.val") c.dataset_val = std::stoul(val);
            else if (key == "dataset.test") c.dataset_test = std::stoul(val);
            else if (key == "output.results") c.output_results = val;
            else if (key == "output.report_prefix") c.output_report_prefix = val;
            else throw std::invalid_argument("unknown key");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + " ('" + key + "'): " + e.what());
        }
    }
    return c;
}

inline ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

inline std::string ExperimentConfig::canonical() const {
    std::string out;
    out += "bermap.path = " + bermap_path + "\n";
    out += "budget.channel_uses = " + std::to_string(channel_uses) + "\n";
    out += "budget.noise_psd = " + detail::format_double(noise_psd) + "\n";
    out += "budget.power_limit = " + detail::format_double(power_limit) + "\n";
    out += "calibrate.bits_per_point = " + std::to_string(calib_bits_per_point) + "\n";
    out += "calibrate.snr_db = " + detail::csv_join_doubles(calib_snr_db) + "\n";
    out += "channel.csi_mode = " + std::string(csi_mode == CsiSelection::Perfect ? "perfect"
                                              : csi_mode == CsiSelection::Imperfect ? "imperfect" : "both") + "\n";
    out += "channel.k_factor_db = " + detail::format_double(k_factor_db) + "\n";
    out += "channel.n_pilots = " + std::to_string(n_pilots) + "\n";
    out += "codec.breakpoints = ";
    for (std::size_t i = 0; i < codec_breakpoints.size(); ++i)
        out += (i ? "," : "") + std::to_string(codec_breakpoints[i]);
    out += "\n";
    out += "codec.flip_q = " + detail::format_double(flip_q) + "\n";
    out += "codec.model_path = " + model_path + "\n";
    out += "codec.preset = " + codec_preset + "\n";
    out += "codec.variant = " + std::string(codec_variant == CodecVariant::Ladder ? "ladder" : "baseline") + "\n";
    out += "dataset.count = " + std::to_string(dataset_count) + "\n";
    out += "dataset.kind = " + std::string(dataset_kind == DatasetKind::Synthetic ? "synthetic" : "cifar10") + "\n";
    out += "dataset.n_source = " + std::to_string(dataset_n_source) + "\n";
    out += "dataset.path = " + dataset_path + "\n";
    out += "dataset.seed = " + std::to_string(dataset_seed) + "\n";
    out += "dataset.test = " + std::to_string(dataset_test) + "\n";
    out += "dataset.train = " + std::to_string(dataset_train) + "\n";
    out += "dataset.val = " + std::to_string(dataset_val) + "\n";
    out += "dataset.variances = " + dataset_variances + "\n";
    out += "output.report_prefix = " + output_report_prefix + "\n";
    out += "output.results = " + output_results + "\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "sweep.cdf_samples = " + std::to_string(cdf_samples) + "\n";
    out += "sweep.frames = " + std::to_string(sweep_frames) + "\n";
    out += "sweep.snr_db = " + detail::csv_join_doubles(sweep_snr_db) + "\n";
    out += "target.epsilon = " + detail::csv_join_doubles(epsilons) + "\n";
    out += "target.l_avg_cap = " + (l_avg_cap ? detail::format_double(*l_avg_cap) : std::string()) + "\n";
    out += "target.l_max = " + std::to_string(l_max) + "\n";
    out += "target.q0 = " + detail::format_double(q0) + "\n";
    return out;
}

inline std::string ExperimentConfig::hash_hex() const {
    const std::string c = canonical();
    const std::uint32_t h = detail::crc32(reinterpret_cast<const std::uint8_t*>(c.data()), c.size());
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", h);
    return std::string(buf, 8);
}

}  // namespace svbsc
