#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "svbsc/config.hpp"
#include "svbsc/report.hpp"
#include "svbsc/sweep.hpp"

namespace svbsc::cli {

inline unsigned threads_from(std::optional<unsigned> flag) {
    if (flag) return resolve_threads(*flag);
    if (const char* env = std::getenv("SVBSC_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return resolve_threads(0);
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline int run_calibrate(const ExperimentConfig& cfg, const std::string& out_path, unsigned threads,
                         std::ostream& out) {
    const ConstellationSet set;
    const BerMap map = calibrate(set, cfg.calib_snr_db, cfg.calib_bits_per_point, cfg.seed, threads);
    const std::string path = out_path.empty() ? cfg.bermap_path : out_path;
    save_csv(map, path);
    out << "bermap written to " << path << " (" << map.orders.size() << " orders x " << map.snr_db.size()
        << " snr points, " << map.bits_per_point << " bits/point)\n";
    out << "snr thresholds for q0 = " << cfg.q0 << ":\n";
    for (int m : map.orders)
        out << "  M=" << m << "  " << snr_threshold(map, cfg.q0, m) << " dB\n";
    return 0;
}

inline int run_train(const ExperimentConfig& cfg, const std::string& out_path, std::ostream& out) {
    const SampleSet data = cfg.make_dataset();
    if (data.train_idx.empty()) throw std::invalid_argument("train: dataset.train split is empty");
    const auto train_vectors = gather(data, data.train_idx);
    const CodecProfile profile = cfg.profile();
    const LadderCodecModel model = cfg.codec_variant == CodecVariant::Ladder
                                       ? train_ladder(train_vectors, profile, cfg.flip_q)
                                       : train_baseline(train_vectors, profile, cfg.flip_q);
    const std::string path = out_path.empty() ? cfg.model_path : out_path;
    save_model(model, path);
    out << "model written to " << path << " (N=" << profile.n_source << ", K=" << profile.k_coded
        << ", F=" << profile.n_stages() << ", coefficients=" << model.rows() << ")\n";
    out << "per-stage bit counts:\n";
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i < profile.breakpoints.size(); ++i) {
        out << "  stage " << i + 1 << ": C=" << profile.breakpoints[i] << " (+" << profile.breakpoints[i] - prev
            << " bits)\n";
        prev = profile.breakpoints[i];
    }
    return 0;
}

inline int run_simulate(const ExperimentConfig& cfg, const std::string& out_path, unsigned threads,
                        std::ostream& out) {
    const std::string csv = simulate_to_csv(cfg, threads);
    const std::string path = out_path.empty() ? cfg.output_results : out_path;
    write_text_file(path, csv);
    out << "results written to " << path << " (config hash " << cfg.hash_hex() << ")\n";
    return 0;
}

inline int run_report(const std::vector<std::string>& files, const std::string& out_prefix, double q0,
                      bool check, bool force, std::ostream& out) {
    std::vector<ReportInput> inputs;
    for (const auto& f : files) {
        ReportInput in;
        in.label = f.substr(f.find_last_of('/') + 1);
        in.rows = load_results_csv(f);
        inputs.push_back(std::move(in));
    }
    enforce_single_hash(inputs, force);
    std::vector<CheckResult> checks;
    const ReportFiles rendered = render_report(inputs, q0, check, &checks);
    write_text_file(out_prefix + "_ber.svg", rendered.ber_svg);
    write_text_file(out_prefix + "_se.svg", rendered.se_svg);
    write_text_file(out_prefix + "_psnr.svg", rendered.psnr_svg);
    write_text_file(out_prefix + "_summary.txt", rendered.summary);
    out << rendered.summary;
    out << "charts written to " << out_prefix << "_{ber,se,psnr}.svg\n";
    if (check)
        for (const auto& c : checks)
            if (!c.pass) return 2;
    return 0;
}

// Shared CLI body so tests can drive exit codes in-process.
inline int main_impl(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SVBSC link simulator: rate-adaptive BER-stabilized link with a rateless ladder codec"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<unsigned> threads_flag;
    std::string out_path;
    bool force = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* copt = sub->add_option("--config", config_path, "experiment config file");
        if (needs_config) copt->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--threads", threads_flag, "worker threads (env SVBSC_THREADS, then hardware)");
        sub->add_option("--out", out_path, "override the output path");
    };

    auto* cal = app.add_subcommand("calibrate", "Monte Carlo BER map calibration");
    add_common(cal, true);
    auto* trn = app.add_subcommand("train", "train the ladder (or baseline) codec");
    add_common(trn, true);
    auto* sim = app.add_subcommand("simulate", "run the configured SNR sweep");
    add_common(sim, true);

    auto* rep = app.add_subcommand("report", "render SVG charts and a summary from results CSVs");
    std::vector<std::string> report_files;
    double report_q0 = 0.05;
    bool report_check = false;
    rep->add_option("files", report_files, "results CSV files")->required()->expected(-1);
    rep->add_option("--out", out_path, "output prefix (default: report)");
    rep->add_option("--q0", report_q0, "target flip ratio used by --check");
    rep->add_flag("--check", report_check, "evaluate sweep-shaped acceptance checks; exit 2 on failure");
    rep->add_flag("--force", force, "allow overlaying results with different config hashes");

    try {
        std::vector<const char*> argv;
        argv.push_back("svbsc");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        const unsigned threads = threads_from(threads_flag);
        if (rep->parsed())
            return run_report(report_files, out_path.empty() ? "report" : out_path, report_q0, report_check, force, out);
        ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
        if (seed_override) cfg.seed = *seed_override;
        cfg.validate();
        if (cal->parsed()) return run_calibrate(cfg, out_path, threads, out);
        if (trn->parsed()) return run_train(cfg, out_path, out);
        if (sim->parsed()) return run_simulate(cfg, out_path, threads, out);
        err << "usage error: no subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace svbsc::cli
