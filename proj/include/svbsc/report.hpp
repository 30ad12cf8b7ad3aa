#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svbsc/config.hpp"
#include "svbsc/sweep.hpp"

namespace svbsc {

struct ResultRow {
    double snr_db = 0.0;
    std::string csi_mode;
    double epsilon = 0.0;
    std::string codec;
    std::size_t frames = 0;
    double mean_ber = 0.0;
    double violation_rate = 0.0;
    double mean_se = 0.0;
    double mean_psnr_db = 0.0;
    double mean_l = 0.0;
    std::size_t max_l = 0;
    double infeasible_rate = 0.0;
    std::string config_hash;
};

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("results csv: empty");
    const std::string expected =
        "snr_db,csi_mode,epsilon,codec,frames,mean_ber,violation_rate,mean_se_bpcu,mean_psnr_db,"
        "mean_L,max_L,infeasible_rate,config_hash";
    if (line != expected) throw std::invalid_argument("results csv: schema mismatch");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split(line, ',');
        if (f.size() != 13) throw std::invalid_argument("results csv: bad row '" + line + "'");
        ResultRow r;
        r.snr_db = detail::to_double(f[0]);
        r.csi_mode = f[1];
        r.epsilon = detail::to_double(f[2]);
        r.codec = f[3];
        r.frames = std::stoul(f[4]);
        r.mean_ber = detail::to_double(f[5]);
        r.violation_rate = detail::to_double(f[6]);
        r.mean_se = detail::to_double(f[7]);
        r.mean_psnr_db = detail::to_double(f[8]);
        r.mean_l = detail::to_double(f[9]);
        r.max_l = std::stoul(f[10]);
        r.infeasible_rate = detail::to_double(f[11]);
        r.config_hash = f[12];
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ResultRow> load_results_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_results_csv(ss.str());
}

// ---- SVG line charts -------------------------------------------------------

struct ChartSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // x ascending
};

namespace detail {

inline constexpr double kBerPlotFloor = 1e-7;  // log axis refuses nonpositive values

inline const char* series_color(std::size_t i) {
    static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
    return kPalette[i % 10];
}

inline std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                             std::vector<ChartSeries> series, bool log_y) {
    constexpr double W = 880, H = 540, ml = 80, mr = 220, mt = 50, mb = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (auto& s : series) {
        for (auto& [x, y] : s.points) {
            if (log_y) y = std::log10(std::max(y, kBerPlotFloor));
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax == xmin) { xmax = xmin + 1; xmin -= 1; }
    if (ymax == ymin) { ymax = ymin + 0.5; ymin -= 0.5; }
    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    const auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" font-family=\"sans-serif\">"
        << title << "</text>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 6; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 6.0;
        const double yv = ymin + (ymax - ymin) * i / 6.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << detail::format_double(std::round(xv * 100) / 100)
            << "</text>\n";
        svg << "<line x1=\"" << px(xv) << "\" y1=\"" << H - mb << "\" x2=\"" << px(xv) << "\" y2=\"" << H - mb + 4
            << "\" stroke=\"black\"/>\n";
        std::string ylabel = log_y ? ("1e" + detail::format_double(std::round(yv * 10) / 10))
                                   : detail::format_double(std::round(yv * 100) / 100);
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << ylabel << "</text>\n";
        svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\"" << py(yv)
            << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 16
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label << "</text>\n";
    svg << "<text x=\"20\" y=\"" << (mt + H - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 20 "
        << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = series_color(si);
        if (s.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
            for (const auto& [x, y] : s.points) svg << px(x) << "," << py(y) << " ";
            svg << "\"/>\n";
        }
        for (const auto& [x, y] : s.points)
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
        const double ly = mt + 18.0 * static_cast<double>(si);
        svg << "<rect x=\"" << W - mr + 12 << "\" y=\"" << ly - 9 << "\" width=\"14\" height=\"4\" fill=\"" << color
            << "\"/>\n";
        svg << "<text x=\"" << W - mr + 32 << "\" y=\"" << ly
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace detail

struct ReportInput {
    std::string label;  // usually the file name
    std::vector<ResultRow> rows;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Series key: one line per (file, csi_mode, epsilon, codec).
inline std::vector<ChartSeries> make_series(const std::vector<ReportInput>& inputs,
                                            double (*metric)(const ResultRow&)) {
    std::vector<ChartSeries> out;
    for (const auto& in : inputs) {
        std::map<std::string, ChartSeries> groups;
        for (const auto& r : in.rows) {
            std::string key = r.csi_mode + (r.csi_mode == "imperfect" ? " eps=" + detail::format_double(r.epsilon) : "") +
                              " " + r.codec;
            auto& g = groups[key];
            g.label = in.label + ": " + key;
            g.points.emplace_back(r.snr_db, metric(r));
        }
        for (auto& [k, g] : groups) {
            std::sort(g.points.begin(), g.points.end());
            out.push_back(std::move(g));
        }
    }
    return out;
}

inline void enforce_single_hash(const std::vector<ReportInput>& inputs, bool force) {
    std::string hash;
    for (const auto& in : inputs)
        for (const auto& r : in.rows) {
            if (hash.empty()) hash = r.config_hash;
            if (r.config_hash != hash && !force)
                throw std::invalid_argument(
                    "report: inputs carry different config hashes; pass --force to overlay deliberately");
        }
}

// Checks evaluable from result rows alone (the sweep-shaped acceptance
// criteria); per-point tolerances mirror the acceptance suite.
inline std::vector<CheckResult> run_checks(const std::vector<ReportInput>& inputs, double q0) {
    std::vector<CheckResult> out;
    std::vector<ResultRow> all;
    for (const auto& in : inputs) all.insert(all.end(), in.rows.begin(), in.rows.end());

    {
        CheckResult c{"stabilization: perfect-CSI mean BER <= q0*(1+0.05) at feasible points", true, ""};
        std::size_t considered = 0;
        for (const auto& r : all) {
            if (r.csi_mode != "perfect" || r.infeasible_rate > 0.01) continue;
            ++considered;
            if (r.mean_ber > q0 * 1.05) {
                c.pass = false;
                c.detail += " snr=" + detail::format_double(r.snr_db) + " ber=" + detail::format_double(r.mean_ber);
            }
        }
        if (considered == 0) { c.detail = "no applicable rows"; }
        out.push_back(std::move(c));
    }
    {
        CheckResult c{"stability: Pr[q>q0] <= eps + 2*sqrt(eps/frames) at feasible points", true, ""};
        std::size_t considered = 0;
        for (const auto& r : all) {
            if (r.csi_mode != "imperfect" || r.infeasible_rate > 0.01) continue;
            ++considered;
            const double bound = r.epsilon + 2.0 * std::sqrt(r.epsilon / static_cast<double>(r.frames));
            if (r.violation_rate > bound) {
                c.pass = false;
                c.detail += " snr=" + detail::format_double(r.snr_db) + " eps=" + detail::format_double(r.epsilon) +
                            " rate=" + detail::format_double(r.violation_rate);
            }
        }
        if (considered == 0) c.detail = "no applicable rows";
        out.push_back(std::move(c));
    }
    {
        CheckResult c{"efficiency ordering: SE(eps small) <= SE(eps large) <= SE(perfect); eps=0.05 within 0.5 bpcu", true, ""};
        // index rows by (codec, mode, eps, snr)
        std::map<std::string, std::map<double, const ResultRow*>> perfect;  // codec -> snr -> row
        std::map<std::string, std::map<double, std::map<double, const ResultRow*>>> imperfect;  // codec -> eps -> snr
        for (const auto& r : all) {
            if (r.csi_mode == "perfect") perfect[r.codec][r.snr_db] = &r;
            else imperfect[r.codec][r.epsilon][r.snr_db] = &r;
        }
        bool any = false;
        for (const auto& [codec, by_eps] : imperfect) {
            std::vector<double> eps_sorted;
            for (const auto& [e, _] : by_eps) eps_sorted.push_back(e);
            std::sort(eps_sorted.begin(), eps_sorted.end());
            for (std::size_t i = 0; i + 1 < eps_sorted.size(); ++i) {
                for (const auto& [snr, row] : by_eps.at(eps_sorted[i])) {
                    const auto& hi = by_eps.at(eps_sorted[i + 1]);
                    const auto it = hi.find(snr);
                    if (it == hi.end()) continue;
                    any = true;
                    if (row->mean_se > it->second->mean_se + 1e-9) {
                        c.pass = false;
                        c.detail += " SE(eps=" + detail::format_double(eps_sorted[i]) + ")>SE(eps=" +
                                    detail::format_double(eps_sorted[i + 1]) + ") at snr=" + detail::format_double(snr);
                    }
                }
            }
            const auto pit = perfect.find(codec);
            if (pit == perfect.end() || eps_sorted.empty()) continue;
            for (const auto& [snr, prow] : pit->second) {
                const auto& top = by_eps.at(eps_sorted.back());
                const auto it = top.find(snr);
                if (it == top.end()) continue;
                any = true;
                if (it->second->mean_se > prow->mean_se + 1e-9) {
                    c.pass = false;
                    c.detail += " SE(eps=" + detail::format_double(eps_sorted.back()) + ")>SE(perfect) at snr=" +
                                detail::format_double(snr);
                }
                const auto e05 = by_eps.find(0.05);
                if (e05 != by_eps.end()) {
                    const auto it05 = e05->second.find(snr);
                    if (it05 != e05->second.end() && prow->infeasible_rate <= 0.01 &&
                        it05->second->infeasible_rate <= 0.01 &&
                        prow->mean_se - it05->second->mean_se > 0.5) {
                        c.pass = false;
                        c.detail += " gap>0.5bpcu at snr=" + detail::format_double(snr);
                    }
                }
            }
        }
        if (!any) c.detail = "no applicable rows";
        out.push_back(std::move(c));
    }
    {
        CheckResult c{"graceful degradation: ladder PSNR steps >= -0.1 dB; baseline max step >= ladder max step", true, ""};
        auto max_step = [&](const std::string& codec, bool& found, bool& smooth) {
            std::map<double, double> curve;
            for (const auto& r : all)
                if (r.csi_mode == "perfect" && r.codec == codec) curve[r.snr_db] = r.mean_psnr_db;
            found = curve.size() >= 2;
            double max_rise = 0.0;
            smooth = true;
            double prev_x = 0.0, prev_y = 0.0;
            bool first = true;
            for (const auto& [x, y] : curve) {
                if (!first) {
                    max_rise = std::max(max_rise, y - prev_y);
                    if (y - prev_y < -0.1) smooth = false;
                }
                first = false;
                prev_x = x;
                prev_y = y;
            }
            (void)prev_x;
            return max_rise;
        };
        bool lf = false, bf = false, lsmooth = true, bsmooth = true;
        const double lstep = max_step("ladder", lf, lsmooth);
        const double bstep = max_step("baseline", bf, bsmooth);
        if (lf && !lsmooth) {
            c.pass = false;
            c.detail += " ladder curve not monotone within 0.1 dB";
        }
        if (lf && bf && bstep + 1e-9 < lstep) {
            c.pass = false;
            c.detail += " baseline max step " + detail::format_double(bstep) + " < ladder " + detail::format_double(lstep);
        }
        if (!lf && !bf) c.detail = "no applicable rows";
        out.push_back(std::move(c));
    }
    return out;
}

struct ReportFiles {
    std::string ber_svg, se_svg, psnr_svg, summary;
};

inline ReportFiles render_report(const std::vector<ReportInput>& inputs, double q0, bool with_checks,
                                 std::vector<CheckResult>* checks_out = nullptr) {
    ReportFiles files;
    files.ber_svg = detail::svg_chart("average bit error rate vs channel SNR", "channel SNR [dB]", "log10 BER",
                                      make_series(inputs, [](const ResultRow& r) { return r.mean_ber; }), true);
    files.se_svg = detail::svg_chart("average spectral efficiency vs channel SNR", "channel SNR [dB]",
                                     "spectral efficiency [bpcu]",
                                     make_series(inputs, [](const ResultRow& r) { return r.mean_se; }), false);
    files.psnr_svg = detail::svg_chart("reconstruction PSNR vs channel SNR", "channel SNR [dB]", "PSNR [dB]",
                                       make_series(inputs, [](const ResultRow& r) { return r.mean_psnr_db; }), false);
    std::ostringstream sum;
    sum << "results summary\n";
    for (const auto& in : inputs) {
        sum << "- " << in.label << ": " << in.rows.size() << " rows";
        if (!in.rows.empty()) {
            double lo = 1e300, hi = -1e300;
            for (const auto& r : in.rows) {
                lo = std::min(lo, r.snr_db);
                hi = std::max(hi, r.snr_db);
            }
            sum << ", snr " << detail::format_double(lo) << ".." << detail::format_double(hi) << " dB, hash "
                << in.rows.front().config_hash;
        }
        sum << "\n";
    }
    if (with_checks) {
        const auto checks = run_checks(inputs, q0);
        for (const auto& c : checks)
            sum << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << (c.detail.empty() ? "" : " |" + c.detail) << "\n";
        if (checks_out) *checks_out = checks;
    }
    files.summary = sum.str();
    return files;
}

}  // namespace svbsc
