// Command-line front end: single-image estimation, benchmark runs over a
// manifest, and synthetic scene rendering with ratio analysis.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcs/baselines.hpp"
#include "dcs/estimator.hpp"
#include "dcs/image.hpp"
#include "dcs/image_io.hpp"
#include "dcs/kernels.hpp"
#include "dcs/parallel.hpp"
#include "dcs/stats.hpp"
#include "dcs/synth.hpp"

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

struct ParamFlags {
    double tau = 5.0;
    std::string eta = "2";  // benchmark accepts "a:b" sweeps
    std::vector<double> sigmas{1.0, 2.0};
    double bandwidth = 0.03;
    double saturation_level = 0.0;  // 0 = derive from container depth
    unsigned jobs = 0;
    std::string config_path;

    // options tracked so a config file never overrides an explicit flag
    CLI::Option* opt_tau = nullptr;
    CLI::Option* opt_eta = nullptr;
    CLI::Option* opt_sigmas = nullptr;
    CLI::Option* opt_bandwidth = nullptr;
    CLI::Option* opt_saturation = nullptr;
    CLI::Option* opt_jobs = nullptr;
};

void add_param_flags(CLI::App* cmd, ParamFlags& p) {
    p.opt_tau = cmd->add_option("--tau", p.tau, "Percent of bright pixels initially selected");
    p.opt_eta = cmd->add_option(
        "--eta", p.eta, "Percent retained after erosion (benchmark accepts a sweep, e.g. 1:4)");
    p.opt_sigmas =
        cmd->add_option("--sigmas,--sigma", p.sigmas, "Scales of the derivative operators")
            ->delimiter(',');
    p.opt_bandwidth = cmd->add_option("--bandwidth", p.bandwidth, "Density estimation bandwidth h");
    p.opt_saturation =
        cmd->add_option("--saturation-level,--saturation_level", p.saturation_level,
                        "Channel value treated as clipped (default: container maximum)");
    p.opt_jobs =
        cmd->add_option("--jobs", p.jobs, "Worker threads (default: DCS_JOBS or logical cores)");
    cmd->add_option("--config", p.config_path,
                    "Config file with tau, eta, sigmas, bandwidth, saturation_level keys");
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (in >> item) {
        std::istringstream piece(item);
        std::string tok;
        while (std::getline(piece, tok, ','))
            if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

// key = value lines, '#' comments; explicit command-line flags win
void apply_config_file(ParamFlags& p) {
    if (p.config_path.empty()) return;
    std::ifstream in(p.config_path);
    if (!in) throw dcs::IoError("cannot open config file: " + p.config_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        try {
            if (key == "tau") {
                if (!p.opt_tau->count()) p.tau = std::stod(value);
            } else if (key == "eta") {
                if (!p.opt_eta->count()) p.eta = value;
            } else if (key == "sigmas" || key == "sigma") {
                if (!p.opt_sigmas->count()) p.sigmas = parse_number_list(value);
            } else if (key == "bandwidth") {
                if (!p.opt_bandwidth->count()) p.bandwidth = std::stod(value);
            } else if (key == "saturation_level" || key == "saturation-level") {
                if (!p.opt_saturation->count()) p.saturation_level = std::stod(value);
            } else if (key == "jobs") {
                if (!p.opt_jobs->count()) p.jobs = static_cast<unsigned>(std::stoul(value));
            } else {
                throw dcs::ParseError("config line " + std::to_string(line_no) +
                                      ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw dcs::ParseError("config line " + std::to_string(line_no) + ": bad value '" +
                                  value + "'");
        }
    }
}

std::vector<double> parse_eta_values(const std::string& spec) {
    std::vector<double> out;
    const std::size_t colon = spec.find(':');
    if (colon == std::string::npos) {
        out.push_back(std::stod(spec));
        return out;
    }
    const double lo = std::stod(spec.substr(0, colon));
    const double hi = std::stod(spec.substr(colon + 1));
    if (!(lo > 0) || hi < lo) throw CLI::ValidationError("--eta", "bad sweep range");
    for (double v = lo; v <= hi + 1e-9; v += 1.0) out.push_back(v);
    return out;
}

dcs::DcsParams make_params(const ParamFlags& f, double eta, const dcs::LinearImage& img) {
    dcs::DcsParams p;
    p.tau = f.tau;
    p.eta = eta;
    p.sigmas = f.sigmas;
    p.bandwidth = f.bandwidth;
    p.saturation_level = f.saturation_level > 0 ? f.saturation_level : img.container_max();
    p.validate();
    return p;
}

int max_kernel_radius(const std::vector<double>& sigmas) {
    int r = 0;
    for (double s : sigmas) r = std::max(r, static_cast<int>(std::ceil(3.0 * s)));
    return r;
}

std::string image_id(const std::string& path) { return fs::path(path).stem().string(); }

std::string flags_text(unsigned flags) {
    std::string out;
    if (flags & dcs::kFlagDegradedSelection) out += "degraded_selection";
    if (flags & dcs::kFlagGrayWorldFallback) {
        if (!out.empty()) out += '+';
        out += "gray_world_fallback";
    }
    return out.empty() ? "ok" : out;
}

bool parse_triple(const std::string& s, double out[3]) {
    std::istringstream in(s);
    char c1 = 0, c2 = 0;
    return static_cast<bool>(in >> out[0] >> c1 >> out[1] >> c2 >> out[2]) && c1 == ',' &&
           c2 == ',';
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string image_path;
    ParamFlags params;
    std::string manifest_path;
    std::string ground_truth;
    double black_level = -1;
    std::string exclude_rect;
    std::string correct_path;
    std::string dump_chroma_path;
};

int run_estimate(const EstimateArgs& a) {
    dcs::ManifestEntry entry;
    bool have_truth = false;

    if (!a.manifest_path.empty()) {
        std::vector<std::string> warnings;
        const auto entries = dcs::load_manifest(a.manifest_path, &warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
        const std::string key = image_id(a.image_path);
        bool found = false;
        for (const auto& e : entries) {
            if (e.image_path == a.image_path || image_id(e.image_path) == key) {
                entry = e;
                found = true;
                break;
            }
        }
        if (!found) {
            std::cerr << "error: image not found in manifest: " << a.image_path << '\n';
            return 1;
        }
        have_truth = true;
    }
    if (!a.ground_truth.empty()) {
        double t[3];
        if (!parse_triple(a.ground_truth, t)) {
            std::cerr << "error: --ground-truth expects r,g,b\n";
            return 1;
        }
        entry.ground_truth = dcs::normalize_illuminant(t[0], t[1], t[2]);
        have_truth = true;
    }
    if (a.black_level >= 0) entry.black_level = a.black_level;
    if (!a.exclude_rect.empty()) {
        std::istringstream in(a.exclude_rect);
        std::array<int, 4> r{};
        char c;
        if (!(in >> r[0] >> c >> r[1] >> c >> r[2] >> c >> r[3])) {
            std::cerr << "error: --exclude expects x0,y0,x1,y1\n";
            return 1;
        }
        entry.exclusion_rect = r;
    }

    dcs::LinearImage img = dcs::load_image(a.image_path, entry);

    ParamFlags pf = a.params;
    if (pf.saturation_level <= 0 && std::isfinite(entry.saturation_level))
        pf.saturation_level = entry.effective_saturation();
    const dcs::DcsParams params = make_params(pf, parse_eta_values(pf.eta).front(), img);

    std::optional<dcs::BinaryMask> exclusion;
    if (entry.exclusion_rect)
        exclusion = dcs::build_exclusion_mask(entry, img.width(), img.height(),
                                              max_kernel_radius(params.sigmas));

    const dcs::EstimateResult res =
        dcs::estimate(img, params, exclusion ? &*exclusion : nullptr);

    std::printf("illuminant: %.6g %.6g %.6g\n", res.illuminant.r, res.illuminant.g,
                res.illuminant.b);
    std::printf("rg chromaticity: %.6g %.6g\n", res.illuminant.r, res.illuminant.g);
    std::printf("derivative colors: %zu\n", res.sample_count);
    if (res.flags) std::printf("flags: %s\n", flags_text(res.flags).c_str());
    if (have_truth)
        std::printf("angular error: %.6g deg\n",
                    dcs::angular_error(entry.ground_truth, res.illuminant));

    if (!a.correct_path.empty()) {
        dcs::save_image(a.correct_path, dcs::white_balance(img, res.illuminant));
        std::printf("corrected image written to %s\n", a.correct_path.c_str());
    }
    if (!a.dump_chroma_path.empty()) {
        dcs::BinaryMask usable = dcs::clip_saturated(img, params.saturation_level);
        if (exclusion)
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    if (exclusion->at(x, y)) usable.set(x, y, false);
        const auto sel = dcs::select_bright_regions(img, params, usable);
        const auto colors = dcs::extract_derivative_colors(img, sel.mask, params,
                                                           exclusion ? &*exclusion : nullptr);
        std::ofstream out(a.dump_chroma_path);
        if (!out) throw dcs::IoError("cannot write " + a.dump_chroma_path);
        out << "c_r,c_g,operator,sigma,x,y\n";
        for (const auto& c : colors)
            out << dcs::format_double(c.cr) << ',' << dcs::format_double(c.cg) << ','
                << dcs::to_string(c.op) << ',' << dcs::format_double(c.sigma) << ',' << c.x
                << ',' << c.y << '\n';
        std::printf("chromaticity cloud written to %s\n", a.dump_chroma_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct MethodSpec {
    std::string name;      // label used in reports
    bool is_dcs = false;
    double eta = 2.0;                 // dcs only
    dcs::MinkowskiParams minkowski;   // baselines only
};

struct BenchmarkArgs {
    std::string manifest_path;
    ParamFlags params;
    std::vector<std::string> methods{"dcs"};
    std::string out_dir = ".";
    bool wst = false;
    bool optimal = false;
    double minkowski_p = -1;
    double minkowski_sigma = -1;
    std::vector<std::string> imports;
};

struct Row {
    std::string image_id;
    std::string method;
    double error = std::numeric_limits<double>::quiet_NaN();
    std::string flags = "ok";
    double seconds = 0;
    bool failed = false;
};

std::string sanitize(double v) {
    std::string s = dcs::format_double(v);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

std::vector<MethodSpec> expand_methods(const BenchmarkArgs& a) {
    std::vector<MethodSpec> out;
    const auto etas = parse_eta_values(a.params.eta);
    for (const std::string& m : a.methods) {
        if (m == "dcs") {
            for (double eta : etas) {
                MethodSpec spec;
                spec.is_dcs = true;
                spec.eta = eta;
                spec.name = etas.size() == 1 ? "dcs" : "dcs_eta" + sanitize(eta);
                out.push_back(spec);
            }
        } else if (m == "gw" || m == "wp") {
            out.push_back({m, false, 0, dcs::minkowski_preset(m)});
        } else if (m == "sog" || m == "gg" || m == "ge1" || m == "ge2") {
            if (a.optimal) continue;  // handled by the sweep
            out.push_back(
                {m, false, 0, dcs::minkowski_preset(m, a.minkowski_p, a.minkowski_sigma)});
        } else {
            throw CLI::ValidationError("--methods", "unknown method: " + m);
        }
    }
    return out;
}

Row run_one(const dcs::ManifestEntry& entry, const MethodSpec& method, const ParamFlags& pf) {
    Row row;
    row.image_id = image_id(entry.image_path);
    row.method = method.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        dcs::LinearImage img = dcs::load_image(entry.image_path, entry);
        ParamFlags local = pf;
        if (local.saturation_level <= 0 && std::isfinite(entry.saturation_level))
            local.saturation_level = entry.effective_saturation();
        const dcs::DcsParams params =
            make_params(local, method.is_dcs ? method.eta : 2.0, img);
        dcs::BinaryMask exclusion = dcs::build_exclusion_mask(
            entry, img.width(), img.height(), max_kernel_radius(params.sigmas));

        dcs::Illuminant est;
        if (method.is_dcs) {
            const dcs::EstimateResult res = dcs::estimate(img, params, &exclusion);
            est = res.illuminant;
            row.flags = flags_text(res.flags);
        } else {
            // parity with the main method: saturated pixels never enter the statistic
            dcs::BinaryMask usable = dcs::clip_saturated(img, params.saturation_level);
            dcs::BinaryMask excluded(img.width(), img.height());
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    excluded.set(x, y, exclusion.at(x, y) || !usable.at(x, y));
            est = dcs::minkowski_estimate(img, method.minkowski, &excluded);
        }
        row.error = dcs::angular_error(entry.ground_truth, est);
    } catch (const std::exception& e) {
        row.failed = true;
        row.flags = std::string("failed: ") + e.what();
        for (char& c : row.flags)
            if (c == ',' || c == '\n') c = ';';
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

dcs::ErrorSummary summary_of(const std::vector<Row>& rows, const std::string& method,
                             std::size_t* count) {
    std::vector<double> errs;
    for (const Row& r : rows)
        if (r.method == method && !r.failed) errs.push_back(r.error);
    *count = errs.size();
    if (errs.empty()) throw dcs::DegenerateInputError("no successful rows for " + method);
    return dcs::summarize(errs);
}

void check_summary_consistency(const std::string& rows_path, const std::string& method,
                               const dcs::ErrorSummary& written) {
    // The emitted summary must be recomputable from the emitted rows.
    std::ifstream in(rows_path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> errs;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string id, m, err;
        std::getline(ls, id, ',');
        std::getline(ls, m, ',');
        std::getline(ls, err, ',');
        if (m == method && !err.empty()) errs.push_back(std::stod(err));
    }
    const dcs::ErrorSummary again = dcs::summarize(errs);
    if (again.median != written.median || again.mean != written.mean)
        throw std::logic_error("summary is not recomputable from the emitted rows");
}

int run_benchmark(const BenchmarkArgs& a) {
    std::vector<std::string> warnings;
    const auto entries = dcs::load_manifest(a.manifest_path, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
    if (entries.empty()) {
        std::cerr << "error: empty manifest\n";
        return 1;
    }
    fs::create_directories(a.out_dir);

    std::vector<MethodSpec> methods = expand_methods(a);

    if (a.optimal) {
        // Sweep p (and sigma where applicable) per baseline, keep the setting
        // with the lowest median error.
        for (const std::string& m : a.methods) {
            if (m != "sog" && m != "gg" && m != "ge1" && m != "ge2") continue;
            MethodSpec best;
            double best_median = std::numeric_limits<double>::infinity();
            const bool uses_sigma = m != "sog";
            for (int p = 1; p <= 14; ++p) {
                for (int s = 0; s <= (uses_sigma ? 4 : 0); ++s) {
                    MethodSpec cand{m, false, 0,
                                    dcs::minkowski_preset(m, p, uses_sigma ? s : -1)};
                    std::vector<double> errs;
                    bool ok = true;
                    for (const auto& e : entries) {
                        Row r = run_one(e, cand, a.params);
                        if (r.failed) {
                            ok = false;
                            break;
                        }
                        errs.push_back(r.error);
                    }
                    if (!ok || errs.empty()) continue;
                    const double med = dcs::summarize(errs).median;
                    if (med < best_median) {
                        best_median = med;
                        best = cand;
                        best.name = m + "_p" + std::to_string(p) +
                                    (uses_sigma ? "_s" + std::to_string(s) : "");
                    }
                }
            }
            if (std::isinf(best_median)) {
                std::cerr << "warning: optimal sweep for " << m << " found no usable setting\n";
                continue;
            }
            methods.push_back(best);
        }
    }

    // Fan out over (entry, method) tasks; results land in preallocated slots
    // so report order never depends on scheduling.
    std::vector<Row> rows(entries.size() * methods.size());
    dcs::parallel_for(
        0, static_cast<int>(rows.size()),
        [&](int t) {
            const std::size_t e = static_cast<std::size_t>(t) / methods.size();
            const std::size_t m = static_cast<std::size_t>(t) % methods.size();
            rows[static_cast<std::size_t>(t)] = run_one(entries[e], methods[m], a.params);
        },
        a.params.jobs);

    const std::string rows_path = a.out_dir + "/rows.csv";
    {
        std::ofstream out(rows_path);
        out << "image_id,method,error_degrees,flags\n";
        for (const Row& r : rows) {
            out << r.image_id << ',' << r.method << ',';
            if (!r.failed) out << dcs::format_double(r.error);
            out << ',' << r.flags << '\n';
        }
    }
    {
        std::ofstream out(a.out_dir + "/timing.csv");
        out << "image_id,method,seconds\n";
        for (const Row& r : rows)
            out << r.image_id << ',' << r.method << ',' << dcs::format_double(r.seconds)
                << '\n';
    }

    {
        std::ofstream out(a.out_dir + "/summary.csv");
        out << "method,count,median,mean,trimean,best25,worst25\n";
        for (const MethodSpec& m : methods) {
            std::size_t count = 0;
            try {
                const dcs::ErrorSummary s = summary_of(rows, m.name, &count);
                check_summary_consistency(rows_path, m.name, s);
                out << m.name << ',' << count << ',' << dcs::format_double(s.median) << ','
                    << dcs::format_double(s.mean) << ',' << dcs::format_double(s.trimean)
                    << ',' << dcs::format_double(s.best25) << ','
                    << dcs::format_double(s.worst25) << '\n';
                std::printf("%-16s n=%-4zu median=%.6g mean=%.6g trimean=%.6g\n",
                            m.name.c_str(), count, s.median, s.mean, s.trimean);
            } catch (const dcs::DegenerateInputError&) {
                out << m.name << ",0,,,,,\n";
                std::printf("%-16s no successful rows\n", m.name.c_str());
            }
        }
    }

    double total_seconds = 0;
    for (const Row& r : rows) total_seconds += r.seconds;
    std::printf("benchmark: %zu rows, %.6g s total compute\n", rows.size(), total_seconds);

    if (a.wst) {
        // Paired error lists over images that succeeded for every method,
        // plus any imported competitor error files.
        std::vector<std::pair<std::string, std::map<std::string, double>>> by_method;
        for (const MethodSpec& m : methods) {
            std::map<std::string, double> errs;
            for (const Row& r : rows)
                if (r.method == m.name && !r.failed) errs[r.image_id] = r.error;
            by_method.emplace_back(m.name, std::move(errs));
        }
        for (const std::string& imp : a.imports) {
            const std::size_t eq = imp.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("--import", "expected name=path.csv");
            std::map<std::string, double> errs;
            for (const auto& [id, e] : dcs::read_error_csv(imp.substr(eq + 1))) errs[id] = e;
            by_method.emplace_back(imp.substr(0, eq), std::move(errs));
        }

        std::vector<std::string> ids;
        for (const auto& e : entries) {
            const std::string id = image_id(e.image_path);
            bool everywhere = true;
            for (const auto& [name, errs] : by_method)
                if (!errs.count(id)) everywhere = false;
            if (everywhere) ids.push_back(id);
        }
        std::vector<std::pair<std::string, std::vector<double>>> paired;
        for (const auto& [name, errs] : by_method) {
            std::vector<double> v;
            for (const std::string& id : ids) v.push_back(errs.at(id));
            paired.emplace_back(name, std::move(v));
        }
        const dcs::WstResult wst = dcs::wst_matrix(paired);

        {
            std::ofstream out(a.out_dir + "/wst.csv");
            out << "method";
            for (const auto& m : wst.methods) out << ',' << m;
            out << ",score\n";
            for (std::size_t i = 0; i < wst.methods.size(); ++i) {
                out << wst.methods[i];
                for (std::size_t j = 0; j < wst.methods.size(); ++j)
                    out << ',' << wst.at(i, j);
                out << ',' << wst.scores[i] << '\n';
            }
        }
        {
            std::ofstream out(a.out_dir + "/wst.txt");
            std::size_t width = 5;
            for (const auto& m : wst.methods) width = std::max(width, m.size());
            out << std::string(width, ' ') << " |";
            for (std::size_t j = 0; j < wst.methods.size(); ++j) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), " %3zu", j + 1);
                out << buf;
            }
            out << " | score\n";
            for (std::size_t i = 0; i < wst.methods.size(); ++i) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%-*s |", static_cast<int>(width),
                              wst.methods[i].c_str());
                out << buf;
                for (std::size_t j = 0; j < wst.methods.size(); ++j) {
                    std::snprintf(buf, sizeof(buf), " %3d", wst.at(i, j));
                    out << buf;
                }
                std::snprintf(buf, sizeof(buf), " | %d\n", wst.scores[i]);
                out << buf;
            }
            out << "\npaired images: " << ids.size() << '\n';
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    ParamFlags params;
    std::string out_prefix = "synth";
    std::string op = "f2";
    double op_sigma = 1.0;
    int width = 0, height = 0;
    double radius = 0, phi = 0, kd = -1, light = 0;
    std::string object_color, illuminant, light_dir, patches;
    bool png = false;
};

dcs::Kernel pick_operator(const std::string& op, double sigma) {
    if (op == "f1") return dcs::laplacian_f1();
    if (op == "f2") return dcs::cross_f2();
    const dcs::SecondDerivativeKernels ks = dcs::gaussian_second_kernels(sigma);
    if (op == "gxx") return ks.xx;
    if (op == "gyy") return ks.yy;
    if (op == "gxy") return ks.xy;
    throw CLI::ValidationError("--operator", "expected f1, f2, gxx, gyy or gxy");
}

int run_synth(const SynthArgs& a) {
    dcs::SceneConfig c = dcs::default_scene();
    if (a.width > 0) c.width = a.width;
    if (a.height > 0) c.height = a.height;
    if (a.radius > 0) {
        c.sphere.radius = a.radius;
        c.sphere.center_x = (c.width - 1) / 2.0;
        c.sphere.center_y = (c.height - 1) / 2.0;
    }
    if (a.phi > 0) c.surface_roughness = a.phi;
    if (a.kd >= 0) c.diffuse_albedo = a.kd;
    if (a.light > 0) c.light_intensity = a.light;
    double t[3];
    if (!a.object_color.empty()) {
        if (!parse_triple(a.object_color, t))
            throw CLI::ValidationError("--object-color", "expected r,g,b");
        const double s = t[0] + t[1] + t[2];
        c.object_color = {t[0] / s, t[1] / s, t[2] / s};
    }
    if (!a.illuminant.empty()) {
        if (!parse_triple(a.illuminant, t))
            throw CLI::ValidationError("--illuminant", "expected r,g,b");
        c.illuminant = dcs::normalize_illuminant(t[0], t[1], t[2]);
    }
    if (!a.light_dir.empty()) {
        if (!parse_triple(a.light_dir, t))
            throw CLI::ValidationError("--light-dir", "expected x,y,z");
        c.light_direction = dcs::Vec3{t[0], t[1], t[2]}.normalized();
    }
    if (!a.patches.empty()) {
        c.patch_colors.clear();
        std::istringstream in(a.patches);
        std::string tok;
        while (std::getline(in, tok, ';')) {
            if (!parse_triple(tok, t))
                throw CLI::ValidationError("--patches", "expected r,g,b;r,g,b;...");
            const double s = t[0] + t[1] + t[2];
            c.patch_colors.push_back({t[0] / s, t[1] / s, t[2] / s});
        }
    }

    const dcs::DichromaticRender rd = dcs::render(c);
    const dcs::Kernel kernel = pick_operator(a.op, a.op_sigma);
    const dcs::RatioMap ratios = dcs::ratio_map(rd, kernel);

    const std::string ext = a.png ? ".png" : ".pfm";
    dcs::save_image(a.out_prefix + "_composite" + ext, rd.composite);
    dcs::save_image(a.out_prefix + "_diffuse" + ext, rd.diffuse_component);
    dcs::save_image(a.out_prefix + "_specular" + ext, rd.specular_component);

    {
        std::vector<double> plane(ratios.value.size(), 0.0);
        for (std::size_t i = 0; i < plane.size(); ++i) {
            switch (ratios.cls[i]) {
                case dcs::RatioClass::Finite: plane[i] = ratios.value[i]; break;
                case dcs::RatioClass::Infinite:
                    plane[i] = std::numeric_limits<double>::infinity();
                    break;
                default: plane[i] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        dcs::detail::save_pfm_gray(a.out_prefix + "_ratio.pfm", plane, ratios.width,
                                   ratios.height);
    }
    double max_finite = 0;
    std::size_t finite_count = 0;
    {
        std::ofstream out(a.out_prefix + "_ratio.csv");
        out << "x,y,status,ratio\n";
        for (int y = 0; y < ratios.height; ++y) {
            for (int x = 0; x < ratios.width; ++x) {
                switch (ratios.class_at(x, y)) {
                    case dcs::RatioClass::Finite:
                        out << x << ',' << y << ",finite,"
                            << dcs::format_double(ratios.at(x, y)) << '\n';
                        max_finite = std::max(max_finite, ratios.at(x, y));
                        ++finite_count;
                        break;
                    case dcs::RatioClass::Infinite:
                        out << x << ',' << y << ",inf,\n";
                        break;
                    default:
                        break;  // undefined pixels are omitted
                }
            }
        }
    }
    {
        const auto samples = dcs::error_vs_ratio(rd, c.illuminant, kernel);
        std::ofstream out(a.out_prefix + "_error_vs_ratio.csv");
        out << "ratio,error_degrees\n";
        for (const auto& s : samples)
            out << dcs::format_double(s.ratio) << ',' << dcs::format_double(s.error_deg)
                << '\n';
    }
    std::printf("operator %s: %zu finite ratios, max %.6g\n", a.op.c_str(), finite_count,
                max_finite);
    std::printf("outputs written with prefix %s\n", a.out_prefix.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Derivative-color illuminant estimation and benchmark harness"};
    app.require_subcommand(1);

    EstimateArgs est;
    CLI::App* cmd_est = app.add_subcommand("estimate", "Estimate the illuminant of one image");
    cmd_est->add_option("image", est.image_path, "Input image (png/tiff/ppm/pfm)")->required();
    add_param_flags(cmd_est, est.params);
    cmd_est->add_option("--manifest", est.manifest_path,
                        "Look the image up in a manifest for ground truth and preprocessing");
    cmd_est->add_option("--ground-truth", est.ground_truth, "Known illuminant r,g,b");
    cmd_est->add_option("--black-level", est.black_level, "Black offset to subtract");
    cmd_est->add_option("--exclude", est.exclude_rect, "Excluded rectangle x0,y0,x1,y1");
    cmd_est->add_option("--correct", est.correct_path, "Write the white-balanced image here");
    cmd_est->add_option("--dump-chroma", est.dump_chroma_path,
                        "Write the derivative-color chromaticity cloud as CSV");

    BenchmarkArgs bench;
    CLI::App* cmd_bench =
        app.add_subcommand("benchmark", "Run methods over a manifest and write reports");
    cmd_bench->add_option("manifest", bench.manifest_path, "Benchmark manifest")->required();
    add_param_flags(cmd_bench, bench.params);
    cmd_bench->add_option("--methods", bench.methods,
                          "Comma-separated: dcs,gw,wp,sog,gg,ge1,ge2")
        ->delimiter(',');
    cmd_bench->add_option("--out-dir", bench.out_dir, "Report directory");
    cmd_bench->add_flag("--wst", bench.wst, "Also emit the pairwise sign-test matrix");
    cmd_bench->add_flag("--optimal", bench.optimal,
                        "Sweep baseline parameters (p in 1..14, sigma in 0..4)");
    cmd_bench->add_option("--minkowski-p", bench.minkowski_p, "Norm p for sog/gg/ge1/ge2");
    cmd_bench->add_option("--minkowski-sigma", bench.minkowski_sigma,
                          "Smoothing sigma for gg/ge1/ge2");
    cmd_bench->add_option("--import", bench.imports,
                          "External per-image error CSV as name=path (repeatable)");

    SynthArgs synth;
    CLI::App* cmd_synth =
        app.add_subcommand("synth", "Render a synthetic scene and its ratio analysis");
    add_param_flags(cmd_synth, synth.params);
    cmd_synth->add_option("--out", synth.out_prefix, "Output file prefix");
    cmd_synth->add_option("--operator", synth.op, "f1, f2, gxx, gyy or gxy");
    cmd_synth->add_option("--op-sigma", synth.op_sigma, "Scale for the gaussian operators");
    cmd_synth->add_option("--width", synth.width, "Image width");
    cmd_synth->add_option("--height", synth.height, "Image height");
    cmd_synth->add_option("--radius", synth.radius, "Sphere radius in pixels");
    cmd_synth->add_option("--phi", synth.phi, "Surface roughness");
    cmd_synth->add_option("--kd", synth.kd, "Diffuse albedo");
    cmd_synth->add_option("--light", synth.light, "Light intensity");
    cmd_synth->add_option("--object-color", synth.object_color, "Intrinsic color r,g,b");
    cmd_synth->add_option("--illuminant", synth.illuminant, "Illuminant r,g,b");
    cmd_synth->add_option("--light-dir", synth.light_dir, "Light direction x,y,z");
    cmd_synth->add_option("--patches", synth.patches,
                          "Sector colors r,g,b;r,g,b;... (splits the sphere)");
    cmd_synth->add_flag("--png", synth.png, "Write 16-bit PNG instead of PFM");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_config_file(est.params);
        apply_config_file(bench.params);
        apply_config_file(synth.params);
        if (cmd_est->parsed()) return run_estimate(est);
        if (cmd_bench->parsed()) return run_benchmark(bench);
        return run_synth(synth);
    } catch (const dcs::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
