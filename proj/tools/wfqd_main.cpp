// wfqd: sweeps, figure presets and single-sample inspection.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "wfqd/cli.hpp"
#include "wfqd/wfqd.hpp"

namespace {

using namespace wfqd;

struct CommonFlags {
    int samples = 200;
    std::uint64_t seed = 42;
    std::string out = "-";
    std::string raw;
    bool dense = false;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

void add_common(CLI::App* app, CommonFlags& f, bool samples_has_default = true) {
    auto* s = app->add_option("--samples", f.samples, "GUE samples per layout point");
    if (samples_has_default) s->capture_default_str();
    s->check(CLI::PositiveNumber);
    app->add_option("--seed", f.seed, "Master seed")->capture_default_str();
    app->add_option("--out", f.out, "Aggregated CSV path ('-' for stdout)")->capture_default_str();
    app->add_option("--raw", f.raw, "Optional per-sample CSV path (disabled when empty)");
    app->add_flag("--dense", f.dense, "Force the dense equilibration path");
    app->add_option("--threads", f.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void emit(const SweepConfig& config, const CommonFlags& flags) {
    const auto points = run_sweep_points(config);
    std::vector<SweepRecord> records;
    for (const auto& pt : points) {
        auto r = aggregate(pt.base, pt.table);
        records.insert(records.end(), r.begin(), r.end());
    }
    if (flags.out == "-") {
        write_csv(std::cout, records);
    } else {
        std::ofstream os(flags.out);
        if (!os) throw std::runtime_error("cannot open output file '" + flags.out + "'");
        write_csv(os, records);
    }
    if (!flags.raw.empty()) {
        std::ofstream os(flags.raw);
        if (!os) throw std::runtime_error("cannot open raw output file '" + flags.raw + "'");
        write_raw_csv(os, points);
    }
    std::cerr << "wfqd: " << records.size() << " records from " << points.size() << " layout points\n";
}

void apply_common(SweepConfig& c, const CommonFlags& f, int max_qubits) {
    c.n_samples = f.samples;
    c.seed = f.seed;
    c.dense = f.dense;
    c.threads = f.threads;
    c.max_qubits = max_qubits;
}

int run(int argc, char** argv) {
    CLI::App app{"Wigner's Friend scenarios under quantum Darwinism: equilibration sweeps and observer-disagreement metrics"};
    app.require_subcommand(1);
    app.footer("Layout lists accept inclusive ranges and comma lists, e.g. 1..5 or 2,3,4.\n"
               "Environment: WFQD_MAX_QUBITS overrides the qubit budget (default 12).\n"
               "Exit codes: 0 ok, 1 internal failure, 2 usage error, 3 resource limit.");

    // wf
    auto* wf = app.add_subcommand("wf", "Simple scenario sweep over n_f x n_e");
    std::string nf_list = "1..5", ne_list = "2,3,4";
    double p0 = 0.5;
    CommonFlags wf_flags;
    wf->add_option("--nf", nf_list, "Friend qubit counts")->capture_default_str();
    wf->add_option("--ne", ne_list, "Environment qubit counts")->capture_default_str();
    wf->add_option("--p0", p0, "Prior of pointer outcome 0")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    add_common(wf, wf_flags);

    // ewfs
    auto* ewfs = app.add_subcommand("ewfs", "Extended scenario sweep over n_c x n_ec");
    std::string nc_list = "1..6", nec_list = "1,2,3";
    int nd = 1, ned = 1;
    double theta = std::numbers::pi / 4.0;
    CommonFlags ewfs_flags;
    ewfs->add_option("--nc", nc_list, "Charlie qubit counts")->capture_default_str();
    ewfs->add_option("--nec", nec_list, "Charlie environment qubit counts")->capture_default_str();
    ewfs->add_option("--nd", nd, "Debbie qubits")->capture_default_str()->check(CLI::PositiveNumber);
    ewfs->add_option("--ned", ned, "Debbie environment qubits")->capture_default_str()->check(CLI::PositiveNumber);
    ewfs->add_option("--theta", theta, "Source angle in radians")->capture_default_str();
    add_common(ewfs, ewfs_flags);

    // preset
    auto* pre = app.add_subcommand("preset", "Run a named figure preset (fig3, fig4, fig8, fig9, fig10, fig11)");
    std::string preset_name;
    CommonFlags pre_flags;
    pre->add_option("name", preset_name, "Preset name")->required()->check(CLI::IsMember(preset_names()));
    add_common(pre, pre_flags);

    // inspect
    auto* ins = app.add_subcommand("inspect", "Dump |rho_L| of one sample as matrix-market text");
    int ins_nf = 3, ins_ne = 4, ins_sample = 0;
    double ins_p0 = 0.5;
    std::uint64_t ins_seed = 42;
    std::string ins_out = "-";
    ins->add_option("--nf", ins_nf, "Friend qubits")->capture_default_str()->check(CLI::PositiveNumber);
    ins->add_option("--ne", ins_ne, "Environment qubits")->capture_default_str()->check(CLI::PositiveNumber);
    ins->add_option("--p0", ins_p0, "Prior of pointer outcome 0")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    ins->add_option("--seed", ins_seed, "Master seed")->capture_default_str();
    ins->add_option("--sample", ins_sample, "Sample index")->capture_default_str()->check(CLI::NonNegativeNumber);
    ins->add_option("--out", ins_out, "Output path ('-' for stdout)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kOk : cli::kUsage;
    }

    int max_qubits = kDefaultMaxQubits;
    try {
        max_qubits = cli::max_qubits_from_env();
    } catch (const std::exception& e) {
        std::cerr << "wfqd: " << e.what() << '\n';
        return cli::kUsage;
    }

    try {
        if (wf->parsed()) {
            SweepConfig c;
            c.experiment = Experiment::Wf;
            c.n_f = cli::parse_int_list(nf_list);
            c.n_e = cli::parse_int_list(ne_list);
            c.p0 = p0;
            apply_common(c, wf_flags, max_qubits);
            emit(c, wf_flags);
        } else if (ewfs->parsed()) {
            SweepConfig c;
            c.experiment = Experiment::Ewfs;
            c.n_c = cli::parse_int_list(nc_list);
            c.n_ec = cli::parse_int_list(nec_list);
            c.n_d = nd;
            c.n_ed = ned;
            c.theta = theta;
            apply_common(c, ewfs_flags, max_qubits);
            emit(c, ewfs_flags);
        } else if (pre->parsed()) {
            SweepConfig c = preset(preset_name);
            const int samples = pre->count("--samples") > 0 ? pre_flags.samples : c.n_samples;
            apply_common(c, pre_flags, max_qubits);
            c.n_samples = samples;
            emit(c, pre_flags);
        } else if (ins->parsed()) {
            if (1 + ins_nf + ins_ne > cli::kInspectMaxQubits) {
                throw ResourceLimitError("inspect: 1 + n_f + n_e = " + std::to_string(1 + ins_nf + ins_ne) +
                                         " exceeds the dense limit of " + std::to_string(cli::kInspectMaxQubits) +
                                         " qubits");
            }
            WfConfig cfg;
            cfg.layout = LabLayout(ins_nf, ins_ne, max_qubits);
            cfg.p0 = ins_p0;
            cfg.force_dense = true;
            const auto state = equilibrate(cfg, ins_seed, static_cast<std::uint64_t>(ins_sample));
            std::ostringstream comment;
            comment << "|rho_L| n_f=" << ins_nf << " n_e=" << ins_ne << " p0=" << format_double(ins_p0)
                    << " seed=" << ins_seed << " sample=" << ins_sample;
            if (ins_out == "-") {
                cli::write_density_dump(std::cout, lab_density(state), comment.str());
            } else {
                std::ofstream os(ins_out);
                if (!os) throw std::runtime_error("cannot open output file '" + ins_out + "'");
                cli::write_density_dump(os, lab_density(state), comment.str());
            }
        }
    } catch (const ResourceLimitError& e) {
        std::cerr << "wfqd: resource limit: " << e.what() << '\n';
        return cli::kResource;
    } catch (const DimensionError& e) {
        std::cerr << "wfqd: internal failure: " << e.what() << '\n';
        return cli::kInternal;
    } catch (const InvariantError& e) {
        std::cerr << "wfqd: internal failure: " << e.what() << '\n';
        return cli::kInternal;
    } catch (const std::invalid_argument& e) {
        std::cerr << "wfqd: invalid arguments: " << e.what() << '\n';
        return cli::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "wfqd: internal failure: " << e.what() << '\n';
        return cli::kInternal;
    }
    return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
