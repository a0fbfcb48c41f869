#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "wfqd/discrimination.hpp"
#include "wfqd/ewfs_model.hpp"
#include "wfqd/wf_model.hpp"

namespace wfqd {

enum class Experiment { Wf, Ewfs };

inline std::string_view to_string(Experiment e) { return e == Experiment::Wf ? "wf" : "ewfs"; }

struct SweepConfig {
    Experiment experiment = Experiment::Wf;
    std::vector<int> n_f{1};
    std::vector<int> n_e{1};
    std::vector<int> n_c{1};
    std::vector<int> n_ec{1};
    int n_d = 1;
    int n_ed = 1;
    double p0 = 0.5;
    double theta = std::numbers::pi / 4.0;
    int n_samples = 200;
    std::uint64_t seed = 42;
    int threads = 1;
    bool dense = false;
    int max_qubits = kDefaultMaxQubits;
    double degeneracy_tol = 1e-9;

    void validate() const {
        if (n_samples < 1) throw std::invalid_argument("SweepConfig: n_samples must be >= 1");
        if (experiment == Experiment::Wf) {
            if (n_f.empty() || n_e.empty()) throw std::invalid_argument("SweepConfig: empty n_f/n_e range");
            if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("SweepConfig: p0 must lie in [0, 1]");
            for (int f : n_f)
                for (int e : n_e) LabLayout(f, e, max_qubits);
        } else {
            if (n_c.empty() || n_ec.empty()) throw std::invalid_argument("SweepConfig: empty n_c/n_ec range");
            for (int c : n_c)
                for (int ec : n_ec) ewfs_point(c, ec).validate();
        }
    }

    WfConfig wf_point(int f, int e) const {
        WfConfig wc;
        wc.layout = LabLayout(f, e, max_qubits);
        wc.p0 = p0;
        wc.degeneracy_tol = degeneracy_tol;
        wc.force_dense = dense;
        return wc;
    }

    EwfsConfig ewfs_point(int c, int ec) const {
        EwfsConfig cfg;
        cfg.n_c = c;
        cfg.n_ec = ec;
        cfg.n_d = n_d;
        cfg.n_ed = n_ed;
        cfg.theta = theta;
        cfg.degeneracy_tol = degeneracy_tol;
        cfg.max_qubits = max_qubits;
        cfg.force_dense = dense;
        return cfg;
    }
};

/// One aggregated data point. Layout fields not used by the experiment are empty.
struct SweepRecord {
    Experiment experiment = Experiment::Wf;
    std::optional<int> n_f, n_e, n_c, n_ec, n_d, n_ed;
    double p0 = 0.5;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;
    double sem = 0.0;
    int n_samples = 0;
    std::uint64_t seed = 0;
    double zero_rank_fraction = 0.0;
};

/// Per-sample values of one layout point, in sample order.
struct SampleTable {
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> values;  // [sample][metric]
    std::vector<bool> zero_rank;              // [sample]
};

inline const std::vector<std::string>& wf_metric_names() {
    static const std::vector<std::string> names{
        "friend_overlap", "env_overlap", "misid_10", "misid_01", "e0", "e1", "p_w_i",
        "p_f_i", "p_f_j", "p_w_j", "p_b_j", "epsilon_abs", "delta_abs"};
    return names;
}

inline const std::vector<std::string>& ewfs_metric_names() {
    static const std::vector<std::string> names{"friend_overlap", "env_overlap", "varepsilon", "lf_bound"};
    return names;
}

struct SampleResult {
    std::vector<double> values;
    bool zero_rank = false;
};

inline SampleResult wf_sample(const WfConfig& cfg, std::uint64_t seed, std::uint64_t index) {
    const auto state = equilibrate(cfg, seed, index);
    const auto ov = overlap_metrics(state);
    const auto r = wf_probabilities(state);
    return {{ov.friend_overlap, ov.env_overlap, r.misid_10, r.misid_01, r.e0, r.e1, r.p_w_i, r.p_f_i,
             r.p_f_j, r.p_w_j, r.p_b_j, r.epsilon, r.delta},
            r.any_zero_rank()};
}

inline SampleResult ewfs_sample(const EwfsConfig& cfg, std::uint64_t seed, std::uint64_t index) {
    const auto state = equilibrate_ewfs(cfg, seed, index);
    const auto lf = lf_epsilon(state, Lab::C);
    const auto povm = helstrom(state.rho_c[0].dense, state.rho_c[1].dense, state.p_c(0));
    const bool zero = povm.m0().trace().real() < 0.5 || povm.m1().trace().real() < 0.5;
    return {{overlap(state.rho_c[0], state.rho_c[1]), overlap(state.rho_ec[0], state.rho_ec[1]),
             lf.varepsilon, lf.bound},
            zero};
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results land by index.
template <typename Fn>
std::vector<SampleResult> parallel_samples(int n, int threads, Fn fn) {
    std::vector<SampleResult> out(static_cast<std::size_t>(n));
    const int workers = std::max(1, std::min(threads, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    out[static_cast<std::size_t>(i)] = fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

// Sample standard deviation (n - 1); zero for a single sample.
inline Moments moments(const std::vector<double>& xs) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) m.mean += x;
    m.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / (n - 1.0));
    }
    return m;
}

}  // namespace detail

/// Aggregates per-sample values into records. `epsilon` and `delta` are the
/// disagreements of the ensemble-mean probabilities; their sd is that of the
/// per-sample difference.
inline std::vector<SweepRecord> aggregate(const SweepRecord& base, const SampleTable& table) {
    const std::size_t n = table.values.size();
    auto column = [&](std::string_view name) {
        const auto it = std::find(table.metrics.begin(), table.metrics.end(), name);
        const auto k = static_cast<std::size_t>(it - table.metrics.begin());
        std::vector<double> col(n);
        for (std::size_t s = 0; s < n; ++s) col[s] = table.values[s][k];
        return col;
    };
    const double zero_fraction =
        static_cast<double>(std::count(table.zero_rank.begin(), table.zero_rank.end(), true)) /
        static_cast<double>(n);
    std::vector<SweepRecord> out;
    auto emit = [&](std::string name, double mean, double sd) {
        SweepRecord r = base;
        r.metric = std::move(name);
        r.mean = mean;
        r.sd = sd;
        r.sem = sd / std::sqrt(static_cast<double>(n));
        r.n_samples = static_cast<int>(n);
        r.zero_rank_fraction = zero_fraction;
        out.push_back(std::move(r));
    };
    for (const auto& name : table.metrics) {
        if (name == "p_f_i") continue;
        const auto m = detail::moments(column(name));
        emit(name, m.mean, m.sd);
    }
    if (base.experiment == Experiment::Wf) {
        auto disagreement = [&](std::string name, const std::vector<double>& w, const std::vector<double>& f) {
            std::vector<double> diff(n);
            for (std::size_t s = 0; s < n; ++s) diff[s] = w[s] - f[s];
            const auto m = detail::moments(diff);
            emit(std::move(name), std::abs(m.mean), m.sd);
        };
        disagreement("epsilon", column("p_w_i"), column("p_f_i"));
        disagreement("delta", column("p_w_j"), column("p_f_j"));
    }
    return out;
}

struct SweepPoint {
    SweepRecord base;
    SampleTable table;
};

/// Evaluates every layout point of the sweep; per-sample tables are kept for raw output.
inline std::vector<SweepPoint> run_sweep_points(const SweepConfig& config) {
    config.validate();
    std::vector<SweepPoint> points;
    const int n = config.n_samples;
    if (config.experiment == Experiment::Wf) {
        for (int e : config.n_e) {
            for (int f : config.n_f) {
                const auto cfg = config.wf_point(f, e);
                SweepPoint pt;
                pt.base.experiment = Experiment::Wf;
                pt.base.n_f = f;
                pt.base.n_e = e;
                pt.base.p0 = config.p0;
                pt.base.seed = config.seed;
                pt.table.metrics = wf_metric_names();
                auto results = detail::parallel_samples(n, config.threads, [&](int i) {
                    return wf_sample(cfg, config.seed, static_cast<std::uint64_t>(i));
                });
                for (auto& r : results) {
                    pt.table.values.push_back(std::move(r.values));
                    pt.table.zero_rank.push_back(r.zero_rank);
                }
                points.push_back(std::move(pt));
            }
        }
    } else {
        for (int ec : config.n_ec) {
            for (int c : config.n_c) {
                const auto cfg = config.ewfs_point(c, ec);
                SweepPoint pt;
                pt.base.experiment = Experiment::Ewfs;
                pt.base.n_c = c;
                pt.base.n_ec = ec;
                pt.base.n_d = config.n_d;
                pt.base.n_ed = config.n_ed;
                pt.base.p0 = 0.5;  // source marginal p(c=0), independent of theta
                pt.base.seed = config.seed;
                pt.table.metrics = ewfs_metric_names();
                auto results = detail::parallel_samples(n, config.threads, [&](int i) {
                    return ewfs_sample(cfg, config.seed, static_cast<std::uint64_t>(i));
                });
                for (auto& r : results) {
                    pt.table.values.push_back(std::move(r.values));
                    pt.table.zero_rank.push_back(r.zero_rank);
                }
                points.push_back(std::move(pt));
            }
        }
    }
    return points;
}

inline std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
    std::vector<SweepRecord> out;
    for (const auto& pt : run_sweep_points(config)) {
        auto recs = aggregate(pt.base, pt.table);
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig3", "fig4", "fig8", "fig9", "fig10", "fig11"};
    return names;
}

inline SweepConfig preset(std::string_view name) {
    SweepConfig c;
    c.n_samples = 200;
    if (name == "fig3" || name == "fig4" || name == "fig9" || name == "fig10" || name == "fig11") {
        c.experiment = Experiment::Wf;
        c.n_f = {1, 2, 3, 4, 5};
        c.n_e = {2, 3, 4};
        c.p0 = (name == "fig3" || name == "fig4") ? 0.5 : 0.75;
        return c;
    }
    if (name == "fig8") {
        c.experiment = Experiment::Ewfs;
        c.n_c = {1, 2, 3, 4, 5, 6};
        c.n_ec = {1, 2, 3};
        c.n_d = 1;
        c.n_ed = 1;
        c.p0 = 0.5;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

// CSV ----------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "experiment,n_f,n_e,n_c,n_ec,n_d,n_ed,p0,metric,mean,sd,sem,n_samples,seed,zero_rank_fraction";

inline constexpr std::string_view kRawCsvHeader =
    "experiment,n_f,n_e,n_c,n_ec,n_d,n_ed,p0,sample,seed,metric,value,zero_rank";

/// Shortest representation that round-trips.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string opt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

inline std::string layout_fields(const SweepRecord& r) {
    return std::string(to_string(r.experiment)) + ',' + opt(r.n_f) + ',' + opt(r.n_e) + ',' + opt(r.n_c) +
           ',' + opt(r.n_ec) + ',' + opt(r.n_d) + ',' + opt(r.n_ed) + ',' + format_double(r.p0);
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
    os << kCsvHeader << '\n';
    for (const auto& r : records) {
        os << detail::layout_fields(r) << ',' << r.metric << ',' << format_double(r.mean) << ','
           << format_double(r.sd) << ',' << format_double(r.sem) << ',' << r.n_samples << ','
           << r.seed << ',' << format_double(r.zero_rank_fraction) << '\n';
    }
}

inline void write_raw_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    os << kRawCsvHeader << '\n';
    for (const auto& pt : points) {
        const std::string prefix = detail::layout_fields(pt.base);
        for (std::size_t s = 0; s < pt.table.values.size(); ++s) {
            for (std::size_t k = 0; k < pt.table.metrics.size(); ++k) {
                os << prefix << ',' << s << ',' << pt.base.seed << ',' << pt.table.metrics[k] << ','
                   << format_double(pt.table.values[s][k]) << ',' << (pt.table.zero_rank[s] ? 1 : 0)
                   << '\n';
            }
        }
    }
}

}  // namespace wfqd
