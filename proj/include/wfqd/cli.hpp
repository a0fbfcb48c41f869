#pragma once

#include <charconv>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wfqd/qcore.hpp"
#include "wfqd/wf_model.hpp"

namespace wfqd::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kResource = 3 };

inline int parse_int(std::string_view s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

/// "a..b" (inclusive) and comma-separated items, e.g. "1..3,5".
inline std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view item = text.substr(0, comma);
        if (item.empty()) throw std::invalid_argument("empty item in list");
        if (const auto dots = item.find(".."); dots != std::string_view::npos) {
            const int lo = parse_int(item.substr(0, dots));
            const int hi = parse_int(item.substr(dots + 2));
            if (hi < lo) throw std::invalid_argument("descending range '" + std::string(item) + "'");
            for (int v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(parse_int(item));
        }
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
        if (text.empty()) throw std::invalid_argument("trailing comma in list");
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

/// Qubit budget: WFQD_MAX_QUBITS when set, otherwise the default.
inline int max_qubits_from_env() {
    if (const char* env = std::getenv("WFQD_MAX_QUBITS"); env != nullptr && *env != '\0') {
        const int v = parse_int(env);
        if (v < 2) throw std::invalid_argument("WFQD_MAX_QUBITS must be >= 2");
        return v;
    }
    return kDefaultMaxQubits;
}

inline constexpr int kInspectMaxQubits = 8;

/// Matrix-market coordinate dump of |ρ_L| entries; exact zeros are omitted.
inline void write_density_dump(std::ostream& os, const Matrix& rho, std::string_view comment) {
    std::size_t nnz = 0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
        for (Eigen::Index j = 0; j < rho.cols(); ++j) nnz += std::abs(rho(i, j)) != 0.0 ? 1 : 0;
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << "% " << comment << '\n';
    os << rho.rows() << ' ' << rho.cols() << ' ' << nnz << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        for (Eigen::Index j = 0; j < rho.cols(); ++j) {
            const double m = std::abs(rho(i, j));
            if (m == 0.0) continue;
            const auto res = std::to_chars(buf, buf + sizeof buf, m);
            os << i + 1 << ' ' << j + 1 << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
        }
    }
}

}  // namespace wfqd::cli
