#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankmargin/csv.hpp"
#include "rankmargin/hmc.hpp"
#include "rankmargin/mathutil.hpp"

namespace rankmargin {

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;  // posterior sd; the "standard error" of reported effects
    double q5 = 0.0, q16 = 0.0, q50 = 0.0, q84 = 0.0, q95 = 0.0;
};

// Per-parameter moments and quantiles over all chains pooled.
inline std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
    if (draws.total_draws() == 0) throw std::invalid_argument("summarize: empty draws");
    std::vector<ParameterSummary> out;
    for (int d = 0; d < draws.n_dim; ++d) {
        ParameterSummary s;
        s.name = d < static_cast<int>(draws.names.size()) ? draws.names[d]
                                                          : "param" + std::to_string(d);
        auto xs = draws.pooled_column(d);
        s.mean = mean(xs);
        s.sd = sample_sd(xs);
        std::sort(xs.begin(), xs.end());
        s.q5 = quantile_sorted(xs, 0.05);
        s.q16 = quantile_sorted(xs, 0.16);
        s.q50 = quantile_sorted(xs, 0.50);
        s.q84 = quantile_sorted(xs, 0.84);
        s.q95 = quantile_sorted(xs, 0.95);
        out.push_back(std::move(s));
    }
    return out;
}

struct AbilityPoint {
    int rank = 0;
    double mean = 0.0;
    double sd = 0.0;
    double q16 = 0.0;
    double q84 = 0.0;
};

// Estimated ability by world-ranking slot. Rank 1 is the pinned constant
// (0, 0); both the +/- sd and the 16/84% interval conventions are reported.
inline std::vector<AbilityPoint> ability_curve(const PosteriorDraws& draws) {
    int max_rank = 1;
    for (const auto& n : draws.names)
        if (n.size() > 2 && n.rfind("a[", 0) == 0)
            max_rank = std::max(max_rank, std::stoi(n.substr(2, n.size() - 3)));
    std::vector<AbilityPoint> curve;
    curve.push_back({1, 0.0, 0.0, 0.0, 0.0});
    for (int j = 2; j <= max_rank; ++j) {
        auto xs = draws.pooled_column(draws.column_index("a[" + std::to_string(j) + "]"));
        AbilityPoint p;
        p.rank = j;
        p.mean = mean(xs);
        p.sd = sample_sd(xs);
        std::sort(xs.begin(), xs.end());
        p.q16 = quantile_sorted(xs, 0.16);
        p.q84 = quantile_sorted(xs, 0.84);
        curve.push_back(p);
    }
    return curve;
}

// Average ability gap between adjacent ranking slots over the top_n ranks.
// For a monotone curve this telescopes to (a_1 - a_topn) / (top_n - 1).
inline double mean_rank_gap(const std::vector<AbilityPoint>& curve, int top_n) {
    if (top_n < 2) throw std::invalid_argument("mean_rank_gap: top_n must be >= 2");
    if (top_n > static_cast<int>(curve.size()))
        throw std::invalid_argument("mean_rank_gap: top_n exceeds curve length");
    double acc = 0.0;
    for (int j = 0; j + 1 < top_n; ++j) acc += std::abs(curve[j].mean - curve[j + 1].mean);
    return acc / static_cast<double>(top_n - 1);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string summaries_to_csv(const std::vector<ParameterSummary>& summaries) {
    std::string out = "name,mean,sd,q5,q16,q50,q84,q95\n";
    for (const auto& s : summaries)
        out += csv_join({s.name, format_double(s.mean), format_double(s.sd), format_double(s.q5),
                         format_double(s.q16), format_double(s.q50), format_double(s.q84),
                         format_double(s.q95)});
    return out;
}

inline nlohmann::json summaries_to_json(const std::vector<ParameterSummary>& summaries) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : summaries)
        j.push_back({{"name", s.name},
                     {"mean", s.mean},
                     {"sd", s.sd},
                     {"q5", s.q5},
                     {"q16", s.q16},
                     {"q50", s.q50},
                     {"q84", s.q84},
                     {"q95", s.q95}});
    return j;
}

inline std::string ability_curve_to_csv(const std::vector<AbilityPoint>& curve) {
    std::string out = "rank,mean,sd,q16,q84\n";
    for (const auto& p : curve)
        out += csv_join({std::to_string(p.rank), format_double(p.mean), format_double(p.sd),
                         format_double(p.q16), format_double(p.q84)});
    return out;
}

}  // namespace rankmargin
