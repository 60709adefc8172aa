#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankmargin/csv.hpp"
#include "rankmargin/hmc.hpp"
#include "rankmargin/mathutil.hpp"
#include "rankmargin/match_data.hpp"
#include "rankmargin/model.hpp"
#include "rankmargin/posterior.hpp"

namespace rankmargin {

// Probability the first player wins when the margin is normal(mu, sigma).
inline double win_probability(double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("win_probability: sigma must be > 0");
    return normal_cdf(mu / sigma);
}

// The six possible best-of-5 margins, in order.
inline constexpr std::array<int, 6> kDiscreteOutcomes = {-3, -2, -1, 1, 2, 3};

// Bin a normal(mu, sigma) margin onto the discrete outcomes. Cut points are
// {-2.5, -1.5, 0, 1.5, 2.5}; the central interval is split at zero between
// -1 and +1, so the impossible 0 outcome carries no mass.
inline std::array<double, 6> discretize_margin(double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("discretize_margin: sigma must be > 0");
    auto cdf = [&](double c) { return normal_cdf((c - mu) / sigma); };
    const double f_m25 = cdf(-2.5), f_m15 = cdf(-1.5), f_0 = cdf(0.0), f_15 = cdf(1.5),
                 f_25 = cdf(2.5);
    return {f_m25,        f_m15 - f_m25, f_0 - f_m15,
            f_15 - f_0,   f_25 - f_15,   1.0 - f_25};
}

struct MatchupQuery {
    std::string label;
    int rank1 = 1;
    int rank2 = 1;
    std::optional<std::string> venue_country;
    bool p1_home = false;
    bool p2_home = false;
    std::optional<ModelVariant> model_variant;  // validated against the draws when set

    int b() const {
        if (p1_home && !p2_home) return 1;
        if (p2_home && !p1_home) return -1;
        return 0;
    }
};

struct PredictiveScenario {
    double mean_margin = 0.0;
    double lo68 = 0.0;
    double hi68 = 0.0;
    double win_probability = 0.0;
    std::array<double, 6> discrete{};  // over {-3,-2,-1,1,2,3}
};

struct PredictiveSummary {
    PredictiveScenario with_home;
    PredictiveScenario without_home;
};

namespace predict_detail {

inline int draws_max_rank(const PosteriorDraws& draws) {
    int max_rank = 1;
    for (const auto& n : draws.names)
        if (n.size() > 2 && n.rfind("a[", 0) == 0)
            max_rank = std::max(max_rank, std::stoi(n.substr(2, n.size() - 3)));
    return max_rank;
}

inline bool draws_have_country_columns(const PosteriorDraws& draws) {
    for (const auto& n : draws.names)
        if (n.rfind("h_", 0) == 0) return true;
    return false;
}

// Quantile of the posterior-mixture margin distribution by bisection on the
// mixed normal CDF; exact up to floating tolerance, no Monte Carlo noise.
inline double mixture_quantile(const std::vector<double>& mus, const std::vector<double>& sigmas,
                               double p) {
    double lo = mus[0], hi = mus[0], smax = sigmas[0];
    for (std::size_t i = 0; i < mus.size(); ++i) {
        lo = std::min(lo, mus[i]);
        hi = std::max(hi, mus[i]);
        smax = std::max(smax, sigmas[i]);
    }
    lo -= 12.0 * smax;
    hi += 12.0 * smax;
    auto cdf = [&](double q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < mus.size(); ++i)
            acc += normal_cdf((q - mus[i]) / sigmas[i]);
        return acc / static_cast<double>(mus.size());
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * (1.0 + std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

inline PredictiveScenario scenario_from(const std::vector<double>& mus,
                                        const std::vector<double>& sigmas) {
    PredictiveScenario s;
    double mean_acc = 0.0, win_acc = 0.0;
    std::array<double, 6> dist{};
    for (std::size_t i = 0; i < mus.size(); ++i) {
        mean_acc += mus[i];
        win_acc += normal_cdf(mus[i] / sigmas[i]);
        const auto d = discretize_margin(mus[i], sigmas[i]);
        for (std::size_t k = 0; k < 6; ++k) dist[k] += d[k];
    }
    const double n = static_cast<double>(mus.size());
    s.mean_margin = mean_acc / n;
    s.win_probability = win_acc / n;
    for (auto& v : dist) v /= n;
    s.discrete = dist;
    s.lo68 = mixture_quantile(mus, sigmas, 0.16);
    s.hi68 = mixture_quantile(mus, sigmas, 0.84);
    return s;
}

}  // namespace predict_detail

// Predictive margin distribution for a matchup, integrating over the
// posterior draws (or a plug-in at the posterior mean when plugin = true).
// with_home applies the query's home encoding; without_home forces b = 0.
inline PredictiveSummary predictive_margin(const PosteriorDraws& draws, const MatchupQuery& query,
                                           bool plugin = false) {
    const int max_rank = predict_detail::draws_max_rank(draws);
    if (query.rank1 < 1 || query.rank1 > max_rank || query.rank2 < 1 || query.rank2 > max_rank)
        throw std::invalid_argument("predictive_margin: rank out of range [1," +
                                    std::to_string(max_rank) + "]");
    const bool have_country = predict_detail::draws_have_country_columns(draws);
    if (query.model_variant) {
        const bool want_country = *query.model_variant == ModelVariant::CountryIntercepts;
        if (want_country != have_country)
            throw std::invalid_argument(
                "predictive_margin: model variant mismatch between draws and query");
    }
    if (!draws.has_column("sigma_y"))
        throw std::invalid_argument("predictive_margin: draws lack a sigma_y column");

    const int b = query.b();
    const int col_h = draws.column_index("h");
    const int col_sy = draws.column_index("sigma_y");
    int col_hc = -1;
    if (b != 0 && query.venue_country) {
        const std::string name = "h_" + to_lower(*query.venue_country);
        if (draws.has_column(name)) col_hc = draws.column_index(name);
    }
    const int col_a1 = query.rank1 > 1
                           ? draws.column_index("a[" + std::to_string(query.rank1) + "]")
                           : -1;
    const int col_a2 = query.rank2 > 1
                           ? draws.column_index("a[" + std::to_string(query.rank2) + "]")
                           : -1;

    std::vector<double> mu_home, mu_nohome, sigma;
    for (int c = 0; c < draws.n_chains; ++c) {
        for (int s = 0; s < draws.n_samples; ++s) {
            const double a1 = col_a1 >= 0 ? draws.at(c, s, col_a1) : 0.0;
            const double a2 = col_a2 >= 0 ? draws.at(c, s, col_a2) : 0.0;
            const double base = a1 - a2;
            double home = base + draws.at(c, s, col_h) * b;
            if (col_hc >= 0) home += draws.at(c, s, col_hc) * b;
            mu_home.push_back(home);
            mu_nohome.push_back(base);
            sigma.push_back(draws.at(c, s, col_sy));
        }
    }
    if (plugin) {
        const double mh = mean(mu_home), mn = mean(mu_nohome), ms = mean(sigma);
        mu_home = {mh};
        mu_nohome = {mn};
        sigma = {ms};
    }

    PredictiveSummary out;
    out.with_home = predict_detail::scenario_from(mu_home, sigma);
    out.without_home = predict_detail::scenario_from(mu_nohome, sigma);
    return out;
}

struct MatchupRow {
    std::string label;
    int rank1 = 0;
    int rank2 = 0;
    std::string venue;  // empty when no venue
    int b = 0;
    double mean_home = 0.0, lo68_home = 0.0, hi68_home = 0.0;
    double mean_nohome = 0.0, lo68_nohome = 0.0, hi68_nohome = 0.0;
    double win_prob_home = 0.0, win_prob_nohome = 0.0;
    std::optional<double> actual;

    bool operator==(const MatchupRow&) const = default;
};

struct MatchupReport {
    std::vector<MatchupRow> rows;
    bool operator==(const MatchupReport&) const = default;
};

// One row per matchup, in query order; actuals (when given) align by index.
inline MatchupReport matchup_report(const PosteriorDraws& draws,
                                    const std::vector<MatchupQuery>& queries,
                                    const std::vector<std::optional<double>>& actuals = {},
                                    bool plugin = false) {
    MatchupReport report;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        const auto summary = predictive_margin(draws, q, plugin);
        MatchupRow row;
        row.label = q.label;
        row.rank1 = q.rank1;
        row.rank2 = q.rank2;
        row.venue = q.venue_country.value_or("");
        row.b = q.b();
        row.mean_home = summary.with_home.mean_margin;
        row.lo68_home = summary.with_home.lo68;
        row.hi68_home = summary.with_home.hi68;
        row.mean_nohome = summary.without_home.mean_margin;
        row.lo68_nohome = summary.without_home.lo68;
        row.hi68_nohome = summary.without_home.hi68;
        row.win_prob_home = summary.with_home.win_probability;
        row.win_prob_nohome = summary.without_home.win_probability;
        if (i < actuals.size()) row.actual = actuals[i];
        report.rows.push_back(std::move(row));
    }
    return report;
}

inline const char* kReportHeader =
    "label,rank1,rank2,venue,b,mean_home,lo68_home,hi68_home,mean_nohome,lo68_nohome,"
    "hi68_nohome,win_prob_home,win_prob_nohome,actual";

inline std::string report_to_csv(const MatchupReport& report) {
    std::string out = std::string(kReportHeader) + "\n";
    for (const auto& r : report.rows)
        out += csv_join({r.label, std::to_string(r.rank1), std::to_string(r.rank2), r.venue,
                         std::to_string(r.b), format_double(r.mean_home),
                         format_double(r.lo68_home), format_double(r.hi68_home),
                         format_double(r.mean_nohome), format_double(r.lo68_nohome),
                         format_double(r.hi68_nohome), format_double(r.win_prob_home),
                         format_double(r.win_prob_nohome),
                         r.actual ? format_double(*r.actual) : ""});
    return out;
}

inline MatchupReport report_from_csv(std::string_view text) {
    const CsvTable table = parse_csv(text);
    MatchupReport report;
    for (const auto& row : table.rows) {
        if (row.size() != 14) throw DataError("malformed report row");
        MatchupRow r;
        r.label = row[0];
        r.rank1 = std::stoi(row[1]);
        r.rank2 = std::stoi(row[2]);
        r.venue = row[3];
        r.b = std::stoi(row[4]);
        r.mean_home = std::strtod(row[5].c_str(), nullptr);
        r.lo68_home = std::strtod(row[6].c_str(), nullptr);
        r.hi68_home = std::strtod(row[7].c_str(), nullptr);
        r.mean_nohome = std::strtod(row[8].c_str(), nullptr);
        r.lo68_nohome = std::strtod(row[9].c_str(), nullptr);
        r.hi68_nohome = std::strtod(row[10].c_str(), nullptr);
        r.win_prob_home = std::strtod(row[11].c_str(), nullptr);
        r.win_prob_nohome = std::strtod(row[12].c_str(), nullptr);
        if (!row[13].empty()) r.actual = std::strtod(row[13].c_str(), nullptr);
        report.rows.push_back(std::move(r));
    }
    return report;
}

inline nlohmann::json report_to_json(const MatchupReport& report) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row = {{"label", r.label},
                              {"rank1", r.rank1},
                              {"rank2", r.rank2},
                              {"venue", r.venue},
                              {"b", r.b},
                              {"mean_home", r.mean_home},
                              {"lo68_home", r.lo68_home},
                              {"hi68_home", r.hi68_home},
                              {"mean_nohome", r.mean_nohome},
                              {"lo68_nohome", r.lo68_nohome},
                              {"hi68_nohome", r.hi68_nohome},
                              {"win_prob_home", r.win_prob_home},
                              {"win_prob_nohome", r.win_prob_nohome}};
        row["actual"] = r.actual ? nlohmann::json(*r.actual) : nlohmann::json();
        j.push_back(std::move(row));
    }
    return j;
}

}  // namespace rankmargin
