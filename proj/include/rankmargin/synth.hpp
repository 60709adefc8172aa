#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rankmargin/match_data.hpp"
#include "rankmargin/model.hpp"
#include "rankmargin/rng.hpp"

namespace rankmargin {

// Ground-truth parameters for data generation; unlike ParameterVector the
// pinned a_1 = 0 is stored explicitly and scales are on the natural scale.
struct TrueParams {
    std::vector<double> abilities;  // size R, abilities[0] is rank 1
    double h = 0.4;
    std::map<std::string, double> country_h;
    double beta = -0.05;
    double gamma = -0.45;
    double sigma_y = 1.9;
    double sigma_a = 0.2;

    int max_rank() const { return static_cast<int>(abilities.size()); }

    void validate() const {
        if (abilities.size() < 2) throw std::invalid_argument("TrueParams: need >= 2 abilities");
        if (abilities[0] != 0.0)
            throw std::invalid_argument("TrueParams: rank-1 ability must be 0");
        if (!(sigma_y > 0.0) || !(sigma_a > 0.0))
            throw std::invalid_argument("TrueParams: scales must be > 0");
    }
};

// Defaults shaped like the fitted curves: decreasing abilities with a mean
// top-20 gap around 0.15 games, h = 0.4, sigma_y = 1.9.
inline TrueParams default_true_params(int max_rank = 30) {
    TrueParams tp;
    tp.abilities.resize(max_rank);
    for (int j = 1; j <= max_rank; ++j) {
        const double t = static_cast<double>(j - 1);
        tp.abilities[j - 1] = tp.beta * t + tp.gamma * std::sqrt(t);
    }
    tp.country_h = {{"EGY", 0.05}, {"ENG", 0.0}, {"USA", 0.0}};
    return tp;
}

struct ScheduleEntry {
    int rank1 = 1;
    int rank2 = 2;
    int b = 0;
    std::string venue;  // concrete country code
};

// Venue mix and home-indicator frequencies shaped like the men's sample:
// about a quarter of matches in Egypt and a third in the U.S., with home
// advantage present in roughly 30% of matches overall.
inline std::vector<ScheduleEntry> make_table1_schedule(int n_matches, int max_rank,
                                                       std::uint64_t seed) {
    if (n_matches < 1) throw std::invalid_argument("schedule: n_matches must be >= 1");
    if (max_rank < 2) throw std::invalid_argument("schedule: max_rank must be >= 2");
    static const std::vector<std::pair<std::string, double>> venue_mix = {
        {"EGY", 0.246}, {"ENG", 0.188}, {"USA", 0.318}, {"other", 0.248}};
    static const std::map<std::string, double> home_prob = {
        {"EGY", 0.45}, {"ENG", 0.35}, {"USA", 0.30}, {"other", 0.10}};
    static const std::vector<std::string> other_venues = {"QAT", "MAS", "HKG", "FRA", "NZL"};

    Rng rng(seed, 0x5eedu);
    std::vector<ScheduleEntry> schedule;
    schedule.reserve(n_matches);
    for (int i = 0; i < n_matches; ++i) {
        ScheduleEntry e;
        const double u = rng.uniform();
        double acc = 0.0;
        std::string group = venue_mix.back().first;
        for (const auto& [name, p] : venue_mix) {
            acc += p;
            if (u < acc) {
                group = name;
                break;
            }
        }
        e.venue = group == "other" ? other_venues[rng.below(other_venues.size())] : group;
        e.rank1 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_rank)));
        do {
            e.rank2 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_rank)));
        } while (e.rank2 == e.rank1);
        if (rng.uniform() < home_prob.at(group)) e.b = rng.bernoulli_half() ? 1 : -1;
        schedule.push_back(std::move(e));
    }
    return schedule;
}

// Nearest valid discrete outcome; the (-1.5, 1.5) interval is split at zero
// between -1 and +1 so a zero margin can never be produced.
inline double snap_margin(double y) {
    const double a = std::abs(y);
    double m = a < 1.5 ? 1.0 : (a < 2.5 ? 2.0 : 3.0);
    return y < 0.0 ? -m : m;
}

// Draw margins from the generative model over a fixed schedule.
inline EncodedDataset generate(const TrueParams& tp, const std::vector<ScheduleEntry>& schedule,
                               std::uint64_t seed, bool discretize = true,
                               std::vector<std::string> tracked_countries =
                                   default_tracked_countries()) {
    tp.validate();
    const int R = tp.max_rank();
    EncodedDataset ds;
    ds.max_rank = R;
    ds.tracked_countries = std::move(tracked_countries);
    Rng rng(seed, 0xda7au);
    for (const auto& e : schedule) {
        if (e.rank1 < 1 || e.rank1 > R || e.rank2 < 1 || e.rank2 > R || e.b < -1 || e.b > 1)
            throw std::invalid_argument("generate: invalid schedule entry");
        EncodedMatch m;
        m.rank1_idx = e.rank1;
        m.rank2_idx = e.rank2;
        m.b = e.b;
        m.b_country.resize(ds.tracked_countries.size(), 0);
        double mu = tp.abilities[e.rank1 - 1] - tp.abilities[e.rank2 - 1] +
                    tp.h * static_cast<double>(e.b);
        for (std::size_t k = 0; k < ds.tracked_countries.size(); ++k) {
            if (e.venue == ds.tracked_countries[k]) {
                m.b_country[k] = e.b;
                auto it = tp.country_h.find(e.venue);
                if (it != tp.country_h.end()) mu += it->second * static_cast<double>(e.b);
            }
        }
        const double y = rng.normal(mu, tp.sigma_y);
        m.y = discretize ? snap_margin(y) : y;
        ds.matches.push_back(std::move(m));
    }
    return ds;
}

// Reconstruct raw match records realizing a generated dataset, so the full
// ingest pipeline can be exercised on synthetic data.
inline std::vector<MatchRecord> realize_records(const std::vector<ScheduleEntry>& schedule,
                                                const EncodedDataset& ds) {
    if (schedule.size() != ds.matches.size())
        throw std::invalid_argument("realize_records: schedule/dataset size mismatch");
    static const std::vector<std::string> away_pool = {"PER", "COL", "JPN", "IND", "SUI", "WAL"};
    static const std::vector<Tour> tours = {Tour::Gold, Tour::Platinum, Tour::Silver,
                                            Tour::Bronze};
    std::vector<MatchRecord> records;
    records.reserve(schedule.size());
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto& e = schedule[i];
        const auto& m = ds.matches[i];
        MatchRecord rec;
        rec.match_id = "synth" + std::to_string(i + 1);
        const int day_serial = static_cast<int>(i) / 4;
        rec.date = {2019 + day_serial / 360, 1 + (day_serial / 30) % 12, 1 + day_serial % 30};
        char name[8];
        std::snprintf(name, sizeof name, "P%02d", e.rank1);
        rec.player1_name = name;
        std::snprintf(name, sizeof name, "P%02d", e.rank2);
        rec.player2_name = name;
        const std::string& away1 = away_pool[i % away_pool.size()];
        const std::string& away2 = away_pool[(i + 1) % away_pool.size()];
        rec.player1_country = e.b == 1 ? e.venue : away1;
        rec.player2_country = e.b == -1 ? e.venue : away2;
        rec.venue_country = e.venue;
        rec.player1_rank = e.rank1;
        rec.player2_rank = e.rank2;
        const int margin = static_cast<int>(m.y);
        if (margin > 0) {
            rec.games_won_p1 = 3;
            rec.games_won_p2 = 3 - margin;
        } else {
            rec.games_won_p1 = 3 + margin;
            rec.games_won_p2 = 3;
        }
        rec.format = Format::BestOf5;
        rec.termination = Termination::Completed;
        rec.tour = tours[i % tours.size()];
        records.push_back(std::move(rec));
    }
    return records;
}

struct OracleResult {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> cov;  // p x p, row-major
    int dim = 0;

    double cov_at(int i, int j) const { return cov[static_cast<std::size_t>(i) * dim + j]; }
};

// Exact posterior of (a_2..a_R, h, country intercepts, beta, gamma) when the
// two scales are pinned: every model term is then Gaussian and linear, so
// the posterior follows from the normal equations. The hierarchical ability
// prior couples a_j with beta and gamma; it enters as additional rows
// a_j - beta (j-1) - gamma sqrt(j-1) = 0 with noise sigma_a.
inline OracleResult conjugate_oracle(const EncodedDataset& data, const ModelSpec& spec,
                                     double sigma_y, double sigma_a) {
    if (!(sigma_y > 0.0) || !(sigma_a > 0.0))
        throw std::invalid_argument("conjugate_oracle: scales must be > 0");
    const int R = spec.max_rank;
    const int K = static_cast<int>(spec.tracked_countries.size());
    const int p = (R - 1) + 1 + K + 2;
    const int i_h = R - 1;
    const int i_beta = R + K;
    const int i_gamma = R + K + 1;
    auto i_ability = [R](int rank) { return rank - 2; };

    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);

    auto add_row = [&](const std::vector<std::pair<int, double>>& coeffs, double obs,
                       double noise_sd) {
        const double w = 1.0 / (noise_sd * noise_sd);
        for (const auto& [i, ci] : coeffs) {
            rhs(i) += w * ci * obs;
            for (const auto& [j, cj] : coeffs) lambda(i, j) += w * ci * cj;
        }
    };

    for (const auto& m : data.matches) {
        std::vector<std::pair<int, double>> coeffs;
        if (m.rank1_idx > 1) coeffs.emplace_back(i_ability(m.rank1_idx), 1.0);
        if (m.rank2_idx > 1) coeffs.emplace_back(i_ability(m.rank2_idx), -1.0);
        // tied ranks cancel out of the predictor entirely
        if (coeffs.size() == 2 && coeffs[0].first == coeffs[1].first) coeffs.clear();
        if (m.b != 0) coeffs.emplace_back(i_h, static_cast<double>(m.b));
        for (int k = 0; k < K; ++k)
            if (k < static_cast<int>(m.b_country.size()) && m.b_country[k] != 0)
                coeffs.emplace_back(R + k, static_cast<double>(m.b_country[k]));
        add_row(coeffs, m.y, sigma_y);
    }
    for (int j = 2; j <= R; ++j) {
        const double t = static_cast<double>(j - 1);
        add_row({{i_ability(j), 1.0}, {i_beta, -t}, {i_gamma, -std::sqrt(t)}}, 0.0, sigma_a);
    }
    add_row({{i_h, 1.0}}, 0.0, spec.prior_scales.h_scale);
    for (int k = 0; k < K; ++k) add_row({{R + k, 1.0}}, 0.0, spec.prior_scales.country_scale);
    add_row({{i_beta, 1.0}}, 0.0, spec.prior_scales.beta_scale);
    add_row({{i_gamma, 1.0}}, 0.0, spec.prior_scales.gamma_scale);

    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("conjugate_oracle: singular normal equations");
    const Eigen::VectorXd mean_vec = llt.solve(rhs);
    const Eigen::MatrixXd cov_mat = llt.solve(Eigen::MatrixXd::Identity(p, p));

    OracleResult out;
    out.dim = p;
    for (int j = 2; j <= R; ++j) out.names.push_back("a[" + std::to_string(j) + "]");
    out.names.push_back("h");
    for (const auto& c : spec.tracked_countries) out.names.push_back("h_" + to_lower(c));
    out.names.push_back("beta");
    out.names.push_back("gamma");
    out.mean.assign(mean_vec.data(), mean_vec.data() + p);
    out.cov.resize(static_cast<std::size_t>(p) * p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) out.cov[static_cast<std::size_t>(i) * p + j] = cov_mat(i, j);
    return out;
}

inline nlohmann::json true_params_to_json(const TrueParams& tp) {
    return {{"abilities", tp.abilities}, {"h", tp.h},
            {"country_h", tp.country_h}, {"beta", tp.beta},
            {"gamma", tp.gamma},         {"sigma_y", tp.sigma_y},
            {"sigma_a", tp.sigma_a}};
}

}  // namespace rankmargin
