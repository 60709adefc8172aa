#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rankmargin/hmc.hpp"
#include "rankmargin/mathutil.hpp"

namespace rankmargin {

struct ParameterDiagnostics {
    std::string name;
    double rhat = std::numeric_limits<double>::quiet_NaN();
    double ess_bulk = std::numeric_limits<double>::quiet_NaN();
    double mcse = std::numeric_limits<double>::quiet_NaN();
    bool fixed = false;    // pinned column, excluded from gating
    bool flagged = false;  // rhat above threshold or undefined
};

struct Diagnostics {
    std::vector<ParameterDiagnostics> params;
    long divergences = 0;
    long treedepth_hits = 0;
    double rhat_threshold = 1.01;

    bool any_bad_rhat() const {
        for (const auto& p : params)
            if (p.flagged) return true;
        return false;
    }
    bool ok() const { return !any_bad_rhat() && divergences == 0; }
};

namespace diag_detail {

// Split each chain's draws in half; with odd length the middle draw is dropped.
inline std::vector<std::vector<double>> split_sequences(const PosteriorDraws& draws, int d) {
    std::vector<std::vector<double>> seqs;
    const int half = draws.n_samples / 2;
    for (int c = 0; c < draws.n_chains; ++c) {
        std::vector<double> first, second;
        for (int s = 0; s < half; ++s) first.push_back(draws.at(c, s, d));
        for (int s = draws.n_samples - half; s < draws.n_samples; ++s)
            second.push_back(draws.at(c, s, d));
        seqs.push_back(std::move(first));
        seqs.push_back(std::move(second));
    }
    return seqs;
}

// Rank-normalize pooled values: average ranks for ties, mapped through the
// normal quantile function (offset 3/8 rule).
inline void rank_normalize(std::vector<std::vector<double>>& seqs) {
    struct Entry {
        double value;
        std::size_t seq, pos;
    };
    std::vector<Entry> all;
    for (std::size_t j = 0; j < seqs.size(); ++j)
        for (std::size_t i = 0; i < seqs[j].size(); ++i) all.push_back({seqs[j][i], j, i});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });
    const double S = static_cast<double>(all.size());
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        const double z = normal_quantile((avg_rank - 0.375) / (S + 0.25));
        for (std::size_t k = i; k < j; ++k) seqs[all[k].seq][all[k].pos] = z;
        i = j;
    }
}

// Classic split R-hat over a set of equal-length sequences.
inline double rhat_of(const std::vector<std::vector<double>>& seqs) {
    const std::size_t m = seqs.size();
    const double n = static_cast<double>(seqs[0].size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& s : seqs) {
        means.push_back(mean(s));
        w += sample_variance(s);
    }
    w /= static_cast<double>(m);
    const double b_over_n = sample_variance(means);
    if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double var_plus = (n - 1.0) / n * w + b_over_n;
    return std::sqrt(var_plus / w);
}

// Effective sample size via Geyer's initial monotone positive sequence.
inline double ess_of(const std::vector<std::vector<double>>& seqs) {
    const std::size_t m = seqs.size();
    const std::size_t n = seqs[0].size();
    if (n < 4) return std::numeric_limits<double>::quiet_NaN();

    // per-sequence autocovariances, biased (denominator n)
    std::vector<std::vector<double>> acov(m);
    std::vector<double> means(m);
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = mean(seqs[j]);
        acov[j].resize(n, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i + t < n; ++i)
                s += (seqs[j][i] - means[j]) * (seqs[j][i + t] - means[j]);
            acov[j][t] = s / static_cast<double>(n);
        }
    }

    double mean_var = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean_var += acov[j][0];
    mean_var = mean_var / static_cast<double>(m) * static_cast<double>(n) /
               static_cast<double>(n - 1);
    double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
    if (m > 1) var_plus += sample_variance(means);
    if (var_plus <= 0.0) return std::numeric_limits<double>::quiet_NaN();

    auto rho = [&](std::size_t t) {
        double a = 0.0;
        for (std::size_t j = 0; j < m; ++j) a += acov[j][t];
        a /= static_cast<double>(m);
        return 1.0 - (mean_var - a) / var_plus;
    };

    // paired sums, truncated at the first negative pair, forced non-increasing
    double tau = 1.0;  // rho_0
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
        if (t + 3 >= n) break;
    }

    const double total = static_cast<double>(m) * static_cast<double>(n);
    double ess = total / tau;
    // antithetic chains can push ESS above the draw count; cap the inflation
    ess = std::min(ess, total * std::log10(std::max(total, 10.0)));
    return ess;
}

}  // namespace diag_detail

// Convergence diagnostics: rank-normalized split R-hat and bulk ESS per
// parameter, plus sampler event counts.
inline Diagnostics diagnose(const PosteriorDraws& draws, double rhat_threshold = 1.01) {
    if (draws.n_chains < 2)
        throw std::invalid_argument("diagnose: need at least 2 chains for split R-hat");
    if (draws.n_samples < 100)
        throw std::invalid_argument("diagnose: need at least 100 samples per chain");

    Diagnostics out;
    out.rhat_threshold = rhat_threshold;
    for (const auto& cs : draws.chain_stats) {
        out.divergences += cs.divergences;
        out.treedepth_hits += cs.treedepth_hits;
    }

    for (int d = 0; d < draws.n_dim; ++d) {
        ParameterDiagnostics pd;
        pd.name = d < static_cast<int>(draws.names.size()) ? draws.names[d]
                                                           : "param" + std::to_string(d);
        pd.fixed = d < static_cast<int>(draws.fixed_mask.size()) && draws.fixed_mask[d];

        auto seqs = diag_detail::split_sequences(draws, d);
        const bool constant = std::all_of(seqs.begin(), seqs.end(), [&](const auto& s) {
            return std::all_of(s.begin(), s.end(), [&](double v) { return v == seqs[0][0]; });
        });
        if (!constant) {
            diag_detail::rank_normalize(seqs);
            pd.rhat = diag_detail::rhat_of(seqs);
            pd.ess_bulk = diag_detail::ess_of(seqs);
            const auto pooled = draws.pooled_column(d);
            if (pd.ess_bulk > 0.0) pd.mcse = sample_sd(pooled) / std::sqrt(pd.ess_bulk);
        }
        pd.flagged = !pd.fixed && (!std::isfinite(pd.rhat) || pd.rhat > rhat_threshold);
        out.params.push_back(std::move(pd));
    }
    return out;
}

}  // namespace rankmargin
