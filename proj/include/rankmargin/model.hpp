#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankmargin/match_data.hpp"
#include "rankmargin/mathutil.hpp"

namespace rankmargin {

enum class ModelVariant { Global, CountryIntercepts };

struct PriorScales {
    double h_scale = 0.5;
    double country_scale = 0.2;
    double beta_scale = 2.0;
    double gamma_scale = 2.0;
    double sigma_scale = 2.0;
};

struct ModelSpec {
    ModelVariant variant = ModelVariant::Global;
    int max_rank = 30;  // R: abilities are modeled for ranking slots 1..R
    std::vector<std::string> tracked_countries;  // empty for the global model
    PriorScales prior_scales;

    // full unconstrained dimension: (R-1) abilities + h + country intercepts
    // + beta + gamma + two log scales
    int dimension() const {
        return (max_rank - 1) + 1 + static_cast<int>(tracked_countries.size()) + 2 + 2;
    }
};

inline ModelSpec make_spec(ModelVariant variant, int max_rank = 30,
                           std::vector<std::string> tracked_countries = {},
                           PriorScales prior_scales = {}) {
    if (max_rank < 2) throw std::invalid_argument("make_spec: max_rank must be >= 2");
    if (prior_scales.h_scale <= 0 || prior_scales.country_scale <= 0 ||
        prior_scales.beta_scale <= 0 || prior_scales.gamma_scale <= 0 ||
        prior_scales.sigma_scale <= 0)
        throw std::invalid_argument("make_spec: prior scales must be positive");
    ModelSpec spec;
    spec.variant = variant;
    spec.max_rank = max_rank;
    spec.prior_scales = prior_scales;
    if (variant == ModelVariant::CountryIntercepts) {
        spec.tracked_countries =
            tracked_countries.empty() ? default_tracked_countries() : std::move(tracked_countries);
    }
    return spec;
}

// Index map for one point in unconstrained parameter space. Order:
// a_2..a_R, h, country intercepts, beta, gamma, log_sigma_y, log_sigma_a.
// In fixed-scale mode the two log scales are absent.
struct ParameterLayout {
    int max_rank = 30;
    int n_tracked = 0;
    bool sample_scales = true;

    int dim() const { return max_rank + n_tracked + (sample_scales ? 4 : 2); }

    // rank j in [2, R]
    int ability_index(int rank) const { return rank - 2; }
    int h_index() const { return max_rank - 1; }
    int country_index(int k) const { return max_rank + k; }
    int beta_index() const { return max_rank + n_tracked; }
    int gamma_index() const { return max_rank + n_tracked + 1; }
    int log_sigma_y_index() const { return max_rank + n_tracked + 2; }
    int log_sigma_a_index() const { return max_rank + n_tracked + 3; }
};

// One point in parameter space, stored unconstrained (positive scales on the
// log scale). The top-ranked ability a_1 is pinned at zero and not stored.
class ParameterVector {
  public:
    ParameterVector(ParameterLayout layout, std::vector<double> values)
        : layout_(layout), values_(std::move(values)) {
        if (static_cast<int>(values_.size()) != layout_.dim())
            throw std::invalid_argument("ParameterVector: dimension mismatch");
    }
    explicit ParameterVector(ParameterLayout layout)
        : layout_(layout), values_(static_cast<std::size_t>(layout.dim()), 0.0) {}

    const ParameterLayout& layout() const { return layout_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }

    double ability(int rank) const {
        if (rank < 1 || rank > layout_.max_rank)
            throw std::out_of_range("ability: rank out of range [1," +
                                    std::to_string(layout_.max_rank) + "]");
        return rank == 1 ? 0.0 : values_[layout_.ability_index(rank)];
    }
    void set_ability(int rank, double v) {
        if (rank < 2 || rank > layout_.max_rank)
            throw std::out_of_range("set_ability: rank out of range [2,R]");
        values_[layout_.ability_index(rank)] = v;
    }

    double h() const { return values_[layout_.h_index()]; }
    void set_h(double v) { values_[layout_.h_index()] = v; }

    double country_h(int k) const { return values_[layout_.country_index(k)]; }
    void set_country_h(int k, double v) { values_[layout_.country_index(k)] = v; }

    double beta() const { return values_[layout_.beta_index()]; }
    void set_beta(double v) { values_[layout_.beta_index()] = v; }
    double gamma() const { return values_[layout_.gamma_index()]; }
    void set_gamma(double v) { values_[layout_.gamma_index()] = v; }

    double sigma_y() const {
        return layout_.sample_scales ? std::exp(values_[layout_.log_sigma_y_index()]) : 1.0;
    }
    double sigma_a() const {
        return layout_.sample_scales ? std::exp(values_[layout_.log_sigma_a_index()]) : 1.0;
    }
    void set_log_sigma_y(double v) { values_[layout_.log_sigma_y_index()] = v; }
    void set_log_sigma_a(double v) { values_[layout_.log_sigma_a_index()] = v; }

  private:
    ParameterLayout layout_;
    std::vector<double> values_;
};

// ability lookup honoring the a_1 = 0 identifiability constraint
inline double ability(const ParameterVector& params, int rank) { return params.ability(rank); }

struct LogDensityResult {
    double log_density = 0.0;
    std::vector<double> gradient;
};

struct FixedScales {
    double sigma_y = 1.0;
    double sigma_a = 1.0;
};

// Joint log posterior of the margin model, bound to one dataset. Evaluates
// the density and its exact gradient in unconstrained coordinates; this is
// the target handed to the sampler.
class Model {
  public:
    Model(ModelSpec spec, const EncodedDataset& data,
          std::optional<FixedScales> fixed_scales = std::nullopt)
        : spec_(std::move(spec)), fixed_scales_(fixed_scales) {
        if (data.matches.empty()) throw DataError("no matches after filtering");
        layout_.max_rank = spec_.max_rank;
        layout_.n_tracked = static_cast<int>(spec_.tracked_countries.size());
        layout_.sample_scales = !fixed_scales_.has_value();
        if (fixed_scales_ && (fixed_scales_->sigma_y <= 0 || fixed_scales_->sigma_a <= 0))
            throw std::invalid_argument("fixed scales must be positive");
        if (spec_.variant == ModelVariant::CountryIntercepts &&
            data.tracked_countries != spec_.tracked_countries)
            throw DataError("dataset tracked countries do not match the model spec");

        const int K = layout_.n_tracked;
        rank1_.reserve(data.matches.size());
        for (const auto& m : data.matches) {
            if (m.rank1_idx < 1 || m.rank1_idx > spec_.max_rank || m.rank2_idx < 1 ||
                m.rank2_idx > spec_.max_rank)
                throw DataError("encoded rank index out of range");
            rank1_.push_back(m.rank1_idx);
            rank2_.push_back(m.rank2_idx);
            b_.push_back(static_cast<double>(m.b));
            y_.push_back(m.y);
            for (int k = 0; k < K; ++k)
                bc_.push_back(static_cast<double>(
                    k < static_cast<int>(m.b_country.size()) ? m.b_country[k] : 0));
        }
    }

    const ModelSpec& spec() const { return spec_; }
    const ParameterLayout& layout() const { return layout_; }
    int dim() const { return layout_.dim(); }
    std::size_t n_matches() const { return y_.size(); }
    std::optional<FixedScales> fixed_scales() const { return fixed_scales_; }

    // Names aligned to the layout, on the reporting scale (sigma, not log sigma).
    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        for (int j = 2; j <= spec_.max_rank; ++j) names.push_back("a[" + std::to_string(j) + "]");
        names.push_back("h");
        for (const auto& c : spec_.tracked_countries) names.push_back("h_" + to_lower(c));
        names.push_back("beta");
        names.push_back("gamma");
        if (layout_.sample_scales) {
            names.push_back("sigma_y");
            names.push_back("sigma_a");
        }
        return names;
    }

    // Map an unconstrained draw to the reporting scale (exponentiates the log scales).
    std::vector<double> constrain(std::span<const double> x) const {
        check_input(x);
        std::vector<double> out(x.begin(), x.end());
        if (layout_.sample_scales) {
            out[layout_.log_sigma_y_index()] = std::exp(x[layout_.log_sigma_y_index()]);
            out[layout_.log_sigma_a_index()] = std::exp(x[layout_.log_sigma_a_index()]);
        }
        return out;
    }

    double sigma_y_of(std::span<const double> x) const {
        return fixed_scales_ ? fixed_scales_->sigma_y : std::exp(x[layout_.log_sigma_y_index()]);
    }
    double sigma_a_of(std::span<const double> x) const {
        return fixed_scales_ ? fixed_scales_->sigma_a : std::exp(x[layout_.log_sigma_a_index()]);
    }

    // Linear predictor for one match under parameters x.
    double predictor_mean(std::span<const double> x, const EncodedMatch& m) const {
        const auto& L = layout_;
        double mu = 0.0;
        if (m.rank1_idx > 1) mu += x[L.ability_index(m.rank1_idx)];
        if (m.rank2_idx > 1) mu -= x[L.ability_index(m.rank2_idx)];
        mu += x[L.h_index()] * static_cast<double>(m.b);
        for (int k = 0; k < L.n_tracked; ++k)
            if (k < static_cast<int>(m.b_country.size()) && m.b_country[k] != 0)
                mu += x[L.country_index(k)] * static_cast<double>(m.b_country[k]);
        return mu;
    }

    // Data term only (no priors, no Jacobian).
    double log_likelihood(std::span<const double> x) const {
        check_input(x);
        const double sy = sigma_y_of(x);
        const double inv_sy2 = 1.0 / (sy * sy);
        const double log_sy = std::log(sy);
        const int K = layout_.n_tracked;
        double lp = 0.0;
        for (std::size_t i = 0; i < y_.size(); ++i) {
            const double d = y_[i] - match_mean(x, i, K);
            lp += -0.5 * d * d * inv_sy2 - log_sy - 0.5 * kLog2Pi;
        }
        return lp;
    }

    // Log posterior with exact analytic gradient in unconstrained coordinates.
    // Sampler entry point.
    double logp_grad(std::span<const double> x, std::span<double> grad) const {
        check_input(x);
        if (grad.size() != static_cast<std::size_t>(layout_.dim()))
            throw std::invalid_argument("logp_grad: gradient dimension mismatch");
        std::fill(grad.begin(), grad.end(), 0.0);

        const auto& L = layout_;
        const auto& ps = spec_.prior_scales;
        const int K = L.n_tracked;
        const double sy = sigma_y_of(x);
        const double sa = sigma_a_of(x);
        const double inv_sy2 = 1.0 / (sy * sy);
        const double inv_sa2 = 1.0 / (sa * sa);
        const double log_sy = std::log(sy);
        const double log_sa = std::log(sa);

        double lp = 0.0;
        double sum_dev2 = 0.0;

        // likelihood
        for (std::size_t i = 0; i < y_.size(); ++i) {
            const double d = y_[i] - match_mean(x, i, K);
            lp += -0.5 * d * d * inv_sy2 - log_sy - 0.5 * kLog2Pi;
            sum_dev2 += d * d;
            const double e = d * inv_sy2;
            if (rank1_[i] > 1) grad[L.ability_index(rank1_[i])] += e;
            if (rank2_[i] > 1) grad[L.ability_index(rank2_[i])] -= e;
            grad[L.h_index()] += e * b_[i];
            for (int k = 0; k < K; ++k) {
                const double bck = bc_[i * K + k];
                if (bck != 0.0) grad[L.country_index(k)] += e * bck;
            }
        }

        // hierarchical prior on abilities: a_j ~ N(beta (j-1) + gamma sqrt(j-1), sigma_a)
        const double beta = x[L.beta_index()];
        const double gamma = x[L.gamma_index()];
        double sum_pdev2 = 0.0;
        for (int j = 2; j <= L.max_rank; ++j) {
            const double t = static_cast<double>(j - 1);
            const double rt = std::sqrt(t);
            const double pd = x[L.ability_index(j)] - (beta * t + gamma * rt);
            lp += -0.5 * pd * pd * inv_sa2 - log_sa - 0.5 * kLog2Pi;
            sum_pdev2 += pd * pd;
            const double ep = pd * inv_sa2;
            grad[L.ability_index(j)] -= ep;
            grad[L.beta_index()] += ep * t;
            grad[L.gamma_index()] += ep * rt;
        }

        // fixed-scale priors on the effects
        const double h = x[L.h_index()];
        lp += log_normal_pdf(h, 0.0, ps.h_scale);
        grad[L.h_index()] -= h / (ps.h_scale * ps.h_scale);
        for (int k = 0; k < K; ++k) {
            const double hc = x[L.country_index(k)];
            lp += log_normal_pdf(hc, 0.0, ps.country_scale);
            grad[L.country_index(k)] -= hc / (ps.country_scale * ps.country_scale);
        }
        lp += log_normal_pdf(beta, 0.0, ps.beta_scale);
        grad[L.beta_index()] -= beta / (ps.beta_scale * ps.beta_scale);
        lp += log_normal_pdf(gamma, 0.0, ps.gamma_scale);
        grad[L.gamma_index()] -= gamma / (ps.gamma_scale * ps.gamma_scale);

        // half-normal priors on the scales plus the log-transform Jacobian
        if (L.sample_scales) {
            const double ss2 = ps.sigma_scale * ps.sigma_scale;
            lp += log_half_normal_pdf(sy, ps.sigma_scale) + x[L.log_sigma_y_index()];
            lp += log_half_normal_pdf(sa, ps.sigma_scale) + x[L.log_sigma_a_index()];
            grad[L.log_sigma_y_index()] =
                sum_dev2 * inv_sy2 - static_cast<double>(y_.size()) - sy * sy / ss2 + 1.0;
            grad[L.log_sigma_a_index()] =
                sum_pdev2 * inv_sa2 - static_cast<double>(L.max_rank - 1) - sa * sa / ss2 + 1.0;
        }
        return lp;
    }

    LogDensityResult log_posterior(std::span<const double> x) const {
        LogDensityResult res;
        res.gradient.resize(layout_.dim());
        res.log_density = logp_grad(x, res.gradient);
        return res;
    }
    LogDensityResult log_posterior(const ParameterVector& params) const {
        return log_posterior(params.values());
    }

  private:
    double match_mean(std::span<const double> x, std::size_t i, int K) const {
        const auto& L = layout_;
        double mu = 0.0;
        if (rank1_[i] > 1) mu += x[L.ability_index(rank1_[i])];
        if (rank2_[i] > 1) mu -= x[L.ability_index(rank2_[i])];
        mu += x[L.h_index()] * b_[i];
        for (int k = 0; k < K; ++k) {
            const double bck = bc_[i * K + k];
            if (bck != 0.0) mu += x[L.country_index(k)] * bck;
        }
        return mu;
    }

    void check_input(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(layout_.dim()))
            throw std::invalid_argument("parameter dimension mismatch: expected " +
                                        std::to_string(layout_.dim()) + ", got " +
                                        std::to_string(x.size()));
        for (double v : x)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite parameter value");
    }

    ModelSpec spec_;
    std::optional<FixedScales> fixed_scales_;
    ParameterLayout layout_;
    std::vector<int> rank1_, rank2_;
    std::vector<double> b_, y_;
    std::vector<double> bc_;  // n_matches x n_tracked, row-major
};

// Linear predictor a_r1 - a_r2 + h b (+ country terms) for a single match.
inline double predictor_mean(const ParameterVector& params, const EncodedMatch& m) {
    double mu = params.ability(m.rank1_idx) - params.ability(m.rank2_idx) +
                params.h() * static_cast<double>(m.b);
    for (int k = 0; k < params.layout().n_tracked; ++k)
        if (k < static_cast<int>(m.b_country.size()) && m.b_country[k] != 0)
            mu += params.country_h(k) * static_cast<double>(m.b_country[k]);
    return mu;
}

}  // namespace rankmargin
