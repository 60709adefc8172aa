#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rankmargin/mathutil.hpp"
#include "rankmargin/rng.hpp"

namespace rankmargin {

struct SamplerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SamplerConfig {
    int chains = 4;
    int warmup = 1000;
    int samples = 1000;
    double target_accept = 0.8;
    int max_treedepth = 10;
    std::uint64_t seed = 0;
    double init_radius = 2.0;  // uniform init in [-r, r] per coordinate
    bool adapt = true;         // dual-averaging step size + diagonal metric
    double step_size = 1.0;    // starting point (fixed step when adapt = false)
    int max_threads = 0;       // 0: RANKMARGIN_THREADS env or hardware

    void validate() const {
        if (chains < 1) throw std::invalid_argument("chains must be >= 1");
        if (samples < 1) throw std::invalid_argument("samples must be >= 1");
        if (adapt && warmup < 150)
            throw std::invalid_argument("warmup must be >= 150 when adaptation is enabled");
        if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw std::invalid_argument("target_accept must be in (0,1)");
        if (max_treedepth < 1) throw std::invalid_argument("max_treedepth must be >= 1");
        if (!(init_radius > 0.0)) throw std::invalid_argument("init_radius must be > 0");
        if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
    }
};

struct ChainStats {
    long divergences = 0;
    long treedepth_hits = 0;
    double mean_accept = 0.0;  // post-warmup mean acceptance statistic
    double step_size = 0.0;
    std::vector<double> inv_mass;  // adapted diagonal metric (posterior variances)
};

// Post-warmup draws across chains. For model fits the sigma columns are on
// the constrained (positive) scale; fixed_mask marks columns that were pinned
// rather than sampled.
struct PosteriorDraws {
    std::vector<std::string> names;
    int n_chains = 0;
    int n_samples = 0;
    int n_dim = 0;
    std::vector<double> draws;  // [chain][sample][dim]
    std::vector<ChainStats> chain_stats;
    std::vector<bool> fixed_mask;

    double at(int chain, int sample, int d) const {
        return draws[(static_cast<std::size_t>(chain) * n_samples + sample) * n_dim + d];
    }
    std::span<const double> draw(int chain, int sample) const {
        return {&draws[(static_cast<std::size_t>(chain) * n_samples + sample) * n_dim],
                static_cast<std::size_t>(n_dim)};
    }
    int column_index(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw std::out_of_range("no such parameter: " + name);
        return static_cast<int>(it - names.begin());
    }
    bool has_column(const std::string& name) const {
        return std::find(names.begin(), names.end(), name) != names.end();
    }
    // all chains pooled, chain-major order
    std::vector<double> pooled_column(int d) const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(n_chains) * n_samples);
        for (int c = 0; c < n_chains; ++c)
            for (int s = 0; s < n_samples; ++s) out.push_back(at(c, s, d));
        return out;
    }
    std::size_t total_draws() const { return static_cast<std::size_t>(n_chains) * n_samples; }
};

namespace hmc_detail {

constexpr double kDivergenceThreshold = 1000.0;  // energy error marking a divergence
constexpr double kInvMassFloor = 1e-10;
constexpr double kInvMassCeil = 1e10;

// Evaluate the target, mapping exceptions and non-finite results to -inf so
// a blown-up trajectory registers as a divergence instead of aborting.
template <class Target>
double safe_eval(const Target& target, std::span<const double> x, std::span<double> grad) {
    double lp;
    try {
        lp = target.logp_grad(x, grad);
    } catch (...) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    for (double g : grad)
        if (!std::isfinite(g)) return -std::numeric_limits<double>::infinity();
    return lp;
}

struct PhasePoint {
    std::vector<double> x;
    std::vector<double> r;
    std::vector<double> grad;
    double logp = 0.0;
};

// One leapfrog step; eps carries the direction sign. inv_mass scales the
// position update (velocity = inv_mass * momentum).
template <class Target>
void leapfrog(const Target& target, PhasePoint& z, double eps,
              std::span<const double> inv_mass) {
    const std::size_t n = z.x.size();
    for (std::size_t j = 0; j < n; ++j) z.r[j] += 0.5 * eps * z.grad[j];
    for (std::size_t j = 0; j < n; ++j) z.x[j] += eps * inv_mass[j] * z.r[j];
    z.logp = safe_eval(target, z.x, z.grad);
    for (std::size_t j = 0; j < n; ++j) z.r[j] += 0.5 * eps * z.grad[j];
}

inline double kinetic(std::span<const double> r, std::span<const double> inv_mass) {
    double k = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) k += inv_mass[j] * r[j] * r[j];
    return 0.5 * k;
}

inline double hamiltonian(const PhasePoint& z, std::span<const double> inv_mass) {
    return -z.logp + kinetic(z.r, inv_mass);
}

}  // namespace hmc_detail

// Exposed for integrator-level tests (reversibility, energy conservation).
template <class Target>
void leapfrog_step(const Target& target, std::vector<double>& x, std::vector<double>& r,
                   std::vector<double>& grad, double eps, std::span<const double> inv_mass) {
    hmc_detail::PhasePoint z{x, r, grad, 0.0};
    hmc_detail::leapfrog(target, z, eps, inv_mass);
    x = z.x;
    r = z.r;
    grad = z.grad;
}

namespace hmc_detail {

// Dual-averaging step-size controller (standard constants).
class DualAveraging {
  public:
    void restart(double eps) {
        mu_ = std::log(10.0 * eps);
        log_eps_ = std::log(eps);
        log_eps_bar_ = 0.0;
        h_bar_ = 0.0;
        counter_ = 0;
    }
    void update(double accept_prob, double target) {
        ++counter_;
        const double m = static_cast<double>(counter_);
        h_bar_ = (1.0 - 1.0 / (m + kT0)) * h_bar_ + (target - accept_prob) / (m + kT0);
        log_eps_ = mu_ - std::sqrt(m) / kGamma * h_bar_;
        const double w = std::pow(m, -kKappa);
        log_eps_bar_ = w * log_eps_ + (1.0 - w) * log_eps_bar_;
    }
    double current() const { return std::exp(log_eps_); }
    double averaged() const { return std::exp(log_eps_bar_); }

  private:
    static constexpr double kGamma = 0.05;
    static constexpr double kT0 = 10.0;
    static constexpr double kKappa = 0.75;
    double mu_ = 0.0, log_eps_ = 0.0, log_eps_bar_ = 0.0, h_bar_ = 0.0;
    long counter_ = 0;
};

// Stan-style warmup schedule: fast start, doubling slow windows for the
// metric, fast tail for the step size.
class AdaptWindows {
  public:
    AdaptWindows(int warmup, int init_buffer = 75, int term_buffer = 50, int base_window = 25) {
        const int slow_total = warmup - init_buffer - term_buffer;
        int start = init_buffer;
        int size = base_window;
        while (start < init_buffer + slow_total) {
            int end = start + size;
            // absorb the remainder if the next doubling would not fit
            if (end + 2 * size > init_buffer + slow_total) end = init_buffer + slow_total;
            window_ends_.push_back(end);
            start = end;
            size *= 2;
        }
        init_buffer_ = init_buffer;
        slow_end_ = init_buffer + slow_total;
    }
    bool in_slow(int iter) const { return iter >= init_buffer_ && iter < slow_end_; }
    bool window_end(int iter) const {
        return std::find(window_ends_.begin(), window_ends_.end(), iter + 1) !=
               window_ends_.end();
    }

  private:
    std::vector<int> window_ends_;
    int init_buffer_ = 0;
    int slow_end_ = 0;
};

struct Tree {
    bool valid = false;
    bool divergent = false;
    double log_w = -std::numeric_limits<double>::infinity();
    std::vector<double> proposal;
    PhasePoint inner;  // first leaf generated (closest to the start)
    PhasePoint outer;  // farthest leaf
};

// U-turn test between two phase points; dx taken in integration order and
// corrected by the direction sign.
inline bool uturn(const PhasePoint& inner, const PhasePoint& outer, double v,
                  std::span<const double> inv_mass) {
    double p_inner = 0.0, p_outer = 0.0;
    for (std::size_t j = 0; j < inner.x.size(); ++j) {
        const double dx = outer.x[j] - inner.x[j];
        p_inner += dx * inv_mass[j] * inner.r[j];
        p_outer += dx * inv_mass[j] * outer.r[j];
    }
    return v * p_inner < 0.0 || v * p_outer < 0.0;
}

template <class Target>
class ChainRunner {
  public:
    ChainRunner(const Target& target, const SamplerConfig& config, int chain_index)
        : target_(target),
          config_(config),
          rng_(config.seed, static_cast<std::uint64_t>(chain_index)),
          dim_(static_cast<std::size_t>(target.dim())),
          inv_mass_(dim_, 1.0) {}

    // Runs warmup + sampling; appends post-warmup draws to `out` (sample-major).
    ChainStats run(std::vector<double>& out) {
        PhasePoint z;
        z.x = initialize();
        z.r.assign(dim_, 0.0);
        z.grad.assign(dim_, 0.0);
        z.logp = safe_eval(target_, z.x, z.grad);

        double eps = config_.step_size;
        DualAveraging da;
        if (config_.adapt) {
            eps = find_reasonable_step_size(z);
            da.restart(eps);
        }
        AdaptWindows windows(config_.warmup);
        std::vector<Welford> var_acc(dim_);

        ChainStats stats;
        double accept_sum = 0.0;

        for (int iter = 0; iter < config_.warmup + config_.samples; ++iter) {
            const bool warm = iter < config_.warmup;
            const auto res = transition(z, eps);
            if (res.divergent && !warm) ++stats.divergences;
            if (res.treedepth_hit && !warm) ++stats.treedepth_hits;

            if (warm && config_.adapt) {
                da.update(res.accept_stat, config_.target_accept);
                eps = da.current();
                if (windows.in_slow(iter))
                    for (std::size_t j = 0; j < dim_; ++j) var_acc[j].add(z.x[j]);
                if (windows.window_end(iter) && var_acc[0].count() >= 2) {
                    const double n = static_cast<double>(var_acc[0].count());
                    const double w = n / (n + 5.0);
                    for (std::size_t j = 0; j < dim_; ++j) {
                        const double v = w * var_acc[j].variance() + (1.0 - w) * 1e-3;
                        inv_mass_[j] = std::clamp(v, kInvMassFloor, kInvMassCeil);
                        var_acc[j] = Welford{};
                    }
                    eps = find_reasonable_step_size(z);
                    da.restart(eps);
                }
                if (iter + 1 == config_.warmup) eps = da.averaged();
            }
            if (!warm) {
                accept_sum += res.accept_stat;
                out.insert(out.end(), z.x.begin(), z.x.end());
            }
        }
        stats.mean_accept = accept_sum / static_cast<double>(config_.samples);
        stats.step_size = eps;
        stats.inv_mass = inv_mass_;
        return stats;
    }

  private:
    struct TransitionResult {
        double accept_stat = 0.0;
        bool divergent = false;
        bool treedepth_hit = false;
    };

    std::vector<double> initialize() {
        for (int attempt = 0; attempt < 100; ++attempt) {
            std::vector<double> x(dim_);
            for (auto& v : x) v = rng_.uniform(-config_.init_radius, config_.init_radius);
            std::vector<double> grad(dim_);
            if (std::isfinite(safe_eval(target_, x, grad))) return x;
        }
        throw SamplerError("failed to find a valid initial point in 100 attempts");
    }

    void sample_momentum(PhasePoint& z) {
        for (std::size_t j = 0; j < dim_; ++j) z.r[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
    }

    // Doubling/halving heuristic: adjust eps until one leapfrog step has
    // acceptance probability on the 0.5 boundary.
    double find_reasonable_step_size(const PhasePoint& start) {
        double eps = config_.step_size;
        PhasePoint z = start;
        sample_momentum(z);
        const double h0 = hamiltonian(z, inv_mass_);
        auto log_accept = [&](double e) {
            PhasePoint trial = z;
            leapfrog(target_, trial, e, inv_mass_);
            const double h1 = hamiltonian(trial, inv_mass_);
            return std::isfinite(h1) ? h0 - h1 : -std::numeric_limits<double>::infinity();
        };
        double la = log_accept(eps);
        const double dir = la > std::log(0.5) ? 1.0 : -1.0;
        for (int i = 0; i < 50; ++i) {
            if (dir > 0 ? la <= std::log(0.5) : la > std::log(0.5)) break;
            eps *= dir > 0 ? 2.0 : 0.5;
            if (eps > 1e7 || eps < 1e-10) break;
            la = log_accept(eps);
        }
        return std::clamp(eps, 1e-10, 1e7);
    }

    // One NUTS transition with multinomial sampling across the trajectory.
    TransitionResult transition(PhasePoint& z, double eps) {
        sample_momentum(z);
        const double h0 = hamiltonian(z, inv_mass_);

        PhasePoint z_bwd = z;  // backward extreme, trajectory order
        PhasePoint z_fwd = z;
        std::vector<double> proposal = z.x;
        double log_w_total = 0.0;  // weight of the initial point
        leaf_accept_sum_ = 0.0;
        n_leapfrog_ = 0;
        divergent_ = false;

        TransitionResult res;
        bool exhausted = true;
        for (int depth = 0; depth < config_.max_treedepth; ++depth) {
            const double v = rng_.bernoulli_half() ? 1.0 : -1.0;
            PhasePoint& grow = v > 0 ? z_fwd : z_bwd;
            Tree sub = build_tree(depth, grow, v, eps, h0);
            if (!sub.valid) {
                exhausted = false;
                break;
            }
            if (std::log(rng_.uniform_pos()) < sub.log_w - log_w_total)
                proposal = sub.proposal;
            log_w_total = log_sum_exp(log_w_total, sub.log_w);
            // whole-trajectory u-turn check (canonical orientation: v = +1)
            if (uturn(z_bwd, z_fwd, 1.0, inv_mass_)) {
                exhausted = false;
                break;
            }
        }
        res.treedepth_hit = exhausted;
        res.divergent = divergent_;
        res.accept_stat =
            n_leapfrog_ > 0 ? leaf_accept_sum_ / static_cast<double>(n_leapfrog_) : 0.0;

        z.x = proposal;
        z.logp = safe_eval(target_, z.x, z.grad);
        return res;
    }

    // Builds a subtree of 2^depth leaves, advancing `z` in place along
    // direction v. On an invalid subtree the caller discards everything.
    Tree build_tree(int depth, PhasePoint& z, double v, double eps, double h0) {
        Tree tree;
        if (depth == 0) {
            leapfrog(target_, z, v * eps, inv_mass_);
            ++n_leapfrog_;
            const double h = hamiltonian(z, inv_mass_);
            const double delta = std::isfinite(h) ? h - h0 : std::numeric_limits<double>::infinity();
            if (delta > kDivergenceThreshold) {
                divergent_ = true;
                return tree;  // invalid
            }
            tree.valid = true;
            tree.log_w = -delta;
            leaf_accept_sum_ += std::min(1.0, std::exp(-delta));
            tree.proposal = z.x;
            tree.inner = z;
            tree.outer = z;
            return tree;
        }

        Tree left = build_tree(depth - 1, z, v, eps, h0);
        if (!left.valid) return left;
        Tree right = build_tree(depth - 1, z, v, eps, h0);
        if (!right.valid) return right;

        tree.log_w = log_sum_exp(left.log_w, right.log_w);
        // multinomial choice between the two halves
        tree.proposal = std::log(rng_.uniform_pos()) < right.log_w - tree.log_w
                            ? std::move(right.proposal)
                            : std::move(left.proposal);
        tree.inner = std::move(left.inner);
        tree.outer = std::move(right.outer);
        tree.valid = !uturn(tree.inner, tree.outer, v, inv_mass_);
        return tree;
    }

    const Target& target_;
    const SamplerConfig& config_;
    Rng rng_;
    std::size_t dim_;
    std::vector<double> inv_mass_;
    double leaf_accept_sum_ = 0.0;
    long n_leapfrog_ = 0;
    bool divergent_ = false;
};

inline int resolve_threads(const SamplerConfig& config) {
    int threads = config.max_threads;
    if (threads <= 0) {
        if (const char* env = std::getenv("RANKMARGIN_THREADS")) threads = std::atoi(env);
    }
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
    return std::min(threads, config.chains);
}

}  // namespace hmc_detail

// Draw posterior samples from any log-density-with-gradient target. Chains
// run on independent RNG substreams and are merged by chain index, so a
// fixed (config, seed, target) gives identical output at any thread count.
template <class Target>
PosteriorDraws sample(const Target& target, const SamplerConfig& config) {
    config.validate();
    const int dim = target.dim();
    PosteriorDraws out;
    out.n_chains = config.chains;
    out.n_samples = config.samples;
    out.n_dim = dim;
    out.draws.resize(static_cast<std::size_t>(config.chains) * config.samples * dim);
    out.chain_stats.resize(config.chains);
    out.fixed_mask.assign(dim, false);

    std::vector<std::exception_ptr> errors(config.chains);
    auto run_chain = [&](int c) {
        try {
            hmc_detail::ChainRunner<Target> runner(target, config, c);
            std::vector<double> buf;
            buf.reserve(static_cast<std::size_t>(config.samples) * dim);
            out.chain_stats[c] = runner.run(buf);
            std::copy(buf.begin(), buf.end(),
                      out.draws.begin() + static_cast<std::size_t>(c) * config.samples * dim);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };

    const int n_threads = hmc_detail::resolve_threads(config);
    if (n_threads <= 1) {
        for (int c = 0; c < config.chains; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (int c = t; c < config.chains; c += n_threads) run_chain(c);
            });
        for (auto& th : pool) th.join();
    }
    for (int c = 0; c < config.chains; ++c)
        if (errors[c]) std::rethrow_exception(errors[c]);
    return out;
}

}  // namespace rankmargin
