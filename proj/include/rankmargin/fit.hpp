#pragma once

#include <cmath>
#include <vector>

#include "rankmargin/hmc.hpp"
#include "rankmargin/model.hpp"

namespace rankmargin {

// Run the sampler on a model target and return named draws on the reporting
// scale. In fixed-scale mode the pinned sigmas are appended as constant
// columns (marked in fixed_mask) so downstream consumers always see them.
inline PosteriorDraws fit_model(const Model& model, const SamplerConfig& config) {
    PosteriorDraws draws = sample(model, config);
    const auto& layout = model.layout();
    draws.names = model.parameter_names();

    if (layout.sample_scales) {
        const int iy = layout.log_sigma_y_index();
        const int ia = layout.log_sigma_a_index();
        for (int c = 0; c < draws.n_chains; ++c)
            for (int s = 0; s < draws.n_samples; ++s) {
                auto* row = &draws.draws[(static_cast<std::size_t>(c) * draws.n_samples + s) *
                                         draws.n_dim];
                row[iy] = std::exp(row[iy]);
                row[ia] = std::exp(row[ia]);
            }
        return draws;
    }

    const auto fixed = *model.fixed_scales();
    PosteriorDraws out;
    out.names = draws.names;
    out.names.push_back("sigma_y");
    out.names.push_back("sigma_a");
    out.n_chains = draws.n_chains;
    out.n_samples = draws.n_samples;
    out.n_dim = draws.n_dim + 2;
    out.chain_stats = draws.chain_stats;
    out.fixed_mask.assign(out.n_dim, false);
    out.fixed_mask[out.n_dim - 2] = true;
    out.fixed_mask[out.n_dim - 1] = true;
    out.draws.reserve(static_cast<std::size_t>(out.n_chains) * out.n_samples * out.n_dim);
    for (int c = 0; c < draws.n_chains; ++c)
        for (int s = 0; s < draws.n_samples; ++s) {
            const auto row = draws.draw(c, s);
            out.draws.insert(out.draws.end(), row.begin(), row.end());
            out.draws.push_back(fixed.sigma_y);
            out.draws.push_back(fixed.sigma_a);
        }
    return out;
}

}  // namespace rankmargin
