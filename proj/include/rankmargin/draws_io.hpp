#pragma once

#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "rankmargin/csv.hpp"
#include "rankmargin/hmc.hpp"
#include "rankmargin/posterior.hpp"

namespace rankmargin {

// Draws as column-ordered CSV: chain and iteration first, then one column
// per parameter, one row per post-warmup draw. %.17g keeps the round trip
// bit-exact.
inline std::string draws_to_csv(const PosteriorDraws& draws) {
    std::string out = "chain,iteration";
    for (const auto& n : draws.names) out += "," + csv_escape(n);
    out += '\n';
    for (int c = 0; c < draws.n_chains; ++c)
        for (int s = 0; s < draws.n_samples; ++s) {
            out += std::to_string(c + 1);
            out += ',';
            out += std::to_string(s + 1);
            for (int d = 0; d < draws.n_dim; ++d) {
                out += ',';
                out += format_double(draws.at(c, s, d));
            }
            out += '\n';
        }
    return out;
}

inline PosteriorDraws draws_from_csv(std::string_view text) {
    const CsvTable table = parse_csv(text);
    if (table.header.size() < 3 || table.header[0] != "chain" || table.header[1] != "iteration")
        throw std::runtime_error("draws file: expected header chain,iteration,<parameters>");
    PosteriorDraws draws;
    draws.names.assign(table.header.begin() + 2, table.header.end());
    draws.n_dim = static_cast<int>(draws.names.size());

    std::map<int, long> per_chain;
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::runtime_error("draws file: ragged row");
        ++per_chain[std::atoi(row[0].c_str())];
    }
    if (per_chain.empty()) throw std::runtime_error("draws file: no draws");
    draws.n_chains = static_cast<int>(per_chain.size());
    draws.n_samples = static_cast<int>(per_chain.begin()->second);
    for (const auto& [chain, count] : per_chain)
        if (count != draws.n_samples)
            throw std::runtime_error("draws file: chains have unequal lengths");

    draws.draws.reserve(table.rows.size() * draws.n_dim);
    for (const auto& row : table.rows)
        for (int d = 0; d < draws.n_dim; ++d)
            draws.draws.push_back(std::strtod(row[d + 2].c_str(), nullptr));
    draws.chain_stats.resize(draws.n_chains);
    draws.fixed_mask.assign(draws.n_dim, false);
    return draws;
}

inline PosteriorDraws read_draws_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open draws file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return draws_from_csv(buf.str());
}

}  // namespace rankmargin
