#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rankmargin/csv.hpp"

namespace rankmargin {

// Thrown for malformed input data; the CLI maps it to the usage/data exit code.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Format { BestOf5, BestOf3 };
enum class Termination { Completed, Retired, Walkover };
enum class Tour { Bronze, Silver, Gold, Platinum, WorldChampionship, TourFinals, Other };

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    bool ok() const {
        if (year < 1800 || year > 3000 || month < 1 || month > 12 || day < 1) return false;
        static constexpr int days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        int d = days[month - 1];
        const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        if (month == 2 && leap) d = 29;
        return day <= d;
    }
    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }
};

// One raw professional match as it appears in the source data.
struct MatchRecord {
    std::string match_id;
    Date date;
    std::string player1_name;
    std::string player2_name;
    std::string player1_country;
    std::string player2_country;
    std::string venue_country;
    int player1_rank = 0;
    int player2_rank = 0;
    int games_won_p1 = 0;
    int games_won_p2 = 0;
    Format format = Format::BestOf5;
    Termination termination = Termination::Completed;
    Tour tour = Tour::Other;
};

// Model-ready form of one match. b_country is aligned to the dataset's
// tracked_countries list.
struct EncodedMatch {
    int rank1_idx = 0;  // in [1, R]
    int rank2_idx = 0;
    int b = 0;  // +1 p1 home, -1 p2 home, 0 neither/both
    std::vector<int> b_country;
    double y = 0.0;  // margin in games, best-of-3 rescaled by 1.5
};

struct Provenance {
    long excluded_retired_walkover = 0;
    long excluded_rank_cutoff = 0;
    long total_excluded() const { return excluded_retired_walkover + excluded_rank_cutoff; }
};

struct EncodedDataset {
    std::vector<EncodedMatch> matches;
    int max_rank = 30;  // R
    std::vector<std::string> tracked_countries;
    Provenance provenance;
};

inline const std::vector<std::string>& default_tracked_countries() {
    static const std::vector<std::string> cc = {"EGY", "ENG", "USA"};
    return cc;
}

// ---------------------------------------------------------------------------
// field parsing

inline std::string to_upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::optional<Date> parse_date(std::string_view s) {
    Date d;
    if (std::sscanf(std::string(s).c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
        return std::nullopt;
    if (!d.ok()) return std::nullopt;
    return d;
}

inline std::optional<int> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    int v = 0;
    std::size_t i = 0;
    bool neg = false;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        i = 1;
        if (s.size() == 1) return std::nullopt;
    }
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        v = v * 10 + (s[i] - '0');
        if (v > 1000000) return std::nullopt;
    }
    return neg ? -v : v;
}

// Country codes are matched on uppercased short alpha codes (squashinfo uses
// quasi-ISO codes like ENG that are not ISO-3166, so only the shape is checked).
inline std::optional<std::string> parse_country(std::string_view s) {
    if (s.size() < 2 || s.size() > 3) return std::nullopt;
    for (char c : s)
        if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
    return to_upper(s);
}

inline std::optional<Format> parse_format(std::string_view s) {
    const std::string t = to_lower(s);
    if (t == "bo5" || t == "bestof5" || t == "best_of_5" || t == "5") return Format::BestOf5;
    if (t == "bo3" || t == "bestof3" || t == "best_of_3" || t == "3") return Format::BestOf3;
    return std::nullopt;
}

inline std::optional<Termination> parse_termination(std::string_view s) {
    const std::string t = to_lower(s);
    if (t == "completed" || t == "complete" || t == "c") return Termination::Completed;
    if (t == "retired" || t == "ret") return Termination::Retired;
    if (t == "walkover" || t == "wo" || t == "w/o") return Termination::Walkover;
    return std::nullopt;
}

inline Tour parse_tour(std::string_view s) {
    const std::string t = to_lower(s);
    if (t == "bronze") return Tour::Bronze;
    if (t == "silver") return Tour::Silver;
    if (t == "gold") return Tour::Gold;
    if (t == "platinum") return Tour::Platinum;
    if (t == "world_championship" || t == "worlds") return Tour::WorldChampionship;
    if (t == "tour_finals" || t == "finals") return Tour::TourFinals;
    return Tour::Other;
}

inline std::string format_to_string(Format f) { return f == Format::BestOf5 ? "bo5" : "bo3"; }
inline std::string termination_to_string(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::Retired: return "retired";
        default: return "walkover";
    }
}
inline std::string tour_to_string(Tour t) {
    switch (t) {
        case Tour::Bronze: return "bronze";
        case Tour::Silver: return "silver";
        case Tour::Gold: return "gold";
        case Tour::Platinum: return "platinum";
        case Tour::WorldChampionship: return "world_championship";
        case Tour::TourFinals: return "tour_finals";
        default: return "other";
    }
}

// Valid completed score for the declared format.
inline bool score_valid(int g1, int g2, Format f) {
    const int hi = std::max(g1, g2);
    const int lo = std::min(g1, g2);
    if (g1 < 0 || g2 < 0) return false;
    if (f == Format::BestOf5) return hi == 3 && lo >= 0 && lo <= 2;
    return hi == 2 && lo >= 0 && lo <= 1;
}

// ---------------------------------------------------------------------------
// CSV schema

// Column-name mapping for the input CSV. Defaults match the documented
// schema; individual names can be overridden (e.g. rank1=world_rank_1).
struct CsvSchema {
    std::map<std::string, std::string> columns = {
        {"date", "date"},           {"player1", "player1"},
        {"player2", "player2"},     {"country1", "country1"},
        {"country2", "country2"},   {"venue_country", "venue_country"},
        {"rank1", "rank1"},         {"rank2", "rank2"},
        {"games1", "games1"},       {"games2", "games2"},
        {"format", "format"},       {"termination", "termination"},
        {"tour", "tour"},
    };

    void override_column(const std::string& field, const std::string& column) {
        auto it = columns.find(field);
        if (it == columns.end()) throw DataError("unknown schema field: " + field);
        it->second = column;
    }
};

namespace detail {

struct ColumnIndex {
    std::map<std::string, std::size_t> by_field;
};

inline ColumnIndex resolve_columns(const std::vector<std::string>& header,
                                   const CsvSchema& schema) {
    ColumnIndex idx;
    std::vector<std::string> missing;
    for (const auto& [field, column] : schema.columns) {
        auto it = std::find(header.begin(), header.end(), column);
        if (it == header.end())
            missing.push_back(column);
        else
            idx.by_field[field] = static_cast<std::size_t>(it - header.begin());
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        std::string msg = "missing columns:";
        for (const auto& c : missing) msg += " " + c;
        throw DataError(msg);
    }
    return idx;
}

}  // namespace detail

// Parse raw match records out of CSV text. All malformed rows are collected
// and reported together, with 1-based data row numbers.
inline std::vector<MatchRecord> load_matches_text(std::string_view text,
                                                  const CsvSchema& schema = {}) {
    const CsvTable table = parse_csv(text);
    if (table.header.empty()) throw DataError("empty input: no header row");
    const auto idx = detail::resolve_columns(table.header, schema);

    std::vector<MatchRecord> records;
    records.reserve(table.rows.size());
    std::vector<std::string> errors;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto row_no = std::to_string(r + 1);
        if (row.size() != table.header.size()) {
            errors.push_back("row " + row_no + ": expected " +
                             std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(row.size()));
            continue;
        }
        auto field = [&](const char* name) -> const std::string& {
            return row[idx.by_field.at(name)];
        };

        MatchRecord rec;
        rec.match_id = "row" + row_no;
        bool bad = false;
        auto fail = [&](const std::string& what) {
            errors.push_back("row " + row_no + ": " + what);
            bad = true;
        };

        if (auto d = parse_date(field("date"))) rec.date = *d;
        else fail("unparseable date '" + field("date") + "'");

        rec.player1_name = field("player1");
        rec.player2_name = field("player2");

        if (auto c = parse_country(field("country1"))) rec.player1_country = *c;
        else fail("unknown country code '" + field("country1") + "'");
        if (auto c = parse_country(field("country2"))) rec.player2_country = *c;
        else fail("unknown country code '" + field("country2") + "'");
        if (auto c = parse_country(field("venue_country"))) rec.venue_country = *c;
        else fail("unknown country code '" + field("venue_country") + "'");

        if (auto v = parse_int(field("rank1")); v && *v >= 1) rec.player1_rank = *v;
        else fail("unparseable rank '" + field("rank1") + "' (must be >= 1)");
        if (auto v = parse_int(field("rank2")); v && *v >= 1) rec.player2_rank = *v;
        else fail("unparseable rank '" + field("rank2") + "' (must be >= 1)");

        if (auto v = parse_int(field("games1")); v && *v >= 0) rec.games_won_p1 = *v;
        else fail("unparseable score '" + field("games1") + "'");
        if (auto v = parse_int(field("games2")); v && *v >= 0) rec.games_won_p2 = *v;
        else fail("unparseable score '" + field("games2") + "'");

        if (auto f = parse_format(field("format"))) rec.format = *f;
        else fail("unparseable format '" + field("format") + "'");
        if (auto t = parse_termination(field("termination"))) rec.termination = *t;
        else fail("unparseable termination '" + field("termination") + "'");
        rec.tour = parse_tour(field("tour"));

        if (!bad && rec.termination == Termination::Completed &&
            !score_valid(rec.games_won_p1, rec.games_won_p2, rec.format))
            fail("invalid completed score " + std::to_string(rec.games_won_p1) + "-" +
                 std::to_string(rec.games_won_p2) + " for " + format_to_string(rec.format));

        if (!bad) records.push_back(std::move(rec));
    }

    if (!errors.empty()) {
        std::string msg = "malformed rows in input:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw DataError(msg);
    }
    return records;
}

inline std::vector<MatchRecord> load_matches(const std::string& path,
                                             const CsvSchema& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_matches_text(buf.str(), schema);
}

// ---------------------------------------------------------------------------
// filtering and encoding

struct FilterResult {
    std::vector<MatchRecord> records;
    Provenance provenance;
};

// Keep only completed matches with both players ranked inside max_rank.
// The termination rule is applied first, so a retired match between
// low-ranked players is counted once, under retirement/walkover.
inline FilterResult filter_matches(const std::vector<MatchRecord>& records, int max_rank) {
    if (max_rank < 1) throw std::invalid_argument("filter_matches: max_rank must be >= 1");
    FilterResult out;
    for (const auto& rec : records) {
        if (rec.termination != Termination::Completed) {
            ++out.provenance.excluded_retired_walkover;
            continue;
        }
        if (rec.player1_rank > max_rank || rec.player2_rank > max_rank) {
            ++out.provenance.excluded_rank_cutoff;
            continue;
        }
        out.records.push_back(rec);
    }
    return out;
}

// Home indicator: +1 iff player 1 is home and player 2 is not, -1 for the
// mirror case, 0 when neither or both are home.
inline int encode_home(std::string_view p1_country, std::string_view p2_country,
                       std::string_view venue_country) {
    const bool h1 = p1_country == venue_country;
    const bool h2 = p2_country == venue_country;
    if (h1 && !h2) return 1;
    if (h2 && !h1) return -1;
    return 0;
}

// Margin of victory in games; best-of-3 outcomes are put on the best-of-5
// scale by the 1.5 multiplier.
inline double encode_margin(int games_won_p1, int games_won_p2, Format format) {
    if (!score_valid(games_won_p1, games_won_p2, format))
        throw DataError("invalid score " + std::to_string(games_won_p1) + "-" +
                        std::to_string(games_won_p2) + " for " + format_to_string(format));
    const double diff = static_cast<double>(games_won_p1 - games_won_p2);
    return format == Format::BestOf3 ? diff * 1.5 : diff;
}

inline EncodedDataset encode_dataset(const std::vector<MatchRecord>& records, int max_rank = 30,
                                     std::vector<std::string> tracked_countries =
                                         default_tracked_countries(),
                                     Provenance provenance = {}) {
    if (records.empty()) throw DataError("no matches after filtering");
    EncodedDataset ds;
    ds.max_rank = max_rank;
    ds.tracked_countries = std::move(tracked_countries);
    ds.provenance = provenance;
    ds.matches.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.player1_rank < 1 || rec.player1_rank > max_rank || rec.player2_rank < 1 ||
            rec.player2_rank > max_rank)
            throw DataError("rank out of range [1," + std::to_string(max_rank) +
                            "] in record " + rec.match_id + " (records must be filtered first)");
        EncodedMatch m;
        m.rank1_idx = rec.player1_rank;
        m.rank2_idx = rec.player2_rank;
        m.b = encode_home(rec.player1_country, rec.player2_country, rec.venue_country);
        m.y = encode_margin(rec.games_won_p1, rec.games_won_p2, rec.format);
        m.b_country.resize(ds.tracked_countries.size(), 0);
        for (std::size_t c = 0; c < ds.tracked_countries.size(); ++c)
            if (rec.venue_country == ds.tracked_countries[c]) m.b_country[c] = m.b;
        ds.matches.push_back(std::move(m));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// reporting

struct VenueCounts {
    std::string label;
    long total = 0;
    long with_home = 0;  // matches where one player has home advantage
};

// Match counts grouped by venue, in the fixed Egypt/England/U.S./other layout.
inline std::vector<VenueCounts> count_matches(const std::vector<MatchRecord>& records) {
    std::vector<VenueCounts> table = {
        {"Egypt", 0, 0}, {"England", 0, 0}, {"U.S.", 0, 0}, {"other", 0, 0}};
    for (const auto& rec : records) {
        std::size_t i = 3;
        if (rec.venue_country == "EGY") i = 0;
        else if (rec.venue_country == "ENG") i = 1;
        else if (rec.venue_country == "USA") i = 2;
        ++table[i].total;
        if (encode_home(rec.player1_country, rec.player2_country, rec.venue_country) != 0)
            ++table[i].with_home;
    }
    return table;
}

// Head-to-head results between world-ranking slots. Cell (i, j) with
// i < j holds wins by the rank-i player and the number of matches played;
// total == 0 marks an empty cell.
struct HeadToHead {
    int top_n = 0;
    std::vector<long> wins;    // (top_n+1)^2, row-major, 1-based ranks
    std::vector<long> totals;

    long wins_at(int i, int j) const { return wins[static_cast<std::size_t>(i) * (top_n + 1) + j]; }
    long total_at(int i, int j) const {
        return totals[static_cast<std::size_t>(i) * (top_n + 1) + j];
    }
};

inline HeadToHead head_to_head(const std::vector<MatchRecord>& records, int top_n) {
    if (top_n < 2) throw std::invalid_argument("head_to_head: top_n must be >= 2");
    HeadToHead h;
    h.top_n = top_n;
    h.wins.assign(static_cast<std::size_t>(top_n + 1) * (top_n + 1), 0);
    h.totals.assign(static_cast<std::size_t>(top_n + 1) * (top_n + 1), 0);
    for (const auto& rec : records) {
        if (rec.termination != Termination::Completed) continue;
        const int r1 = rec.player1_rank;
        const int r2 = rec.player2_rank;
        if (r1 == r2 || r1 > top_n || r2 > top_n) continue;
        const int hi = std::min(r1, r2);
        const int lo = std::max(r1, r2);
        const bool hi_won = (r1 < r2) == (rec.games_won_p1 > rec.games_won_p2);
        const std::size_t cell = static_cast<std::size_t>(hi) * (top_n + 1) + lo;
        ++h.totals[cell];
        if (hi_won) ++h.wins[cell];
    }
    return h;
}

// JSON mirror of the model's data block: rank arrays, home indicators per
// tracked country (b_egy, b_eng, ...), and the margins.
inline nlohmann::json dataset_to_json(const EncodedDataset& ds) {
    nlohmann::json j;
    j["nplayers"] = ds.max_rank;
    j["nmatches"] = ds.matches.size();
    j["tracked_countries"] = ds.tracked_countries;
    std::vector<int> rank1, rank2, b;
    std::vector<double> y;
    for (const auto& m : ds.matches) {
        rank1.push_back(m.rank1_idx);
        rank2.push_back(m.rank2_idx);
        b.push_back(m.b);
        y.push_back(m.y);
    }
    j["rank1"] = rank1;
    j["rank2"] = rank2;
    j["b"] = b;
    for (std::size_t c = 0; c < ds.tracked_countries.size(); ++c) {
        std::vector<int> bc;
        for (const auto& m : ds.matches) bc.push_back(m.b_country[c]);
        j["b_" + to_lower(ds.tracked_countries[c])] = bc;
    }
    j["y"] = y;
    j["provenance"] = {{"excluded_retired_walkover", ds.provenance.excluded_retired_walkover},
                       {"excluded_rank_cutoff", ds.provenance.excluded_rank_cutoff}};
    return j;
}

}  // namespace rankmargin
