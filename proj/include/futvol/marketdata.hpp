#pragma once

// Option-chain CSV ingestion into a QuotePanel, the inverse writer, and a
// synthetic panel generator built on the first-order implied-vol formula.
//
// Schema (header exact): future_days,future_price,option_days,strike,kind,value
// with kind one of iv, call_price, put_price.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "futvol/black76.hpp"
#include "futvol/errors.hpp"
#include "futvol/ivol_expansion.hpp"
#include "futvol/quote_panel.hpp"
#include "futvol/rng.hpp"

namespace futvol {

inline constexpr std::string_view kPanelHeader =
    "future_days,future_price,option_days,strike,kind,value";

enum class QuoteKind { Iv, CallPrice, PutPrice };

struct RawQuoteRow {
    long future_days = 0;
    double future_price = 0.0;
    long option_days = 0;
    double strike = 0.0;
    QuoteKind kind = QuoteKind::Iv;
    double value = 0.0;
    std::size_t line = 0;
};

struct LoadOptions {
    double days_per_year = 365.0;
    double rate = 0.0;
    bool allow_two_strikes = false;
};

struct LoadResult {
    QuotePanel panel;
    std::vector<std::string> warnings;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view field, const char* name, std::size_t line) {
    T value{};
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end || field.empty()) {
        throw ParseError(std::string("cannot parse ") + name + " from '" + std::string(field) + "'",
                         line);
    }
    return value;
}

inline QuoteKind parse_kind(std::string_view field, std::size_t line) {
    if (field == "iv") return QuoteKind::Iv;
    if (field == "call_price") return QuoteKind::CallPrice;
    if (field == "put_price") return QuoteKind::PutPrice;
    throw ParseError("unknown quote kind '" + std::string(field) + "'", line);
}

inline std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

inline long to_days(double years, double days_per_year, const char* what) {
    const double d = years * days_per_year;
    const double r = std::round(d);
    require(std::abs(d - r) <= 1e-9 * std::max(1.0, std::abs(d)),
            std::string("save_panel: ") + what + " is not a whole number of days");
    return static_cast<long>(r);
}

}  // namespace detail

/// Parses the rows of a panel CSV; malformed input throws ParseError.
[[nodiscard]] inline std::vector<RawQuoteRow> read_rows(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<RawQuoteRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = detail::trim(line);
        if (!have_header) {
            if (view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
            if (view != kPanelHeader) {
                throw ParseError("header must be '" + std::string(kPanelHeader) + "'", lineno);
            }
            have_header = true;
            continue;
        }
        if (view.empty()) continue;
        const auto f = detail::split_csv(view);
        if (f.size() != 6) {
            throw ParseError("expected 6 fields, found " + std::to_string(f.size()), lineno);
        }
        RawQuoteRow r;
        r.line = lineno;
        r.future_days = detail::parse_number<long>(f[0], "future_days", lineno);
        r.future_price = detail::parse_number<double>(f[1], "future_price", lineno);
        r.option_days = detail::parse_number<long>(f[2], "option_days", lineno);
        r.strike = detail::parse_number<double>(f[3], "strike", lineno);
        r.kind = detail::parse_kind(f[4], lineno);
        r.value = detail::parse_number<double>(f[5], "value", lineno);
        rows.push_back(r);
    }
    if (!have_header) throw ParseError("empty file, header missing", lineno + 1);
    return rows;
}

/// Builds a validated panel from rows; rows that are out of domain or fail the
/// no-arbitrage band are dropped with a warning. Smiles are keyed by
/// (future_days, future_price, option_days) in order of first appearance.
[[nodiscard]] inline LoadResult build_panel(const std::vector<RawQuoteRow>& rows,
                                            const LoadOptions& opts = {}) {
    detail::require(opts.days_per_year > 0.0, "load_panel: days_per_year must be > 0");
    LoadResult res;
    res.rows_read = rows.size();
    using Key = std::tuple<long, double, long>;
    std::map<Key, std::size_t> index;
    auto drop = [&](const RawQuoteRow& r, const std::string& why) {
        res.warnings.push_back("line " + std::to_string(r.line) + ": " + why + "; row dropped");
        ++res.rows_dropped;
    };
    for (const auto& r : rows) {
        if (!(std::isfinite(r.future_price) && r.future_price > 0.0)) {
            drop(r, "future price must be > 0");
            continue;
        }
        if (!(std::isfinite(r.strike) && r.strike > 0.0)) {
            drop(r, "strike must be > 0");
            continue;
        }
        if (r.option_days <= 0) {
            drop(r, "option maturity must be > 0 days");
            continue;
        }
        if (r.option_days > r.future_days) {
            drop(r, "option maturity after future maturity");
            continue;
        }
        const double T0 = r.option_days / opts.days_per_year;
        const double T = r.future_days / opts.days_per_year;
        double iv = r.value;
        if (r.kind == QuoteKind::Iv) {
            if (!(std::isfinite(iv) && iv > 0.0)) {
                drop(r, "implied vol must be > 0");
                continue;
            }
        } else {
            const OptionStyle style = r.kind == QuoteKind::CallPrice ? OptionStyle::Call : OptionStyle::Put;
            try {
                iv = implied_vol(style, r.value, BlackInputs{r.future_price, r.strike, 0.0, T0, opts.rate});
            } catch (const DomainError& e) {
                drop(r, std::string("price outside the no-arbitrage band (") + e.what() + ")");
                continue;
            } catch (const NumericError& e) {
                drop(r, std::string("implied vol did not converge (") + e.what() + ")");
                continue;
            }
        }
        const Key key{r.future_days, r.future_price, r.option_days};
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, res.panel.smiles.size()).first;
            Smile s;
            s.T = T;
            s.F = r.future_price;
            s.T0 = T0;
            res.panel.smiles.push_back(std::move(s));
        }
        Smile& s = res.panel.smiles[it->second];
        s.strikes.push_back(r.strike);
        s.ivs.push_back(iv);
    }
    const std::size_t min_strikes = opts.allow_two_strikes ? 2 : 3;
    std::vector<Smile> kept;
    for (auto& s : res.panel.smiles) {
        if (s.distinct_strikes() < min_strikes) {
            std::ostringstream os;
            os << "smile (option_days " << std::lround(s.T0 * opts.days_per_year) << ", future_days "
               << std::lround(s.T * opts.days_per_year) << ") has fewer than " << min_strikes
               << " distinct strikes; smile dropped";
            res.warnings.push_back(os.str());
            res.rows_dropped += s.strikes.size();
            continue;
        }
        kept.push_back(std::move(s));
    }
    res.panel.smiles = std::move(kept);
    if (res.panel.smiles.empty()) throw EmptyPanelError("load_panel: no usable smiles in panel");
    res.panel.validate(opts.allow_two_strikes);
    return res;
}

[[nodiscard]] inline LoadResult read_panel(std::istream& in, const LoadOptions& opts = {}) {
    return build_panel(read_rows(in), opts);
}

[[nodiscard]] inline LoadResult load_panel(const std::filesystem::path& path,
                                           const LoadOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_panel: cannot open " + path.string());
    return read_panel(in, opts);
}

/// Writes the panel with kind = iv; maturities must be whole days.
inline void save_panel(const QuotePanel& panel, std::ostream& out, double days_per_year = 365.0) {
    out << kPanelHeader << '\n';
    for (const auto& s : panel.smiles) {
        const long fd = detail::to_days(s.T, days_per_year, "future maturity");
        const long od = detail::to_days(s.T0, days_per_year, "option maturity");
        for (std::size_t l = 0; l < s.strikes.size(); ++l) {
            out << fd << ',' << detail::format_double(s.F) << ',' << od << ','
                << detail::format_double(s.strikes[l]) << ",iv," << detail::format_double(s.ivs[l])
                << '\n';
        }
    }
}

inline void save_panel(const QuotePanel& panel, const std::filesystem::path& path,
                       double days_per_year = 365.0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("save_panel: cannot open " + path.string());
    save_panel(panel, out, days_per_year);
}

// ---------------------------------------------------------------------------
// synthetic panels

struct SynthTenor {
    long option_days = 0;
    long future_days = 0;
    double future_price = 100.0;
};

struct SynthGrid {
    std::vector<SynthTenor> tenors;
    int n_strikes = 41;
    double log_moneyness_width = 0.25;  ///< strikes span F exp(+-w sqrt(T0))
    double noise_sd = 0.0;              ///< additive Gaussian noise on each iv
    std::uint64_t seed = 0;
    double days_per_year = 365.0;
};

/// Six option maturities, each on the future expiring 30 days later.
[[nodiscard]] inline std::vector<SynthTenor> default_synth_tenors() {
    std::vector<SynthTenor> t;
    for (long d : {30L, 61L, 91L, 182L, 273L, 365L}) t.push_back({d, d + 30, 100.0});
    return t;
}

[[nodiscard]] inline QuotePanel synth_panel(const GroupMarketParams& gmp, const SynthGrid& grid) {
    gmp.validate();
    detail::require(!grid.tenors.empty(), "synth_panel: no tenors");
    detail::require(grid.n_strikes >= 1, "synth_panel: n_strikes >= 1");
    detail::require(grid.noise_sd >= 0.0 && std::isfinite(grid.noise_sd),
                    "synth_panel: noise sd must be >= 0");
    RandomStream rng(grid.seed, stream_id(0, 0, 7));
    QuotePanel panel;
    for (const auto& t : grid.tenors) {
        detail::require(t.option_days > 0 && t.option_days <= t.future_days,
                        "synth_panel: require 0 < option_days <= future_days");
        Smile s;
        s.T0 = t.option_days / grid.days_per_year;
        s.T = t.future_days / grid.days_per_year;
        s.F = t.future_price;
        const double half = grid.log_moneyness_width * std::sqrt(s.T0);
        for (int l = 0; l < grid.n_strikes; ++l) {
            const double x =
                grid.n_strikes == 1 ? 0.0 : -half + 2.0 * half * l / (grid.n_strikes - 1);
            const double K = s.F * std::exp(x);
            double iv = iv_approx(lmmr(K, s.F, s.T0), s.T0, s.T, gmp);
            if (grid.noise_sd > 0.0) iv = std::max(iv + grid.noise_sd * rng.normal(), 1e-4);
            s.strikes.push_back(K);
            s.ivs.push_back(iv);
        }
        panel.smiles.push_back(std::move(s));
    }
    return panel;
}

}  // namespace futvol
