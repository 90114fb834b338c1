#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "futvol/errors.hpp"

namespace futvol {

/// One implied-volatility smile: options of maturity T0 on the future maturing at T.
struct Smile {
    double T = 0.0;   ///< future maturity, years
    double F = 0.0;   ///< future price
    double T0 = 0.0;  ///< option maturity, years
    std::vector<double> strikes;
    std::vector<double> ivs;

    [[nodiscard]] std::size_t distinct_strikes() const {
        std::vector<double> k = strikes;
        std::sort(k.begin(), k.end());
        return static_cast<std::size_t>(std::unique(k.begin(), k.end()) - k.begin());
    }
};

struct QuotePanel {
    std::vector<Smile> smiles;

    /// Throws DomainError naming the first offending smile. Two-strike smiles
    /// are accepted only with `allow_two_strikes`.
    void validate(bool allow_two_strikes = false) const {
        const std::size_t min_strikes = allow_two_strikes ? 2 : 3;
        for (std::size_t i = 0; i < smiles.size(); ++i) {
            const Smile& s = smiles[i];
            auto fail = [&](const std::string& why) {
                std::ostringstream os;
                os << "panel: smile " << i << " (T0 " << s.T0 << ", T " << s.T << "): " << why;
                throw DomainError(os.str());
            };
            if (!(std::isfinite(s.F) && s.F > 0.0)) fail("future price must be > 0");
            if (!(std::isfinite(s.T0) && std::isfinite(s.T) && s.T0 > 0.0 && s.T0 <= s.T)) {
                fail("require 0 < T0 <= T");
            }
            if (s.strikes.size() != s.ivs.size()) fail("strike and iv counts differ");
            for (std::size_t l = 0; l < s.strikes.size(); ++l) {
                if (!(std::isfinite(s.strikes[l]) && s.strikes[l] > 0.0)) fail("strikes must be > 0");
                if (!(std::isfinite(s.ivs[l]) && s.ivs[l] > 0.0)) fail("implied vols must be > 0");
            }
            if (s.distinct_strikes() < min_strikes) {
                fail("needs at least " + std::to_string(min_strikes) + " distinct strikes");
            }
        }
    }

    [[nodiscard]] std::size_t quote_count() const {
        std::size_t n = 0;
        for (const auto& s : smiles) n += s.strikes.size();
        return n;
    }
};

}  // namespace futvol
