#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "abbl/rules.hpp"

namespace abbl {

inline constexpr std::size_t default_bins = 100;

/*!
 * Histogram posterior over an unknown parameter.
 *
 * Bin b covers [lo + b*w, lo + (b+1)*w) with w = (hi - lo) / B; the last bin
 * also includes hi. Point summaries use bin centers.
 */
struct Posterior {
    UnknownParameter parameter;
    std::vector<double> bins;

    static Posterior uniform(const UnknownParameter& parameter, std::size_t n_bins = default_bins)
    {
        return Posterior{parameter, std::vector<double>(n_bins, 1.0 / static_cast<double>(n_bins))};
    }

    std::size_t size() const noexcept { return bins.size(); }
    double bin_width() const noexcept { return parameter.width() / static_cast<double>(bins.size()); }
    double center(std::size_t b) const noexcept
    {
        return parameter.lo + (static_cast<double>(b) + 0.5) * bin_width();
    }

    std::size_t bin_of(double x) const noexcept
    {
        const double u = (x - parameter.lo) / parameter.width() * static_cast<double>(bins.size());
        if (!(u > 0.0))
            return 0;
        return std::min(bins.size() - 1, static_cast<std::size_t>(u));
    }

    bool same_grid(const Posterior& other) const noexcept
    {
        return parameter.name == other.parameter.name && parameter.lo == other.parameter.lo &&
               parameter.hi == other.parameter.hi && bins.size() == other.bins.size();
    }

    double total() const noexcept { return std::accumulate(bins.begin(), bins.end(), 0.0); }

    // Sums farther than 1e-12 from one are rescaled; anything closer is left
    // untouched so already-normalized histograms pass through bit-for-bit.
    void normalize()
    {
        const double s = total();
        if (!(s > 0.0) || !std::isfinite(s))
            fail(ErrorCode::InvalidPrior, "posterior for '" + parameter.name + "' has no mass");
        if (std::abs(s - 1.0) <= 1e-12)
            return;
        for (double& m : bins)
            m /= s;
    }

    std::size_t mode_bin() const noexcept
    {
        return static_cast<std::size_t>(std::max_element(bins.begin(), bins.end()) - bins.begin());
    }

    // Center of the most probable bin (first on ties).
    double mode() const noexcept { return center(mode_bin()); }

    double mean() const noexcept
    {
        double m = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b)
            m += bins[b] * center(b);
        return m / total();
    }

    double variance() const noexcept
    {
        const double mu = mean();
        double v = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b)
            v += bins[b] * (center(b) - mu) * (center(b) - mu);
        return v / total();
    }

    // Quantile of the piecewise-uniform density.
    double quantile(double q) const noexcept
    {
        const double target = std::clamp(q, 0.0, 1.0) * total();
        double acc = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b) {
            if (bins[b] > 0.0 && acc + bins[b] >= target) {
                const double frac = (target - acc) / bins[b];
                return parameter.lo + (static_cast<double>(b) + frac) * bin_width();
            }
            acc += bins[b];
        }
        return parameter.hi;
    }

    // KL(this || uniform) in nats.
    double kl_from_uniform() const noexcept
    {
        const double n = static_cast<double>(bins.size());
        const double s = total();
        double kl = 0.0;
        for (double m : bins)
            if (m > 0.0)
                kl += (m / s) * std::log((m / s) * n);
        return kl;
    }

    // Draws a bin by inverse CDF and returns its center.
    double sample_center(RandomStream& rng) const noexcept
    {
        const double u = rng.uniform() * total();
        double acc = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b) {
            acc += bins[b];
            if (u < acc)
                return center(b);
        }
        for (std::size_t b = bins.size(); b-- > 0;)
            if (bins[b] > 0.0)
                return center(b);
        return center(0);
    }
};

} // namespace abbl
