#pragma once

// Reference implementations used only by the tests. They are written from
// the definitions, share no code with the library, and favour clarity over
// speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

struct Sample {
    double conf;
    bool correct;
};

// Equal-width ECE: bin b holds b/B <= c < (b+1)/B, the last bin is closed.
inline double ece(const std::vector<Sample>& s, std::size_t bins = 15) {
    const double n = static_cast<double>(s.size());
    const double bd = static_cast<double>(bins);
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = static_cast<double>(b) / bd;
        const double hi = static_cast<double>(b + 1) / bd;
        std::size_t count = 0;
        double conf = 0.0;
        double acc = 0.0;
        for (const auto& x : s) {
            const bool inside = x.conf >= lo && (b + 1 == bins ? x.conf <= hi : x.conf < hi);
            if (!inside) continue;
            ++count;
            conf += x.conf;
            acc += x.correct ? 1.0 : 0.0;
        }
        if (count == 0) continue;
        const double nb = static_cast<double>(count);
        total += (nb / n) * std::abs(acc / nb - conf / nb);
    }
    return total;
}

// Least-squares nondecreasing fit by exhaustive search. For 0/1 targets the
// optimum is piecewise constant on blocks, each block value being its mean;
// every partition of the index range into contiguous blocks is tried and the
// monotone candidate with the smallest SSE wins.
inline std::vector<double> exhaustive_isotonic(const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> best;
    double best_sse = std::numeric_limits<double>::infinity();
    const std::size_t cuts = n > 0 ? n - 1 : 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << cuts); ++mask) {
        std::vector<double> fit(n);
        std::size_t start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool end = i + 1 == n || ((mask >> i) & 1u);
            if (!end) continue;
            double m = 0.0;
            for (std::size_t j = start; j <= i; ++j) m += y[j];
            m /= static_cast<double>(i - start + 1);
            for (std::size_t j = start; j <= i; ++j) fit[j] = m;
            start = i + 1;
        }
        bool monotone = true;
        for (std::size_t i = 1; i < n; ++i) monotone = monotone && fit[i] >= fit[i - 1] - 1e-15;
        if (!monotone) continue;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += (y[i] - fit[i]) * (y[i] - fit[i]);
        if (sse < best_sse - 1e-15) {
            best_sse = sse;
            best = fit;
        }
    }
    return best;
}

inline std::vector<double> softmax(const std::vector<double>& z, double tau = 1.0) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v / tau);
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) s += (p[k] = std::exp(z[k] / tau - m));
    for (auto& v : p) v /= s;
    return p;
}

inline std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Type-7 quantile, written out from the definition.
inline double quantile7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Central finite differences of f at x.
template <typename F>
std::vector<double> finite_difference(F&& f, std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = f(x);
        x[i] = keep - step;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

}  // namespace oracle
