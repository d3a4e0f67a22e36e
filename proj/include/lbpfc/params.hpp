#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace lbpfc {

enum class Flow { AllenCahn, CahnHilliard };

inline const char* to_string(Flow f) { return f == Flow::AllenCahn ? "allen_cahn" : "cahn_hilliard"; }

/// Landau-Brazovskii model and time-step parameters.
struct ModelParams {
    double xi = 1.0;      ///< gradient coefficient
    double alpha = -1.0;  ///< quadratic coefficient
    double gamma = 0.2;   ///< cubic coefficient
    double d0 = 16.0;     ///< shift keeping E1 + D0 positive
    double dt = 1e-2;
    Flow flow = Flow::AllenCahn;

    void validate() const {
        if (!(xi > 0.0) || !std::isfinite(xi)) throw std::invalid_argument("xi must be positive");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
        if (!std::isfinite(alpha) || !std::isfinite(gamma) || !std::isfinite(d0)) {
            throw std::invalid_argument("model parameters must be finite");
        }
    }

    bool operator==(const ModelParams&) const = default;
};

struct BulkValues {
    double n;    ///< N(phi)
    double dn;   ///< N'(phi)
    double ddn;  ///< N''(phi)
};

/// Bulk polynomial N(phi) = a/2 phi^2 - g/6 phi^3 + 1/24 phi^4 and its first two derivatives.
inline BulkValues bulk(double phi, const ModelParams& p) {
    const double p2 = phi * phi;
    return {
        0.5 * p.alpha * p2 - p.gamma / 6.0 * p2 * phi + p2 * p2 / 24.0,
        p.alpha * phi - 0.5 * p.gamma * p2 + p2 * phi / 6.0,
        p.alpha - p.gamma * phi + 0.5 * p2,
    };
}

}  // namespace lbpfc
