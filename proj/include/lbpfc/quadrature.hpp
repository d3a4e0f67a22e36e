#pragma once

#include <array>
#include <cmath>
#include <span>

namespace lbpfc {

/// Quadrature point in barycentric coordinates; weights are normalised so that
/// they sum to one and must be scaled by the element measure.
template <int Dim>
struct QuadPoint {
    std::array<double, Dim + 1> bary;
    double weight;
};

namespace detail {

inline constexpr double kGaussA = 0.11270166537925831148;  // (1 - sqrt(3/5)) / 2

inline constexpr std::array<QuadPoint<1>, 3> kGauss3{{
    {{kGaussA, 1.0 - kGaussA}, 5.0 / 18.0},
    {{0.5, 0.5}, 8.0 / 18.0},
    {{1.0 - kGaussA, kGaussA}, 5.0 / 18.0},
}};

// Six-point symmetric rule on triangles, exact for polynomials of total degree 4.
inline constexpr double kTriA1 = 0.445948490915964886318;
inline constexpr double kTriW1 = 0.223381589678011465944;
inline constexpr double kTriA2 = 0.091576213509770743460;
inline constexpr double kTriW2 = 0.109951743655321867389;

inline constexpr std::array<QuadPoint<2>, 6> kTri6{{
    {{kTriA1, kTriA1, 1.0 - 2.0 * kTriA1}, kTriW1},
    {{kTriA1, 1.0 - 2.0 * kTriA1, kTriA1}, kTriW1},
    {{1.0 - 2.0 * kTriA1, kTriA1, kTriA1}, kTriW1},
    {{kTriA2, kTriA2, 1.0 - 2.0 * kTriA2}, kTriW2},
    {{kTriA2, 1.0 - 2.0 * kTriA2, kTriA2}, kTriW2},
    {{1.0 - 2.0 * kTriA2, kTriA2, kTriA2}, kTriW2},
}};

}  // namespace detail

/// Element rule used throughout assembly: 3-point Gauss on segments (degree 5),
/// 6-point rule on triangles (degree 4).
template <int Dim>
constexpr std::span<const QuadPoint<Dim>> element_rule() {
    static_assert(Dim == 1 || Dim == 2);
    if constexpr (Dim == 1) {
        return detail::kGauss3;
    } else {
        return detail::kTri6;
    }
}

}  // namespace lbpfc
