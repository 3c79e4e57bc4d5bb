#pragma once

#include "hkahler/jet.hpp"

#include <array>
#include <cmath>

namespace hkahler {

/// A point (z1, z2) of a complex chart on the four-manifold.
struct ChartPoint {
    cplx z1{};
    cplx z2{};

    /// Values of the four formal variables (z1, z2, zb1, zb2) at this point.
    std::array<cplx, kNumVars> formal() const { return {z1, z2, std::conj(z1), std::conj(z2)}; }

    bool finite() const {
        return std::isfinite(z1.real()) && std::isfinite(z1.imag()) && std::isfinite(z2.real()) &&
               std::isfinite(z2.imag());
    }

    friend bool operator==(const ChartPoint&, const ChartPoint&) = default;
};

}  // namespace hkahler
