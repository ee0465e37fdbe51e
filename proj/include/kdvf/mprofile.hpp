#pragma once
#include <cmath>

#include "grid.hpp"

namespace kdvf {

// M(x) = -2 sin(x/2) sin((L-x)/2) / sin(L/2), the solution of M''' + M' = 0,
// M(0) = M(L) = 0, M'(0) = -1.
struct MClosedForm {
    double L;
    double s; // sin(L/2)

    explicit MClosedForm(double L_) : L(L_), s(std::sin(0.5 * L_))
    {
        if (std::abs(s) < 1e-8)
            throw ConfigError("L is a multiple of 2*pi; M is undefined");
    }
    double value(double x) const { return -2.0 * std::sin(0.5 * x) * std::sin(0.5 * (L - x)) / s; }
    double d1(double x) const
    {
        return -(std::cos(0.5 * x) * std::sin(0.5 * (L - x)) - std::sin(0.5 * x) * std::cos(0.5 * (L - x))) / s;
    }
    double d3(double x) const
    {
        return (std::cos(0.5 * x) * std::sin(0.5 * (L - x)) - std::sin(0.5 * x) * std::cos(0.5 * (L - x))) / s;
    }
};

inline Field M_profile(const Grid& g)
{
    MClosedForm m(g.L);
    Field f = Field::sample(g, [&](double x) { return m.value(x); });
    f.v[0] = 0.0;
    f.v[g.n] = 0.0;
    return f;
}

} // namespace kdvf
