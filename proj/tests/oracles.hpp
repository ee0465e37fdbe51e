#pragma once
#include <cmath>
#include <functional>
#include <vector>

// Reference computations written independently of the library.
namespace oracle {

inline double simpson(const std::vector<double>& f, double h)
{
    const std::size_t n = f.size() - 1;
    if (n % 2 != 0) {
        double s = 0.5 * (f.front() + f.back());
        for (std::size_t i = 1; i < n; ++i)
            s += f[i];
        return s * h;
    }
    double s = f.front() + f.back();
    for (std::size_t i = 1; i < n; ++i)
        s += (i % 2 ? 4.0 : 2.0) * f[i];
    return s * h / 3.0;
}

inline double integrate(const std::function<double(double)>& f, double a, double b, int n = 20000)
{
    std::vector<double> v(n + 1);
    const double h = (b - a) / n;
    for (int i = 0; i <= n; ++i)
        v[i] = f(a + i * h);
    return simpson(v, h);
}

inline double energy(const std::vector<double>& w, double h)
{
    std::vector<double> sq(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        sq[i] = w[i] * w[i];
    return simpson(sq, h);
}

inline double slope_left(const std::vector<double>& w, double h) { return (-3 * w[0] + 4 * w[1] - w[2]) / (2 * h); }

// M via the product-to-sum form -(cos(x - L/2) - cos(L/2)) / sin(L/2)
struct M {
    double L;
    double value(double x) const { return -(std::cos(x - L / 2) - std::cos(L / 2)) / std::sin(L / 2); }
    double d1(double x) const { return std::sin(x - L / 2) / std::sin(L / 2); }
    double d3(double x) const { return -std::sin(x - L / 2) / std::sin(L / 2); }
};

// w' + w''' = a sin(beta x), w(0) = w(L) = 0, w'(0) = r
struct LinearEquilibrium {
    double L, a, r;
    double c0 = 0, c1 = 0, c2 = 0, A = 0, beta = 0;

    LinearEquilibrium(double L_, double a_, double r_) : L(L_), a(a_), r(r_)
    {
        beta = M_PI / L;
        A = a / (beta * (beta * beta - 1.0));
        // w = c0 + c1 cos x + c2 sin x + A cos(beta x)
        // w(0) = c0 + c1 + A = 0, w'(0) = c2 = r, w(L) = c0 + c1 cos L + c2 sin L + A cos(beta L) = 0
        c2 = r;
        double rhs = -(c2 * std::sin(L) + A * std::cos(beta * L)) + (A);
        // subtract w(0) from w(L): c1 (cos L - 1) = -(c2 sin L + A cos(beta L)) + A
        c1 = rhs / (std::cos(L) - 1.0);
        c0 = -c1 - A;
    }
    double value(double x) const { return c0 + c1 * std::cos(x) + c2 * std::sin(x) + A * std::cos(beta * x); }
    double d1(double x) const { return -c1 * std::sin(x) + c2 * std::cos(x) - A * beta * std::sin(beta * x); }
};

} // namespace oracle
