#pragma once
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "errors.hpp"

namespace kdvf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Grid {
    double L = 1.0;
    int n = 8;
    double h = 0.125;

    int nodes() const { return n + 1; }
    double x(int i) const { return i * h; }
    bool operator==(const Grid& o) const { return L == o.L && n == o.n; }
};

inline Grid make_grid(double L, int n)
{
    if (!(L > 0.0) || !std::isfinite(L))
        throw ConfigError("grid length must be positive");
    if (n < 8)
        throw ConfigError("grid needs at least 8 cells, got " + std::to_string(n));
    return Grid{L, n, L / n};
}

struct Field {
    Grid grid;
    Vec v;

    Field() = default;
    explicit Field(const Grid& g) : grid(g), v(Vec::Zero(g.nodes())) {}
    Field(const Grid& g, Vec values) : grid(g), v(std::move(values))
    {
        if (v.size() != g.nodes())
            throw PreconditionError("field length does not match grid");
    }

    template <class F>
    static Field sample(const Grid& g, F&& f)
    {
        Field out(g);
        for (int i = 0; i <= g.n; ++i)
            out.v[i] = f(g.x(i));
        return out;
    }

    double operator[](int i) const { return v[i]; }
    double& operator[](int i) { return v[i]; }
};

inline Field operator+(const Field& a, const Field& b) { return Field(a.grid, a.v + b.v); }
inline Field operator-(const Field& a, const Field& b) { return Field(a.grid, a.v - b.v); }
inline Field operator*(double s, const Field& a) { return Field(a.grid, s * a.v); }

// Fornberg's recursion: weights for the m-th derivative at x0 from nodes xs.
template <class T>
std::vector<T> fd_weights(T x0, const std::vector<T>& xs, int m)
{
    const int N = static_cast<int>(xs.size());
    std::vector<std::vector<T>> c(N, std::vector<T>(m + 1, T(0)));
    T c1 = 1, c4 = xs[0] - x0;
    c[0][0] = 1;
    for (int i = 1; i < N; ++i) {
        int mn = std::min(i, m);
        T c2 = 1, c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            T c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<T> w(N);
    for (int i = 0; i < N; ++i)
        w[i] = c[i][m];
    return w;
}

// Weights on nodes first..first+count-1 of g, derivative `order` at node i.
inline std::vector<double> stencil(const Grid& g, int i, int first, int count, int order)
{
    std::vector<double> xs(count);
    for (int k = 0; k < count; ++k)
        xs[k] = (first + k - i) * g.h;
    return fd_weights(0.0, xs, order);
}

// Node range used by diff() at node i.
inline std::pair<int, int> diff_support(const Grid& g, int i, int order)
{
    const int n = g.n;
    if (order == 1 || order == 2) {
        int cnt = order == 1 ? 3 : 4;
        if (i == 0) return {0, cnt};
        if (i == n) return {n - cnt + 1, cnt};
        return {i - 1, 3};
    }
    if (i <= 1) return {0, 5};
    if (i >= n - 1) return {n - 4, 5};
    return {i - 2, 5};
}

// Second-order derivative matrix on all nodes.
inline SpMat diff_matrix(const Grid& g, int order)
{
    if (order < 1 || order > 3)
        throw PreconditionError("derivative order must be 1, 2 or 3");
    std::vector<Triplet> t;
    for (int i = 0; i <= g.n; ++i) {
        auto [first, cnt] = diff_support(g, i, order);
        auto w = stencil(g, i, first, cnt, order);
        for (int k = 0; k < cnt; ++k)
            if (w[k] != 0.0)
                t.emplace_back(i, first + k, w[k]);
    }
    SpMat D(g.nodes(), g.nodes());
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

inline Field diff(const Field& f, int order)
{
    return Field(f.grid, diff_matrix(f.grid, order) * f.v);
}

// Composite Simpson weights, trapezoid when n is odd.
inline Vec quad_weights(const Grid& g)
{
    Vec w(g.nodes());
    if (g.n % 2 == 0) {
        for (int i = 0; i <= g.n; ++i)
            w[i] = (i == 0 || i == g.n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        w *= g.h / 3.0;
    } else {
        w.setConstant(g.h);
        w[0] = w[g.n] = 0.5 * g.h;
    }
    return w;
}

inline double integrate(const Field& f)
{
    return quad_weights(f.grid).dot(f.v);
}

inline double l2_norm(const Field& f)
{
    return std::sqrt(std::max(0.0, quad_weights(f.grid).dot(f.v.cwiseProduct(f.v))));
}

enum class Side { left, right };

inline double boundary_slope(const Field& f, Side side)
{
    const double h = f.grid.h;
    const int n = f.grid.n;
    if (side == Side::left)
        return (-3.0 * f.v[0] + 4.0 * f.v[1] - f.v[2]) / (2.0 * h);
    return (3.0 * f.v[n] - 4.0 * f.v[n - 1] + f.v[n - 2]) / (2.0 * h);
}

struct CriticalWitness {
    int k = 0, l = 0;
};

inline double critical_value(int k, int l)
{
    return 2.0 * M_PI * std::sqrt((k * k + k * l + l * l) / 3.0);
}

inline double default_critical_tol(double L) { return 1e-9 * (1.0 + L); }

// k and l both range over {0, 1, ...}.
inline std::optional<CriticalWitness> is_critical_length(double L, double tol, int k_max)
{
    if (!(tol > 0.0) || k_max < 1)
        throw PreconditionError("is_critical_length needs tol > 0 and k_max >= 1");
    for (int k = 0; k <= k_max; ++k) {
        if (critical_value(k, k) > L + tol)
            break;
        for (int l = k; l <= k_max; ++l) {
            double v = critical_value(k, l);
            if (v > L + tol)
                break;
            if (std::abs(L - v) < tol)
                return CriticalWitness{k, l};
        }
    }
    return std::nullopt;
}

inline std::optional<CriticalWitness> is_critical_length(double L)
{
    return is_critical_length(L, default_critical_tol(L), 64);
}

} // namespace kdvf
