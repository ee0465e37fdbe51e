#pragma once
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseLU>

#include "grid.hpp"
#include "timeseries.hpp"

namespace kdvf {

enum class KernelKind { P, G, Q };

inline const char* kernel_name(KernelKind k)
{
    switch (k) {
    case KernelKind::P: return "P";
    case KernelKind::G: return "G";
    case KernelKind::Q: return "Q";
    }
    return "?";
}

struct Kernel2D {
    Grid grid;
    Mat K; // K(i, j) = kernel(x_i, z_j)

    Kernel2D() = default;
    explicit Kernel2D(const Grid& g) : grid(g), K(Mat::Zero(g.nodes(), g.nodes())) {}
    Kernel2D(const Grid& g, Mat m) : grid(g), K(std::move(m)) {}
};

struct KernelSolveReport {
    double lambda = 0.0;
    double interior_residual = 0.0;
    double diag_consistency = 0.0;
    double constraint_residual = 0.0;
    std::optional<double> refinement_ratio;
};

struct KernelOptions {
    int band = 3;              // diagonal cells excluded from interior_residual
    double regularization = 1e-12;
};

namespace detail {

inline int kidx(const Grid& g, int i, int j) { return i * g.nodes() + j; }

inline void add_stencil(std::vector<Triplet>& t, const Grid& g, int row, int i, int j,
                        bool along_x, int order, double scale)
{
    auto [first, cnt] = diff_support(g, along_x ? i : j, order);
    auto w = stencil(g, along_x ? i : j, first, cnt, order);
    for (int k = 0; k < cnt; ++k) {
        int col = along_x ? kidx(g, first + k, j) : kidx(g, i, first + k);
        t.emplace_back(row, col, scale * w[k]);
    }
}

// Collocated PDE rows  sigma*K + K_x + K_xxx + K_z + K_zzz  at interior nodes.
inline SpMat pde_rows(const Grid& g, double sigma)
{
    const int n = g.n, m = n - 1;
    std::vector<Triplet> t;
    t.reserve(std::size_t(m) * m * 17);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) {
            int r = (i - 1) * m + (j - 1);
            t.emplace_back(r, kidx(g, i, j), sigma);
            add_stencil(t, g, r, i, j, true, 1, 1.0);
            add_stencil(t, g, r, i, j, true, 3, 1.0);
            add_stencil(t, g, r, i, j, false, 1, 1.0);
            add_stencil(t, g, r, i, j, false, 3, 1.0);
        }
    SpMat A(m * m, g.nodes() * g.nodes());
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

inline SpMat term_rows(const Grid& g, bool along_x, int order)
{
    const int n = g.n, m = n - 1;
    std::vector<Triplet> t;
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j)
            add_stencil(t, g, (i - 1) * m + (j - 1), i, j, along_x, order, 1.0);
    SpMat A(m * m, g.nodes() * g.nodes());
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

} // namespace detail

// Residual report of a kernel against the collocated problem of its kind.
inline KernelSolveReport kernel_residual(KernelKind kind, double lambda, const Kernel2D& ker,
                                         const KernelOptions& opt = {})
{
    const Grid& g = ker.grid;
    const int n = g.n, N = g.nodes(), m = n - 1;
    const double h = g.h;
    const double sigma = kind == KernelKind::P ? -lambda : lambda;
    Vec u(N * N);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            u[detail::kidx(g, i, j)] = ker.K(i, j);

    Vec Au = detail::pde_rows(g, sigma) * u;
    Vec terms[4] = {detail::term_rows(g, true, 1) * u, detail::term_rows(g, true, 3) * u,
                    detail::term_rows(g, false, 1) * u, detail::term_rows(g, false, 3) * u};
    double rr = 0.0, tt[5] = {0, 0, 0, 0, 0}, mass = 0.0, target = 0.0;
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) {
            int k = (i - 1) * m + (j - 1);
            double bk = i == j ? -lambda / h : 0.0;
            if (std::abs(i - j) > opt.band) {
                double r = Au[k] - bk;
                rr += r * r;
                double kv = sigma * ker.K(i, j);
                tt[0] += kv * kv;
                for (int q = 0; q < 4; ++q)
                    tt[q + 1] += terms[q][k] * terms[q][k];
            } else {
                mass += h * h * Au[k];
                target += h * h * bk;
            }
        }
    double scale = 0.0;
    for (double v : tt)
        scale += std::sqrt(v);
    KernelSolveReport rep;
    rep.lambda = lambda;
    rep.interior_residual = scale > 0.0 ? std::sqrt(rr) / scale : std::sqrt(rr);
    rep.diag_consistency = std::abs(mass - target) / std::abs(target);
    return rep;
}

// Largest violation of the boundary families of each kernel kind.
inline double boundary_violation(KernelKind kind, const Kernel2D& ker)
{
    const Grid& g = ker.grid;
    const int n = g.n;
    double v = 0.0;
    for (int k = 0; k <= n; ++k)
        v = std::max({v, std::abs(ker.K(0, k)), std::abs(ker.K(n, k)), std::abs(ker.K(k, 0)),
                      std::abs(ker.K(k, n))});
    auto sx = stencil(g, 0, 0, 3, 1);
    auto ex = stencil(g, n, n - 2, 3, 1);
    for (int k = 1; k < n; ++k) {
        double x0 = sx[0] * ker.K(0, k) + sx[1] * ker.K(1, k) + sx[2] * ker.K(2, k);
        double xL = ex[0] * ker.K(n - 2, k) + ex[1] * ker.K(n - 1, k) + ex[2] * ker.K(n, k);
        double z0 = sx[0] * ker.K(k, 0) + sx[1] * ker.K(k, 1) + sx[2] * ker.K(k, 2);
        double zL = ex[0] * ker.K(k, n - 2) + ex[1] * ker.K(k, n - 1) + ex[2] * ker.K(k, n);
        // scaled by h so that the check is on the discrete row itself
        switch (kind) {
        case KernelKind::P: v = std::max({v, g.h * std::abs(x0), g.h * std::abs(xL)}); break;
        case KernelKind::G: v = std::max({v, g.h * std::abs(z0), g.h * std::abs(zL)}); break;
        case KernelKind::Q: v = std::max(v, g.h * std::abs(xL)); break;
        }
    }
    return v;
}

// Least-squares collocation for
//   P:  -lambda P + L P = -lambda delta,  P = 0 on the edges, P_x(0,z) = P_x(L,z) = 0
//   G:   lambda G + L G = -lambda delta,  G = 0 on the edges, G_z(x,0) = G_z(x,L) = 0
// with L = d_x + d_xxx + d_z + d_zzz. Boundary families are exact constraint rows.
inline std::pair<Kernel2D, KernelSolveReport>
solve_kernel(KernelKind kind, double lambda, const Grid& g, const KernelOptions& opt = {})
{
    if (!(lambda > 0.0))
        throw ConfigError("lambda must be positive");
    if (kind == KernelKind::Q)
        throw PreconditionError("the Q kernel is obtained from P, see solve_kernel_Q");
    const int n = g.n, N = g.nodes(), NN = N * N, m = n - 1;
    const double h = g.h;
    const double sigma = kind == KernelKind::P ? -lambda : lambda;

    SpMat A = detail::pde_rows(g, sigma);
    Vec b = Vec::Zero(m * m);
    for (int i = 1; i < n; ++i)
        b[(i - 1) * m + (i - 1)] = -lambda / h;

    std::vector<Triplet> ct;
    int nc = 0;
    auto dirichlet = [&](int i, int j) { ct.emplace_back(nc++, detail::kidx(g, i, j), 1.0); };
    for (int j = 0; j <= n; ++j) {
        dirichlet(0, j);
        dirichlet(n, j);
    }
    for (int i = 1; i < n; ++i) {
        dirichlet(i, 0);
        dirichlet(i, n);
    }
    for (int e : {0, n})
        for (int k = 1; k < n; ++k) {
            if (kind == KernelKind::P)
                detail::add_stencil(ct, g, nc++, e, k, true, 1, h);
            else
                detail::add_stencil(ct, g, nc++, k, e, false, 1, h);
        }
    SpMat C(nc, NN);
    C.setFromTriplets(ct.begin(), ct.end());

    // Augmented system [I A 0; A^T -eps C^T; 0 C 0]: the conditioning of A is not squared.
    // PDE rows are scaled by h^3, which leaves the least-squares solution unchanged.
    const double rs = h * h * h;
    const int R = m * m;
    std::vector<Triplet> kt;
    kt.reserve(R + 2 * A.nonZeros() + 2 * C.nonZeros() + NN);
    for (int k = 0; k < R; ++k)
        kt.emplace_back(k, k, 1.0);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            kt.emplace_back(it.row(), R + it.col(), rs * it.value());
            kt.emplace_back(R + it.col(), it.row(), rs * it.value());
        }
    if (opt.regularization > 0.0)
        for (int k = 0; k < NN; ++k)
            kt.emplace_back(R + k, R + k, -opt.regularization);
    for (int k = 0; k < C.outerSize(); ++k)
        for (SpMat::InnerIterator it(C, k); it; ++it) {
            kt.emplace_back(R + NN + it.row(), R + it.col(), it.value());
            kt.emplace_back(R + it.col(), R + NN + it.row(), it.value());
        }
    SpMat KKT(R + NN + nc, R + NN + nc);
    KKT.setFromTriplets(kt.begin(), kt.end());
    KKT.makeCompressed();

    Vec rhs = Vec::Zero(R + NN + nc);
    rhs.head(R) = rs * b;
    Eigen::SparseLU<SpMat> lu;
    lu.analyzePattern(KKT);
    lu.factorize(KKT);
    if (lu.info() != Eigen::Success)
        throw KernelSolveError(std::string("kernel system is rank deficient (") + kernel_name(kind) +
                               "); L may be critical or near-critical");
    Vec sol = lu.solve(rhs);
    sol += lu.solve(Vec(rhs - KKT * sol));
    if (!sol.allFinite())
        throw KernelSolveError("kernel solve produced non-finite values");

    Kernel2D ker(g);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            ker.K(i, j) = sol[R + detail::kidx(g, i, j)];
    KernelSolveReport rep = kernel_residual(kind, lambda, ker, opt);
    rep.constraint_residual = boundary_violation(kind, ker);
    return {std::move(ker), rep};
}

inline std::pair<Kernel2D, KernelSolveReport> solve_kernel_P(double lambda, const Grid& g,
                                                             const KernelOptions& opt = {})
{
    return solve_kernel(KernelKind::P, lambda, g, opt);
}

inline std::pair<Kernel2D, KernelSolveReport> solve_kernel_G(double lambda, const Grid& g,
                                                             const KernelOptions& opt = {})
{
    return solve_kernel(KernelKind::G, lambda, g, opt);
}

// Kernel of the inverse transform: I + Q W = (I - P W)^{-1}, i.e. Q = P + P W Q.
// Its residual is then measured against lambda Q + L Q = -lambda delta.
inline std::pair<Kernel2D, KernelSolveReport> solve_kernel_Q(double lambda, const Kernel2D& P,
                                                             const KernelOptions& opt = {})
{
    if (!(lambda > 0.0))
        throw ConfigError("lambda must be positive");
    const Grid& g = P.grid;
    const int N = g.nodes();
    Vec wq = quad_weights(g);
    Mat T = Mat::Identity(N, N) - P.K * wq.asDiagonal();
    Eigen::PartialPivLU<Mat> lu(T);
    Vec piv = lu.matrixLU().diagonal().cwiseAbs();
    if (piv.minCoeff() < 1e-12 * piv.maxCoeff())
        throw DegenerateError("the transform with kernel P is not invertible on this grid");
    Kernel2D Q(g, lu.solve(P.K));
    KernelSolveReport rep = kernel_residual(KernelKind::Q, lambda, Q, opt);
    rep.constraint_residual = boundary_violation(KernelKind::Q, Q);
    return {std::move(Q), rep};
}

// G(L - z, L - x) = -P(x, z)
inline Kernel2D reflect(const Kernel2D& P)
{
    const int n = P.grid.n;
    Kernel2D G(P.grid);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            G.K(n - j, n - i) = -P.K(i, j);
    return G;
}

// z-derivative at z = 0 (or z = L) by the 3-point one-sided difference
inline Field kernel_dz(const Kernel2D& K, Side side)
{
    const int n = K.grid.n;
    const double h = K.grid.h;
    Field out(K.grid);
    for (int i = 0; i <= n; ++i)
        out.v[i] = side == Side::left
                       ? (-3.0 * K.K(i, 0) + 4.0 * K.K(i, 1) - K.K(i, 2)) / (2.0 * h)
                       : (3.0 * K.K(i, n) - 4.0 * K.K(i, n - 1) + K.K(i, n - 2)) / (2.0 * h);
    return out;
}

inline Field gain_p(const Kernel2D& P) { return kernel_dz(P, Side::left); }

inline Field apply_Pi_bar(const Kernel2D& P, const Field& g)
{
    if (!(P.grid == g.grid))
        throw PreconditionError("kernel and field grids differ");
    Vec wq = quad_weights(g.grid);
    return Field(g.grid, g.v - P.K * wq.cwiseProduct(g.v));
}

inline Field apply_Pi_bar_inv(const Kernel2D& Q, const Field& w)
{
    if (!(Q.grid == w.grid))
        throw PreconditionError("kernel and field grids differ");
    Vec wq = quad_weights(w.grid);
    return Field(w.grid, w.v + Q.K * wq.cwiseProduct(w.v));
}

// max |p + int p Q - Q_z(., 0)| / max |Q_z(., 0)|
inline double compatibility_residual(const Field& p, const Kernel2D& Q)
{
    Field qz = kernel_dz(Q, Side::left);
    Vec wq = quad_weights(p.grid);
    Vec res = p.v + Q.K * wq.cwiseProduct(p.v) - qz.v;
    double s = qz.v.cwiseAbs().maxCoeff();
    return res.cwiseAbs().maxCoeff() / (s > 0.0 ? s : 1.0);
}

struct OperatorBounds {
    double c_under = 1.0;
    double c_bar = 1.0;
};

// Extremal squared singular values of I + Q W in the quadrature-weighted norm.
inline OperatorBounds operator_bounds(const Kernel2D& Q)
{
    Vec wq = quad_weights(Q.grid);
    Vec s = wq.cwiseSqrt();
    Mat B = Q.K * wq.asDiagonal();
    B.diagonal().array() += 1.0;
    Mat Bw = s.asDiagonal() * B * s.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Mat> svd(Bw);
    const Vec& sv = svd.singularValues();
    double smax = sv.maxCoeff(), smin = sv.minCoeff();
    if (smin < 1e-10)
        throw DegenerateError("transform is not invertible (smallest singular value " + fmt17(smin) + ")");
    return {smin * smin, smax * smax};
}

inline void write_kernel_csv(std::ostream& os, const Kernel2D& K, const std::string& name, double lambda)
{
    os << "# kernel " << name << " lambda=" << fmt17(lambda) << " L=" << fmt17(K.grid.L)
       << " n=" << K.grid.n << '\n';
    for (int i = 0; i <= K.grid.n; ++i) {
        for (int j = 0; j <= K.grid.n; ++j)
            os << (j ? "," : "") << fmt17(K.K(i, j));
        os << '\n';
    }
}

inline void write_kernel_csv(const std::string& path, const Kernel2D& K, const std::string& name, double lambda)
{
    std::ofstream f(path);
    if (!f)
        throw ConfigError("cannot write " + path);
    write_kernel_csv(f, K, name, lambda);
}

struct KernelHeader {
    std::string name;
    double lambda = 0.0, L = 0.0;
    int n = 0;
};

inline Kernel2D read_kernel_csv(std::istream& is, KernelHeader* hdr = nullptr)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("# kernel ", 0) != 0)
        throw ConfigError("kernel file lacks the '# kernel' header");
    KernelHeader H;
    std::istringstream hs(line.substr(9));
    hs >> H.name;
    std::string tok;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad kernel header field '" + tok + "'");
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "lambda") H.lambda = std::stod(val);
        else if (key == "L") H.L = std::stod(val);
        else if (key == "n") H.n = std::stoi(val);
    }
    Grid g = make_grid(H.L, H.n);
    Kernel2D K(g);
    for (int i = 0; i <= H.n; ++i) {
        if (!std::getline(is, line))
            throw ConfigError("kernel file truncated at row " + std::to_string(i));
        std::istringstream ls(line);
        for (int j = 0; j <= H.n; ++j) {
            std::string cell;
            if (!std::getline(ls, cell, ','))
                throw ConfigError("kernel row " + std::to_string(i) + " too short");
            K.K(i, j) = std::stod(cell);
        }
    }
    if (hdr)
        *hdr = H;
    return K;
}

inline Kernel2D read_kernel_csv(const std::string& path, KernelHeader* hdr = nullptr)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read " + path);
    return read_kernel_csv(f, hdr);
}

} // namespace kdvf
