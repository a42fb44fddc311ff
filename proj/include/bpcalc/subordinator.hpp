// SPDX-License-Identifier: Apache-2.0
#pragma once

// Subordination measures nu_t with L(nu_t)(-z) = e^{t psi(z)}, their weak
// derivatives, and the b_t functional on exponential polynomials.
//
// Inversion scheme (infinite-activity measures):
//   - damp by sigma = theta/U: the damped transform e^{t psi(-sigma + i lam)}
//     is sampled on the dual grid of the two-sided window [-U, U), multiplied
//     by the exact cell-box factor and inverted by one FFT; cell masses are
//     undamped at midpoints.
//   - transforms with a power-law dual tail (gamma-type) are handled by
//     fitting A (kappa - i lam)^-rho through 1/(t psi') (exactly linear for
//     that family), subtracting it and adding its cell masses analytically.
//   - the negative half of the window is the concentration check: genuine
//     T_n^0 subordinators put nothing there.
//   - mass beyond the window is bookkept as the defect; pairings add the
//     Lévy-tail-shaped model  defect * W(z)  (see LevyMeasure::nu_tail_model).
//
// Finite-activity measures go through the exact compound-Poisson lattice path
// instead: e^{-t|mu|} sum_k t^k mu^{*k} / k!.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "bpcalc/bernstein.hpp"
#include "bpcalc/errors.hpp"
#include "bpcalc/fft.hpp"
#include "bpcalc/grid_measure.hpp"
#include "bpcalc/special.hpp"

namespace bpcalc {

struct InversionOptions {
    std::size_t points = std::size_t(1) << 14; // cells per axis (power of two)
    double U = 0.0;                            // window; 0 = auto
    double theta = 10.0;                       // damping, alias ~ e^{-theta}
    double trunc_tol = 1e-9;                   // dual-cutoff residual target
    double defect_target = 0.05;               // auto-window tail goal
    double clip_fraction = 1e-4;               // negativity clipping budget
    double leak_threshold = 1e-6;              // negative-orthant TV fraction
};

namespace sub_detail {

inline void require_T0(const BernsteinFunction& psi)
{
    if (!psi.is_T0())
        throw parameter_error("subordination requires psi in T_n^0 (c0 = 0, c1 = 0)");
}

inline bool is_pow2(std::size_t v) { return v && !(v & (v - 1)); }

// Chebyshev-type bound for nu_t([window complement]) via eval on the real axis:
// 1 - e^{s u} >= (1 - e^{sU}) on {u_j >= U}, s < 0.
inline double cheb_defect_bound(const BernsteinFunction& psi, double t, double U)
{
    double best = 1.0;
    for (double c : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        ComplexPoint s(psi.n(), cdouble(-c / U, 0.0));
        const double g = std::exp(t * psi.value(s).real());
        const double b = (1.0 - g) / (1.0 - std::exp(-c));
        best = std::min(best, b);
    }
    return std::max(0.0, best);
}

struct RefFit {
    bool ok = false;
    double A = 0.0, kappa = 0.0, rho = 0.0;
    cdouble c1{0.0, 0.0}, c2{0.0, 0.0}; // derivative path: psi ~ c1 - c2 ln(kappa - i lam)
};

// Fit e^{t psi(-sigma+i lam)} ~ A (kappa - i lam)^-rho over the top decade of
// the dual grid using 1/(t psi'), which is exactly linear in z for this
// family.  Gated by control-point agreement.  1-d only.
inline RefFit fit_reference(const BernsteinFunction& psi, double t, double sigma,
                            double lam_lo, double lam_hi, bool with_log_term)
{
    RefFit fit;
    const int m = 48;
    std::vector<cdouble> zs(m), w(m);
    for (int i = 0; i < m; ++i) {
        const double lam = lam_lo * std::pow(lam_hi / lam_lo, double(i) / (m - 1));
        zs[i] = cdouble(-sigma, lam);
        const cdouble d = psi.derivative(zs[i]);
        if (std::abs(d) < 1e-300) return fit;
        w[i] = 1.0 / (t * d);
    }
    // least squares w ~ p - q z  (2x2 normal equations over complex samples)
    cdouble s_z = 0.0, s_zz = 0.0, s_w = 0.0, s_wz = 0.0;
    for (int i = 0; i < m; ++i) {
        s_z += zs[i];
        s_zz += zs[i] * zs[i];
        s_w += w[i];
        s_wz += w[i] * zs[i];
    }
    const cdouble det = double(m) * s_zz - s_z * s_z;
    if (std::abs(det) < 1e-300) return fit;
    const cdouble q = (s_z * s_w - double(m) * s_wz) / det;
    const cdouble p = (s_w + q * s_z) / double(m);
    if (std::abs(q) < 1e-300) return fit;
    const cdouble rho_c = 1.0 / q;
    if (std::abs(rho_c.imag()) > 0.01 * std::abs(rho_c.real())) return fit;
    const double rho = rho_c.real();
    if (rho <= 0.02 || rho > 12.0) return fit;
    const cdouble a = p / q;
    const cdouble kappa_c = a + sigma;
    if (std::abs(kappa_c.imag()) > 0.02 * std::abs(kappa_c.real()) + 1e-12) return fit;
    const double kappa = kappa_c.real();
    if (kappa <= sigma) return fit;
    // anchor the amplitude at lam_hi
    const cdouble zh = cdouble(-sigma, lam_hi);
    const cdouble Ac = std::exp(t * psi.value(ComplexPoint{zh})) *
                       std::exp(rho * std::log(cdouble(kappa, -lam_hi)));
    if (std::abs(Ac.imag()) > 0.02 * std::abs(Ac.real())) return fit;
    const double A = Ac.real();
    if (A <= 0.0) return fit;

    if (with_log_term) {
        // psi(-sigma+i lam) ~ c1 - c2 ln(kappa - i lam) on the same window
        cdouble sl = 0.0, sll = 0.0, sy = 0.0, syl = 0.0;
        for (int i = 0; i < m; ++i) {
            const cdouble L = std::log(cdouble(kappa, -zs[i].imag()));
            const cdouble y = psi.value(ComplexPoint{zs[i]});
            sl += L;
            sll += L * L;
            sy += y;
            syl += y * L;
        }
        const cdouble det2 = double(m) * sll - sl * sl;
        if (std::abs(det2) < 1e-300) return fit;
        fit.c2 = (sl * sy - double(m) * syl) / det2;
        fit.c1 = (sy + fit.c2 * sl) / double(m);
    }

    // control points below the fit window
    for (double f : {0.003, 0.02, 0.2}) {
        const double lam = lam_hi * f;
        const cdouble zc = cdouble(-sigma, lam);
        const cdouble val = std::exp(t * psi.value(ComplexPoint{zc}));
        const cdouble Lk = std::log(cdouble(kappa, -lam));
        cdouble ref = A * std::exp(-rho * Lk);
        if (with_log_term) {
            const cdouble valF = val * psi.value(ComplexPoint{zc});
            const cdouble refF = ref * (fit.c1 - fit.c2 * Lk);
            if (std::abs(refF - valF) > 2e-3 * std::abs(valF) + 1e-13) return fit;
        } else {
            if (std::abs(ref - val) > 1e-3 * std::abs(val) + 1e-13) return fit;
        }
    }
    fit.ok = true;
    fit.A = A;
    fit.kappa = kappa;
    fit.rho = rho;
    return fit;
}

// cell masses of A u^{rho-1} e^{-kap_eff u} / Gamma(rho) over [0,U) cells
inline std::vector<double> reference_cell_masses(double A, double kap_eff, double rho,
                                                 std::size_t N, double h)
{
    std::vector<double> out(N, 0.0);
    const double scale = A * std::pow(kap_eff, -rho);
    double prev = 0.0;
    for (std::size_t m = 0; m < N; ++m) {
        const double x = kap_eff * double(m + 1) * h;
        const double cur = gamma_p(rho, x);
        out[m] = scale * (cur - prev);
        prev = cur;
    }
    return out;
}

// residual magnitude of the damped transform at the dual cutoff
inline double trunc_residual(const BernsteinFunction& psi, double t, double U,
                             std::size_t N, double theta, bool derivative, RefFit* fit_out)
{
    const double h = U / double(N);
    const double lam_max = 3.14159265358979323846 / h;
    const double sigma = theta / U;
    const cdouble ztop = cdouble(-sigma, lam_max);
    const cdouble ptop = psi.value(ComplexPoint{ztop});
    cdouble Ftop = std::exp(t * ptop);
    if (derivative) Ftop *= ptop;
    double resid = std::abs(Ftop);
    if (fit_out) *fit_out = RefFit{};
    if (resid > 1e-300 && psi.n() == 1) {
        RefFit fit = fit_reference(psi, t, sigma, lam_max / 10.0, lam_max, derivative);
        if (fit.ok) {
            const cdouble Lk = std::log(cdouble(fit.kappa, -lam_max));
            cdouble ref = fit.A * std::exp(-fit.rho * Lk);
            if (derivative) ref *= (fit.c1 - fit.c2 * Lk);
            resid = std::abs(Ftop - ref);
            if (fit_out) *fit_out = fit;
        }
    }
    return resid;
}

inline double auto_window(const BernsteinFunction& psi, double t, std::size_t N,
                          double theta, double trunc_tol, double defect_target,
                          bool derivative)
{
    double U = 0.0;
    for (int j = -30; j <= 40; ++j) {
        const double cand = std::ldexp(1.0, j);
        if (cheb_defect_bound(psi, t, cand) <= defect_target) {
            U = cand;
            break;
        }
    }
    if (U == 0.0) U = std::ldexp(1.0, 40);
    int guard = 0;
    while (guard++ < 80 && U > std::ldexp(1.0, -40) &&
           trunc_residual(psi, t, U, N, theta, derivative, nullptr) > trunc_tol)
        U *= 0.5;
    if (trunc_residual(psi, t, U, N, theta, derivative, nullptr) > trunc_tol)
        throw window_error("auto window: no feasible dyadic window at this resolution", 2.0 * U);
    return U;
}

// Raw two-sided inversion: returns 2N cell masses covering [-U, U) with cell
// midpoints -U + (m + 1/2) h, plus the reference info.  1-d core.
struct Inversion1d {
    std::vector<double> masses; // 2N cells on [-U, U)
    RefFit fit;
    double sigma = 0.0;
    double trunc = 0.0;
};

inline Inversion1d invert_1d(const BernsteinFunction& psi, double t, double U,
                             std::size_t N, double theta, bool derivative)
{
    Inversion1d out;
    const double h = U / double(N);
    const std::size_t M = 2 * N; // two-sided window
    const double sigma = theta / U;
    out.sigma = sigma;
    const double pi = 3.14159265358979323846;
    const double dlam = 2.0 * pi / (2.0 * U);

    RefFit fit;
    out.trunc = trunc_residual(psi, t, U, N, theta, derivative, &fit);
    out.fit = fit;

    std::vector<cdouble> G(M);
    for (std::size_t k = 0; k < M; ++k) {
        const double lam = (k < M / 2 ? double(k) : double(k) - double(M)) * dlam;
        const cdouble z = cdouble(-sigma, lam);
        const cdouble pz = psi.value(ComplexPoint{z});
        cdouble F = std::exp(t * pz);
        if (derivative) F *= pz;
        if (fit.ok) {
            const cdouble Lk = std::log(cdouble(fit.kappa, -lam));
            cdouble ref = fit.A * std::exp(-fit.rho * Lk);
            if (derivative) ref *= (fit.c1 - fit.c2 * Lk);
            F -= ref;
        }
        const double lh = lam * h * 0.5;
        const double sinc = std::abs(lh) < 1e-12 ? 1.0 : std::sin(lh) / lh;
        const cdouble box = h * sinc * std::exp(cdouble(0.0, -lh));
        // phase shift so that index m corresponds to the cell starting at -U + m h
        const cdouble shift = std::exp(cdouble(0.0, lam * U));
        G[k] = F * box * shift;
    }
    fft_forward(G);
    out.masses.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        const double center = -U + (double(m) + 0.5) * h;
        out.masses[m] = G[m].real() / (2.0 * U) * std::exp(sigma * center);
    }
    if (fit.ok) {
        const double kap_eff = fit.kappa - sigma;
        if (kap_eff <= 0.0) throw inversion_quality_error("reference fit: kappa <= sigma");
        auto ref = reference_cell_masses(fit.A, kap_eff, fit.rho, N, h);
        if (derivative) {
            // inverse of A (kappa - i lam)^-rho (c1 - c2 ln(kappa - i lam)):
            // c1 * M(rho) + c2 * d/drho M(rho), by central difference in rho
            const double dr = 1e-5;
            auto lo = reference_cell_masses(fit.A, kap_eff, fit.rho - dr, N, h);
            auto hi = reference_cell_masses(fit.A, kap_eff, fit.rho + dr, N, h);
            for (std::size_t m = 0; m < N; ++m) {
                const double dref = (hi[m] - lo[m]) / (2.0 * dr);
                out.masses[N + m] += (fit.c1.real() * ref[m] + fit.c2.real() * dref);
            }
        } else {
            for (std::size_t m = 0; m < N; ++m) out.masses[N + m] += ref[m];
        }
    }
    return out;
}

// n-dimensional one-sided inversion (no reference, no two-sided probe); used
// for genuinely multivariate densities.
inline std::vector<double> invert_nd(const BernsteinFunction& psi, double t, double U,
                                     std::size_t N, double theta, bool derivative,
                                     double& leak_out)
{
    const int n = psi.n();
    const double h = U / double(N);
    const double sigma = theta / U;
    const double pi = 3.14159265358979323846;
    const double dlam = 2.0 * pi / U;
    std::vector<std::size_t> ext(n, N);
    std::size_t total = 1;
    for (int j = 0; j < n; ++j) total *= N;
    std::vector<cdouble> G(total);
    ComplexPoint z(n);
    std::vector<double> lam(n);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        cdouble box = 1.0;
        for (int j = n - 1; j >= 0; --j) {
            const std::size_t k = rest % N;
            rest /= N;
            const double l = (k < N / 2 ? double(k) : double(k) - double(N)) * dlam;
            z[j] = cdouble(-sigma, l);
            const double lh = l * h * 0.5;
            const double sinc = std::abs(lh) < 1e-12 ? 1.0 : std::sin(lh) / lh;
            box *= h * sinc * std::exp(cdouble(0.0, -lh));
        }
        const cdouble pz = psi.value(z);
        cdouble F = std::exp(t * pz);
        if (derivative) F *= pz;
        G[flat] = F * box;
    }
    fft_nd_forward(G, ext);
    std::vector<double> masses(total);
    const double norm = std::pow(U, -double(n));
    std::vector<double> center(n);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        double csum = 0.0;
        for (int j = n - 1; j >= 0; --j) {
            csum += (double(rest % N) + 0.5) * h;
            rest /= N;
        }
        masses[flat] = G[flat].real() * norm * std::exp(sigma * csum);
    }
    leak_out = 0.0; // no two-sided probe in the nd path
    return masses;
}

// exact compound-Poisson lattice path for finite-activity measures
inline std::vector<double> compound_poisson(const LevyMeasure& mu, double t, int n,
                                            std::size_t N, double U, double& origin_atom)
{
    const double h = U / double(N);
    std::size_t total = 1;
    for (int j = 0; j < n; ++j) total *= N;

    // rasterize mu (nodes snapped to containing cells)
    std::vector<double> raster(total, 0.0);
    double inside = 0.0;
    mu.for_each_node(1.0, 1.0, 1e-14, [&](const RealPoint& u, double w) {
        std::size_t pos = 0;
        for (int j = 0; j < n; ++j) {
            const double x = u[j] / h;
            if (x >= double(N)) return; // beyond window: handled by defect
            pos = pos * N + std::size_t(x);
        }
        raster[pos] += w;
        inside += w;
    });
    const double m_total = mu.total_mass();

    std::vector<std::size_t> ext(n, 2 * N);
    std::size_t padded = 1;
    for (int j = 0; j < n; ++j) padded *= 2 * N;
    std::vector<cdouble> mu_hat(padded, 0.0);
    {
        std::vector<std::size_t> idx(n);
        for (std::size_t m = 0; m < total; ++m) {
            if (raster[m] == 0.0) continue;
            std::size_t rest = m, pos = 0;
            for (int j = n - 1; j >= 0; --j) {
                idx[j] = rest % N;
                rest /= N;
            }
            for (int j = 0; j < n; ++j) pos = pos * 2 * N + idx[j];
            mu_hat[pos] = raster[m];
        }
        fft_nd_forward(mu_hat, ext);
    }

    // acc = e^{-t m} sum_k (t^k / k!) mu^{*k}; k = 0 term is the origin atom
    std::vector<double> acc(total, 0.0);
    const double p0 = std::exp(-t * m_total);
    origin_atom = p0;
    acc[0] += p0;
    std::vector<cdouble> cur(padded, 0.0);
    cur[0] = 1.0; // transform of delta_0 is all-ones after forward FFT
    fft_nd_forward(cur, ext);
    double coef = p0;
    std::vector<std::size_t> idx(n);
    for (int k = 1; k <= 4000; ++k) {
        coef *= t / double(k); // e^{-tm} t^k/k! builds m-powers through mu_hat
        for (std::size_t i = 0; i < padded; ++i) cur[i] *= mu_hat[i];
        // accumulate: inverse transform of cur restricted to the window
        std::vector<cdouble> tmp = cur;
        fft_nd_inverse(tmp, ext);
        for (std::size_t m = 0; m < total; ++m) {
            std::size_t rest = m, pos = 0;
            for (int j = n - 1; j >= 0; --j) {
                idx[j] = rest % N;
                rest /= N;
            }
            for (int j = 0; j < n; ++j) pos = pos * 2 * N + idx[j];
            acc[m] += coef * std::max(0.0, tmp[pos].real());
        }
        if (coef * std::pow(std::max(inside, m_total), k) < 1e-18 && k > t * m_total + 8.0) break;
        // amplitude criterion: remaining Poisson tail is negligible
        if (k > t * m_total + 12.0 * std::sqrt(t * m_total + 1.0) + 24.0) break;
    }
    return acc;
}

} // namespace sub_detail

// --- compute_nu --------------------------------------------------------------

inline GridMeasure compute_nu(const BernsteinFunction& psi, double t,
                              const InversionOptions& opt = {})
{
    sub_detail::require_T0(psi);
    if (t < 0.0) throw parameter_error("compute_nu: t must be >= 0");
    if (!sub_detail::is_pow2(opt.points)) throw parameter_error("points per axis must be a power of two");
    const int n = psi.n();
    const std::size_t N = opt.points;

    if (t == 0.0) {
        const double U = opt.U > 0.0 ? opt.U : 1.0;
        return GridMeasure::delta0(n, N, U);
    }

    const auto& mu = psi.measure();
    if (mu.finite_activity()) {
        double U = opt.U;
        if (U <= 0.0) {
            const double m = mu.total_mass();
            double span = 0.0;
            mu.for_each_node(1.0, 1.0, 1e-12, [&](const RealPoint& u, double) {
                for (double x : u) span = std::max(span, x);
            });
            const double need = std::max(1.0, span) * (t * m + 12.0 * std::sqrt(t * m + 1.0) + 24.0);
            U = std::ldexp(1.0, int(std::ceil(std::log2(need))));
        }
        double origin_atom = 0.0;
        auto w = sub_detail::compound_poisson(mu, t, n, N, U, origin_atom);
        double totalm = std::accumulate(w.begin(), w.end(), 0.0);
        GridMeasure g(n, N, U, std::move(w), std::max(0.0, 1.0 - totalm));
        g.info().origin_cell_weight = origin_atom;
        return g;
    }

    double U = opt.U;
    if (U <= 0.0)
        U = sub_detail::auto_window(psi, t, N, opt.theta, opt.trunc_tol, opt.defect_target, false);

    if (n == 1) {
        auto inv = sub_detail::invert_1d(psi, t, U, N, opt.theta, false);
        // negative side of the window is the concentration/leakage probe
        double leak = 0.0;
        for (std::size_t m = 0; m < N; ++m) leak += std::fabs(inv.masses[m]);
        std::vector<double> w(N);
        double clipped = 0.0, totalm = 0.0;
        for (std::size_t m = 0; m < N; ++m) {
            double v = inv.masses[N + m];
            if (v < 0.0) {
                clipped += -v;
                v = 0.0;
            }
            w[m] = v;
            totalm += v;
        }
        if (clipped > opt.clip_fraction * std::max(totalm, 1e-12))
            throw inversion_quality_error("compute_nu: clipped negative mass exceeds budget");
        if (leak > opt.leak_threshold * std::max(totalm, 1e-12) && leak > 10.0 * clipped)
            throw inversion_quality_error("compute_nu: mass detected on the negative orthant");
        if (totalm > 1.0 + 1e-6)
            throw inversion_quality_error("compute_nu: window mass exceeds 1 beyond tolerance");
        GridMeasure g(1, N, U, std::move(w), std::max(0.0, 1.0 - totalm));
        g.info().sigma = inv.sigma;
        g.info().clipped_mass = clipped;
        g.info().leakage = leak;
        g.info().reference_used = inv.fit.ok;
        g.info().trunc_residual = inv.trunc;
        g.info().cheb_tail_bound = sub_detail::cheb_defect_bound(psi, t, U);
        g.info().origin_cell_weight = g.weights()[0];
        if (g.defect() > std::max(opt.defect_target * 8.0, 64.0 * g.info().cheb_tail_bound))
            throw window_error("compute_nu: window too small for the requested defect", 2.0 * U);
        return g;
    }

    // multivariate path
    double leak = 0.0;
    auto masses = sub_detail::invert_nd(psi, t, U, N, opt.theta, false, leak);
    double clipped = 0.0, totalm = 0.0;
    for (auto& v : masses) {
        if (v < 0.0) {
            clipped += -v;
            v = 0.0;
        }
        totalm += v;
    }
    if (clipped > opt.clip_fraction * std::max(totalm, 1e-12))
        throw inversion_quality_error("compute_nu: clipped negative mass exceeds budget");
    GridMeasure g(n, N, U, std::move(masses), std::max(0.0, 1.0 - totalm));
    g.info().sigma = opt.theta / U;
    g.info().clipped_mass = clipped;
    g.info().origin_cell_weight = g.weights()[0];
    return g;
}

// --- compute_nu_derivative ----------------------------------------------------

inline SignedGridMeasure compute_nu_derivative(const BernsteinFunction& psi, double t,
                                               const InversionOptions& opt = {})
{
    sub_detail::require_T0(psi);
    if (!(t > 0.0)) throw parameter_error("compute_nu_derivative: t must be > 0");
    if (!sub_detail::is_pow2(opt.points)) throw parameter_error("points per axis must be a power of two");
    const int n = psi.n();
    const std::size_t N = opt.points;

    const auto& mu = psi.measure();
    if (mu.finite_activity()) {
        // nu'_t = nu_t * (mu - |mu| delta_0): exact lattice convolution
        GridMeasure nu = compute_nu(psi, t, opt);
        const double h = nu.h();
        const double m_total = mu.total_mass();
        std::size_t total = nu.weights().size();
        std::vector<double> raster(total, 0.0);
        mu.for_each_node(1.0, 1.0, 1e-14, [&](const RealPoint& u, double w) {
            std::size_t pos = 0;
            for (int j = 0; j < n; ++j) {
                const double x = u[j] / h;
                if (x >= double(N)) return;
                pos = pos * N + std::size_t(x);
            }
            raster[pos] += w;
        });
        GridMeasure conv = convolve(nu, GridMeasure(n, N, nu.U(), std::move(raster), 0.0));
        std::vector<double> w(total);
        for (std::size_t m = 0; m < total; ++m) w[m] = conv.weights()[m] - m_total * nu.weights()[m];
        SignedGridMeasure d(n, N, nu.U(), std::move(w));
        d.info() = nu.info();
        return d;
    }

    double U = opt.U;
    if (U <= 0.0)
        U = sub_detail::auto_window(psi, t, N, opt.theta, opt.trunc_tol, opt.defect_target, true);

    if (n != 1) {
        double leak = 0.0;
        auto masses = sub_detail::invert_nd(psi, t, U, N, opt.theta, true, leak);
        SignedGridMeasure d(n, N, U, std::move(masses));
        d.info().sigma = opt.theta / U;
        return d;
    }

    auto inv = sub_detail::invert_1d(psi, t, U, N, opt.theta, true);
    double leak = 0.0;
    for (std::size_t m = 0; m < N; ++m) leak += std::fabs(inv.masses[m]);
    std::vector<double> w(N);
    double tv = 0.0;
    for (std::size_t m = 0; m < N; ++m) {
        w[m] = inv.masses[N + m];
        tv += std::fabs(w[m]);
    }
    if (!std::isfinite(tv))
        throw integrability_error("compute_nu_derivative: transform not integrable at this resolution");
    if (leak > opt.leak_threshold * std::max(tv, 1e-12))
        throw concentration_error("compute_nu_derivative: transform mass is not concentrated on R+^n");
    SignedGridMeasure d(1, N, U, std::move(w));
    d.info().sigma = inv.sigma;
    d.info().leakage = leak;
    d.info().reference_used = inv.fit.ok;
    d.info().trunc_residual = inv.trunc;
    d.info().origin_cell_weight = d.weights()[0];
    return d;
}

// --- pairings ----------------------------------------------------------------

// int e^{z.u} d nu(u) with the defect paired through the Lévy-tail model.
inline cdouble pair_exponential(const GridMeasure& nu, const ComplexPoint& z,
                                const BernsteinFunction* psi = nullptr)
{
    cdouble acc = nu.pair_exponential_window(z);
    if (nu.defect() > 0.0 && psi) {
        auto w = psi->tail_model(z, nu.U());
        if (w) {
            acc += nu.defect() * (*w);
        } else {
            // lumped fallback at the window corner
            cdouble e = 0.0;
            for (int j = 0; j < nu.n(); ++j) e += z[j] * nu.U();
            acc += nu.defect() * std::exp(e);
        }
    }
    return acc;
}

inline cdouble pair_exponential(const SignedGridMeasure& m, const ComplexPoint& z)
{
    return m.pair_exponential_window(z);
}

// integral of an exponential polynomial against a (signed) grid measure
template <class Measure>
cdouble pair_polynomial(const Measure& m, const ExponentialPolynomial& p)
{
    cdouble acc = 0.0;
    for (const auto& term : p.terms())
        acc += term.coef * m.pair_exponential_window(to_complex(term.decay));
    return acc;
}

// --- b_t ----------------------------------------------------------------------

// b_t(p) = sum_j c_j e^{t psi(s_j)} psi(s_j)
inline cdouble bt_closed_form(const BernsteinFunction& psi, double t,
                              const ExponentialPolynomial& p)
{
    cdouble acc = 0.0;
    for (const auto& term : p.terms()) {
        for (double s : term.decay)
            if (!(s < 0.0)) throw domain_error("bt: decay rates must be in the open negative orthant");
        const cdouble ps = psi.value(to_complex(term.decay));
        acc += term.coef * std::exp(t * ps) * ps;
    }
    return acc;
}

// b_t(p) = int int p(r) d_r(nu_t(r-u) - nu_t(r)) dmu(u): outer quadrature over
// mu nodes, inner pairing with exact exponential shifts p(r+u).
inline cdouble bt_double_integral(const BernsteinFunction& psi, const GridMeasure& nu,
                                  const ExponentialPolynomial& p)
{
    if (p.n() != nu.n()) throw shape_error("bt_double_integral: dimension mismatch");
    // L_l = int e^{s_l . r} d nu(r), defect-aware
    std::vector<cdouble> L;
    L.reserve(p.terms().size());
    double coef_scale = 0.0, decay_scale = 0.0;
    for (const auto& term : p.terms()) {
        L.push_back(pair_exponential(nu, to_complex(term.decay), &psi));
        coef_scale += std::abs(term.coef);
        double l1 = 0.0;
        for (double s : term.decay) l1 += std::fabs(s);
        decay_scale = std::max(decay_scale, l1);
    }
    cdouble acc = 0.0;
    psi.measure().for_each_node(
        coef_scale * decay_scale, 2.0 * coef_scale, 1e-12, [&](const RealPoint& u, double w) {
            cdouble inner = 0.0;
            for (std::size_t l = 0; l < L.size(); ++l) {
                const auto& term = p.terms()[l];
                double e = 0.0;
                for (int j = 0; j < nu.n(); ++j) e += term.decay[j] * u[j];
                inner += term.coef * cexpm1(cdouble(e, 0.0)) * L[l];
            }
            acc += w * inner;
        });
    return acc;
}

// --- K(nu_t, mu) lower bound ---------------------------------------------------

struct KSearchOptions {
    int budget = 200;   // candidate evaluations
    int max_terms = 8;  // term-count cap (documented)
    std::uint64_t seed = 1;
};

struct KEstimate {
    double lower_bound = 0.0;
    ExponentialPolynomial best{1, {}};
    int evaluations = 0;
};

// Randomized search over normalized exponential polynomials; returns the best
// |b_t(p)| / ||p||_sup found — a certified lower bound for K(nu_t, mu).
inline KEstimate estimate_K(const BernsteinFunction& psi, const GridMeasure& nu,
                            const KSearchOptions& opt = {})
{
    const int n = nu.n();
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto seed_poly = [&]() {
        std::vector<ExpTerm> terms(1);
        terms[0].coef = 1.0;
        terms[0].decay.assign(n, -1.0);
        return ExponentialPolynomial(n, std::move(terms));
    };

    KEstimate best;
    best.best = seed_poly();
    auto consider = [&](const ExponentialPolynomial& p) {
        const double sn = p.sup_norm().value;
        if (sn <= 1e-12) return;
        const double v = std::abs(bt_double_integral(psi, nu, p)) / sn;
        ++best.evaluations;
        if (v > best.lower_bound) {
            best.lower_bound = v;
            best.best = p;
        }
    };
    consider(best.best);
    for (int it = 0; it < opt.budget; ++it) {
        const int m = 1 + int(unif(rng) * opt.max_terms) % opt.max_terms;
        std::vector<ExpTerm> terms(m);
        for (auto& term : terms) {
            term.coef = cdouble(gauss(rng), gauss(rng));
            term.decay.resize(n);
            for (int j = 0; j < n; ++j)
                term.decay[j] = -std::exp(std::log(0.05) + unif(rng) * (std::log(5.0) - std::log(0.05)));
        }
        consider(ExponentialPolynomial(n, std::move(terms)));
    }
    return best;
}

// --- weak continuity ------------------------------------------------------------

struct WeakContinuityReport {
    std::vector<double> t_values;
    std::vector<double> deviations; // max over the test set of |nu_t(p) - nu_t0(p)|
    bool pass = false;
};

// nu_t(p) = sum c_j e^{t psi(s_j)} in closed form; dyadic approach t -> t0.
inline WeakContinuityReport weak_continuity_probe(const BernsteinFunction& psi, double t0,
                                                  const std::vector<ExponentialPolynomial>& tests,
                                                  double tol = 1e-8, int levels = 20)
{
    sub_detail::require_T0(psi);
    WeakContinuityReport rep;
    auto nu_of = [&](double t, const ExponentialPolynomial& p) {
        cdouble acc = 0.0;
        for (const auto& term : p.terms())
            acc += term.coef * std::exp(t * psi.value(to_complex(term.decay)));
        return acc;
    };
    for (int k = 1; k <= levels; ++k) {
        const double dt = std::ldexp(1.0, -k);
        double dev = 0.0;
        for (const auto& p : tests) {
            dev = std::max(dev, std::abs(nu_of(t0 + dt, p) - nu_of(t0, p)));
            if (t0 - dt >= 0.0)
                dev = std::max(dev, std::abs(nu_of(t0 - dt, p) - nu_of(t0, p)));
        }
        rep.t_values.push_back(dt);
        rep.deviations.push_back(dev);
    }
    rep.pass = tests.empty() || rep.deviations.back() < tol;
    for (std::size_t i = 1; i < rep.deviations.size(); ++i)
        if (rep.deviations[i] > rep.deviations[i - 1] + tol) rep.pass = false;
    return rep;
}

} // namespace bpcalc
