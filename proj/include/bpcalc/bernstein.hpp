// SPDX-License-Identifier: Apache-2.0
#pragma once

// Nonpositive Bernstein functions of n variables represented by Lévy triplets
// (c0, c1, mu) with
//     psi(z) = c0 + c1.z + int_{R+^n \ 0} (e^{z.u} - 1) dmu(u),   Re z_j <= 0.
//
// Measure variants: explicit atoms, a grid density with a declared tail, and
// closed-form families carried as 1-d densities pushed forward along a ray
// (stable, gamma) or as the divided-difference construction of a 1-d base
// triplet (two variables).
//
// Quadrature: the Lévy integral is split at the ray parameter r = min(1, 1/|w|)
// (w = z.a).  Below the split the integrand is O(r) against a possibly
// r^{-1-alpha}-singular density and is integrated on log-graded Gauss-Legendre
// panels; above it the oscillatory part int e^{wr} p(r) dr is rotated onto the
// contour r = r0 - conj(w)/|w| tau where the factor decays like e^{-|w| tau},
// and the tail mass enters analytically.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bpcalc/errors.hpp"
#include "bpcalc/special.hpp"

#include "json.hpp"

namespace bpcalc {

using cdouble = std::complex<double>;
using RealPoint = std::vector<double>;
using ComplexPoint = std::vector<cdouble>;

inline cdouble dot(const ComplexPoint& z, const RealPoint& a)
{
    cdouble s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += z[j] * a[j];
    return s;
}

// e^w - 1 without cancellation for small |w|
inline cdouble cexpm1(cdouble w)
{
    if (std::abs(w) < 1e-4)
        return w * (1.0 + w * (0.5 + w * (1.0 / 6.0 + w / 24.0)));
    return std::exp(w) - 1.0;
}

inline ComplexPoint to_complex(const RealPoint& s)
{
    ComplexPoint z(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) z[j] = cdouble(s[j], 0.0);
    return z;
}

namespace detail {

// One-dimensional ray density with the analytic data the quadrature needs.
struct RayDensity {
    // density value at complex argument (Re tau > 0), principal branches
    std::function<cdouble(cdouble)> p;
    // m1(eps) = int_0^eps r p(r) dr  (monotone, used for the lower cutoff)
    std::function<double(double)> first_moment_below;
    // tail(R) = int_R^inf p(r) dr
    std::function<double(double)> tail_mass;
    bool tail_first_moment_finite; // int^inf r p(r) dr < inf ?
};

// int_a^b f(r) dr with r = e^x substitution, 16-point Gauss-Legendre.
template <class F>
cdouble gl_panel_log(const F& f, double a, double b)
{
    const auto& g = gauss_legendre_16();
    const double xa = std::log(a), xb = std::log(b);
    const double c = 0.5 * (xa + xb), hw = 0.5 * (xb - xa);
    cdouble acc = 0.0;
    for (int i = 0; i < 16; ++i) {
        const double x = c + hw * g.x[i];
        const double r = std::exp(x);
        acc += g.w[i] * f(r) * r;
    }
    return acc * hw;
}

template <class F>
cdouble gl_panel(const F& f, double a, double b)
{
    const auto& g = gauss_legendre_16();
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    cdouble acc = 0.0;
    for (int i = 0; i < 16; ++i) acc += g.w[i] * f(c + hw * g.x[i]);
    return acc * hw;
}

constexpr double kQuadTol = 1e-12;
constexpr int kPanelsPerDecade = 2;

// I(w) = int_0^inf (e^{w r} - 1) p(r) dr for Re w <= 0.
inline cdouble ray_levy_transform(const RayDensity& d, cdouble w)
{
    if (w == cdouble(0.0, 0.0)) return 0.0;
    const double aw = std::abs(w);
    const double r_split = std::min(1.0, 1.0 / aw);

    // lower cutoff: |int_0^eps (e^{wr}-1) p| <= |w| m1(eps)
    double r_lo = r_split;
    {
        double lo = 1e-300, hi = r_split;
        if (aw * d.first_moment_below(hi) <= kQuadTol) {
            r_lo = hi;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = std::sqrt(lo * hi);
                if (aw * d.first_moment_below(mid) > kQuadTol) hi = mid; else lo = mid;
                if (hi / lo < 1.2) break;
            }
            r_lo = lo;
        }
    }

    cdouble acc = 0.0;
    if (r_lo < r_split) {
        const int decades = int(std::ceil(std::log10(r_split / r_lo)));
        const int panels = std::max(1, decades * kPanelsPerDecade);
        const double ratio = std::pow(r_split / r_lo, 1.0 / panels);
        double a = r_lo;
        for (int k = 0; k < panels; ++k) {
            const double b = (k + 1 == panels) ? r_split : a * ratio;
            acc += gl_panel_log([&](double r) { return cexpm1(w * r) * d.p(cdouble(r, 0.0)); }, a, b);
            a = b;
        }
    }

    // tail: -tail_mass(r_split) + int_{r_split}^inf e^{wr} p(r) dr on the
    // rotated contour r = r_split + dir*tau, dir = -conj(w)/|w|.
    acc -= d.tail_mass(r_split);
    const cdouble dir = -std::conj(w) / aw;
    const double tau_max = 46.0 / aw; // e^{-46} ~ 1e-20
    const double tau_first = std::min(r_split, 1.0 / aw) * 0.25;
    auto along = [&](double tau) {
        const cdouble r = r_split + dir * tau;
        return std::exp(w * r) * d.p(r);
    };
    cdouble tail = gl_panel(along, 0.0, tau_first);
    {
        const int decades = int(std::ceil(std::log10(tau_max / tau_first)));
        const int panels = std::max(1, decades * 3);
        const double ratio = std::pow(tau_max / tau_first, 1.0 / panels);
        double a = tau_first;
        for (int k = 0; k < panels; ++k) {
            const double b = a * ratio;
            tail += gl_panel_log([&](double t) { return along(t); }, a, b);
            a = b;
        }
    }
    acc += dir * tail;
    return acc;
}

// D(w) = int_0^inf r e^{w r} p(r) dr (derivative of the transform).
// Finite only when the tail first moment converges or Re w < 0; on the
// imaginary axis the rotated contour still converges for power tails.
inline cdouble ray_levy_transform_derivative(const RayDensity& d, cdouble w)
{
    const double aw = std::abs(w);
    const double r_split = (aw == 0.0) ? 1.0 : std::min(1.0, 1.0 / aw);
    double r_lo = 1e-300;
    cdouble acc = 0.0;
    {
        const int decades = int(std::ceil(std::log10(r_split / r_lo)));
        const int panels = std::max(1, decades * kPanelsPerDecade);
        const double ratio = std::pow(r_split / r_lo, 1.0 / panels);
        double a = r_lo;
        for (int k = 0; k < panels; ++k) {
            const double b = (k + 1 == panels) ? r_split : a * ratio;
            acc += gl_panel_log([&](double r) { return r * std::exp(w * r) * d.p(cdouble(r, 0.0)); }, a, b);
            a = b;
        }
    }
    if (aw == 0.0) {
        if (!d.tail_first_moment_finite)
            throw integrability_error("ray measure: first moment diverges at infinity");
        // real-axis tail, no oscillation at w = 0
        double a = r_split;
        for (int k = 0; k < 400; ++k) {
            const double b = a * 2.0;
            acc += gl_panel_log([&](double r) { return r * d.p(cdouble(r, 0.0)); }, a, b);
            a = b;
            if (a * d.tail_mass(a) < kQuadTol && a > 1e3) break;
        }
        return acc;
    }
    const cdouble dir = -std::conj(w) / aw;
    const double tau_max = 46.0 / aw;
    const double tau_first = std::min(r_split, 1.0 / aw) * 0.25;
    auto along = [&](double tau) {
        const cdouble r = r_split + dir * tau;
        return r * std::exp(w * r) * d.p(r);
    };
    cdouble tail = gl_panel(along, 0.0, tau_first);
    {
        const int decades = int(std::ceil(std::log10(tau_max / tau_first)));
        const int panels = std::max(1, decades * 3);
        const double ratio = std::pow(tau_max / tau_first, 1.0 / panels);
        double a = tau_first;
        for (int k = 0; k < panels; ++k) {
            const double b = a * ratio;
            tail += gl_panel_log([&](double t) { return along(t); }, a, b);
            a = b;
        }
    }
    return acc + dir * tail;
}

// J(w,R) = int_R^inf e^{w r} p(r) dr on the rotated contour (Re w <= 0, w != 0).
inline cdouble ray_tail_exp_integral(const RayDensity& d, cdouble w, double R)
{
    const double aw = std::abs(w);
    const cdouble dir = -std::conj(w) / aw;
    const double tau_max = 46.0 / aw;
    const double tau_first = std::min(R, 1.0 / aw) * 0.25;
    auto along = [&](double tau) {
        const cdouble r = R + dir * tau;
        return std::exp(w * r) * d.p(r);
    };
    cdouble tail = gl_panel(along, 0.0, tau_first);
    const int decades = int(std::ceil(std::log10(tau_max / tau_first)));
    const int panels = std::max(1, decades * 3);
    const double ratio = std::pow(tau_max / tau_first, 1.0 / panels);
    double a = tau_first;
    for (int k = 0; k < panels; ++k) {
        const double b = a * ratio;
        tail += gl_panel_log([&](double t) { return along(t); }, a, b);
        a = b;
    }
    return dir * tail;
}

// Real-axis node mesh (r_k, w_k) for quadratures that cannot rotate
// (operator-valued integrands, bt pairings).  Truncates where
// sup_bound * tail_mass < tol and lin_bound * m1 < tol.
inline void ray_nodes(const RayDensity& d, double lin_bound, double sup_bound,
                      double tol, std::vector<std::pair<double, double>>& out)
{
    out.clear();
    double r_lo = 1e-300, hi = 1.0;
    if (lin_bound * d.first_moment_below(hi) > tol) {
        double lo = 1e-300;
        for (int it = 0; it < 200; ++it) {
            const double mid = std::sqrt(lo * hi);
            if (lin_bound * d.first_moment_below(mid) > tol) hi = mid; else lo = mid;
            if (hi / lo < 1.2) break;
        }
        r_lo = lo;
        hi = 1.0;
    }
    double r_hi = 1.0;
    for (int k = 0; k < 2000; ++k) {
        if (sup_bound * d.tail_mass(r_hi) < tol) break;
        r_hi *= 1.5;
    }
    const auto& g = gauss_legendre_16();
    const int decades = int(std::ceil(std::log10(r_hi / r_lo)));
    const int panels = std::max(1, decades * kPanelsPerDecade);
    const double ratio = std::pow(r_hi / r_lo, 1.0 / panels);
    double a = r_lo;
    for (int k = 0; k < panels; ++k) {
        const double b = (k + 1 == panels) ? r_hi : a * ratio;
        const double xa = std::log(a), xb = std::log(b);
        const double c = 0.5 * (xa + xb), hw = 0.5 * (xb - xa);
        for (int i = 0; i < 16; ++i) {
            const double r = std::exp(c + hw * g.x[i]);
            const double pr = d.p(cdouble(r, 0.0)).real();
            out.emplace_back(r, g.w[i] * hw * pr * r);
        }
        a = b;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------

class LevyMeasure;
using LevyMeasurePtr = std::shared_ptr<const LevyMeasure>;

struct Atom {
    RealPoint location; // in R+^n \ {0}
    double weight;      // > 0
};

struct TailDescriptor {
    double coef = 0.0;     // tail mass ~ coef * R^{-exponent} e^{-rate R}
    double exponent = 0.0;
    double rate = 0.0;
    bool present = false;
};

// A positive measure on R+^n \ {0} integrating 1 - e^{-1.u}.
class LevyMeasure {
public:
    enum class Kind { atoms, grid_density, stable, gamma, example1, sum };

    static LevyMeasure make_sum(std::vector<std::pair<double, LevyMeasurePtr>> parts)
    {
        if (parts.empty()) throw parameter_error("sum measure: no parts");
        LevyMeasure m;
        m.kind_ = Kind::sum;
        m.n_ = parts.front().second->n();
        for (const auto& [c, p] : parts) {
            if (c < 0.0) throw parameter_error("sum measure: coefficients must be >= 0");
            if (p->n() != m.n_) throw parameter_error("sum measure: dimension mismatch");
        }
        m.parts_ = std::move(parts);
        return m;
    }

    static LevyMeasure make_atoms(int n, std::vector<Atom> atoms)
    {
        LevyMeasure m;
        m.kind_ = Kind::atoms;
        m.n_ = n;
        for (const auto& a : atoms) {
            if (int(a.location.size()) != n)
                throw parameter_error("atom dimension mismatch");
            if (a.weight < 0.0) throw parameter_error("atom weight must be >= 0");
            double s = 0.0;
            for (double x : a.location) {
                if (x < 0.0) throw parameter_error("atom location must lie in R+^n");
                s += x;
            }
            if (s == 0.0) throw parameter_error("atom at the origin is not allowed");
        }
        m.atoms_ = std::move(atoms);
        return m;
    }

    static LevyMeasure make_grid_density(int n, double U, std::vector<double> values,
                                         TailDescriptor tail = {})
    {
        LevyMeasure m;
        m.kind_ = Kind::grid_density;
        m.n_ = n;
        m.grid_U_ = U;
        std::size_t per_axis = 1;
        // values must be a perfect n-th power of a per-axis count
        std::size_t cnt = values.size();
        per_axis = std::size_t(std::llround(std::pow(double(cnt), 1.0 / n)));
        std::size_t check = 1;
        for (int j = 0; j < n; ++j) check *= per_axis;
        if (check != cnt) throw parameter_error("grid density: size is not a perfect n-th power");
        for (double v : values)
            if (v < 0.0 || !std::isfinite(v)) throw parameter_error("grid density values must be >= 0 and finite");
        m.grid_values_ = std::move(values);
        m.grid_per_axis_ = per_axis;
        m.tail_ = tail;
        if (!tail.present) {
            // density must have decayed at the window boundary
            const double h = U / double(per_axis);
            double edge = 0.0;
            for (std::size_t i = 0; i < m.grid_values_.size(); ++i) {
                bool boundary = false;
                std::size_t rest = i;
                for (int j = n - 1; j >= 0; --j) {
                    if (rest % per_axis == per_axis - 1) boundary = true;
                    rest /= per_axis;
                }
                if (boundary) edge += m.grid_values_[i] * std::pow(h, n);
            }
            if (edge > 1e-9)
                throw integrability_error("grid density: no tail descriptor and boundary mass is not negligible");
        }
        return m;
    }

    static LevyMeasure make_stable(double alpha, RealPoint a)
    {
        if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("stable: alpha must lie in (0,1)");
        check_direction(a);
        LevyMeasure m;
        m.kind_ = Kind::stable;
        m.n_ = int(a.size());
        m.alpha_ = alpha;
        m.dir_ = std::move(a);
        return m;
    }

    static LevyMeasure make_gamma(RealPoint a)
    {
        check_direction(a);
        LevyMeasure m;
        m.kind_ = Kind::gamma;
        m.n_ = int(a.size());
        m.dir_ = std::move(a);
        return m;
    }

    // Two-variable image measure of d(mu1)(v) dw under u = ((v+w)/2, (v-w)/2):
    // uniform line density on the segment {(x, v-x): 0 <= x <= v} per unit of
    // base measure at v.
    static LevyMeasure make_example1(LevyMeasurePtr base)
    {
        if (base->n() != 1) throw parameter_error("example1: base measure must be one-dimensional");
        LevyMeasure m;
        m.kind_ = Kind::example1;
        m.n_ = 2;
        m.base_ = std::move(base);
        return m;
    }

    Kind kind() const { return kind_; }
    int n() const { return n_; }
    double stable_alpha() const { return alpha_; }
    const RealPoint& direction() const { return dir_; }
    const LevyMeasurePtr& example1_base() const { return base_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<std::pair<double, LevyMeasurePtr>>& parts() const { return parts_; }
    bool is_ray() const { return kind_ == Kind::stable || kind_ == Kind::gamma; }

    // total mass; +inf for the infinite-activity families
    double total_mass() const
    {
        switch (kind_) {
        case Kind::atoms: {
            double s = 0.0;
            for (const auto& a : atoms_) s += a.weight;
            return s;
        }
        case Kind::grid_density: {
            const double h = grid_U_ / double(grid_per_axis_);
            double s = std::accumulate(grid_values_.begin(), grid_values_.end(), 0.0) * std::pow(h, n_);
            if (tail_.present) s += tail_mass_descriptor(grid_U_);
            return s;
        }
        case Kind::stable:
        case Kind::gamma:
            return std::numeric_limits<double>::infinity();
        case Kind::example1: {
            // mass = int v dmu1(v): finite iff the base first moment is
            const double fm = base_->first_moment();
            return fm;
        }
        case Kind::sum: {
            double s = 0.0;
            for (const auto& [c, p] : parts_) s += c * p->total_mass();
            return s;
        }
        }
        return 0.0;
    }

    bool finite_activity() const { return std::isfinite(total_mass()); }

    // int (u.1) dmu(u) — needed for the example-1 omega and tail reasoning.
    double first_moment() const
    {
        switch (kind_) {
        case Kind::atoms: {
            double s = 0.0;
            for (const auto& a : atoms_)
                s += a.weight * std::accumulate(a.location.begin(), a.location.end(), 0.0);
            return s;
        }
        case Kind::grid_density: {
            const double h = grid_U_ / double(grid_per_axis_);
            double s = 0.0;
            for (std::size_t i = 0; i < grid_values_.size(); ++i) {
                std::size_t rest = i;
                double coord_sum = 0.0;
                for (int j = n_ - 1; j >= 0; --j) {
                    coord_sum += (double(rest % grid_per_axis_) + 0.5) * h;
                    rest /= grid_per_axis_;
                }
                s += grid_values_[i] * coord_sum * std::pow(h, n_);
            }
            return s; // descriptor tails in tests carry negligible moment
        }
        case Kind::stable:
            return std::numeric_limits<double>::infinity(); // int r^{-alpha} diverges
        case Kind::gamma: {
            double s = std::accumulate(dir_.begin(), dir_.end(), 0.0);
            return s; // int r e^{-r}/r dr = 1 per unit direction sum
        }
        case Kind::example1:
            // int (u1+u2) dmu = int v^2/... : not needed
            throw parameter_error("first_moment: unsupported for example1");
        case Kind::sum: {
            double s = 0.0;
            for (const auto& [c, p] : parts_) s += c * p->first_moment();
            return s;
        }
        }
        return 0.0;
    }

    // Lévy transform int (e^{z.u} - 1) dmu(u) by the measure-variant quadrature.
    cdouble levy_transform(const ComplexPoint& z) const
    {
        switch (kind_) {
        case Kind::atoms: {
            cdouble s = 0.0;
            for (const auto& a : atoms_) {
                cdouble e = 0.0;
                for (int j = 0; j < n_; ++j) e += z[j] * a.location[j];
                s += a.weight * cexpm1(e);
            }
            return s;
        }
        case Kind::grid_density: {
            const double h = grid_U_ / double(grid_per_axis_);
            cdouble s = 0.0;
            for (std::size_t i = 0; i < grid_values_.size(); ++i) {
                if (grid_values_[i] == 0.0) continue;
                std::size_t rest = i;
                cdouble e = 0.0;
                for (int j = n_ - 1; j >= 0; --j) {
                    e += z[j] * (double(rest % grid_per_axis_) + 0.5) * h;
                    rest /= grid_per_axis_;
                }
                s += grid_values_[i] * cexpm1(e) * std::pow(h, n_);
            }
            if (tail_.present) {
                // lumped tail node at the diagonal corner
                cdouble e = 0.0;
                for (int j = 0; j < n_; ++j) e += z[j] * grid_U_;
                s += tail_mass_descriptor(grid_U_) * cexpm1(e);
            }
            return s;
        }
        case Kind::stable:
        case Kind::gamma:
            return detail::ray_levy_transform(ray_density(), dot(z, dir_));
        case Kind::example1:
            return example1_transform(z);
        case Kind::sum: {
            cdouble s = 0.0;
            for (const auto& [c, p] : parts_) s += c * p->levy_transform(z);
            return s;
        }
        }
        return 0.0;
    }

    bool has_fast_transform() const
    {
        if (kind_ != Kind::sum) return true; // every leaf variant has one
        for (const auto& [c, p] : parts_)
            if (!p->has_fast_transform()) return false;
        return true;
    }

    // Exact/cheap transform where one exists (closed forms, finite sums);
    // nullopt means callers must go through levy_transform.
    std::optional<cdouble> fast_transform(const ComplexPoint& z) const
    {
        switch (kind_) {
        case Kind::atoms:
        case Kind::grid_density:
            return levy_transform(z); // already an exact finite sum
        case Kind::stable:
            return -principal_pow(-dot(z, dir_), alpha_);
        case Kind::gamma:
            return -std::log(1.0 - dot(z, dir_));
        case Kind::example1: {
            const cdouble z1 = z[0], z2 = z[1];
            const double omega = base_->first_moment();
            auto base_value = [&](cdouble w) {
                ComplexPoint q{w};
                auto f = base_->fast_transform(q);
                return f ? *f : base_->levy_transform(q);
            };
            if (std::abs(z1 - z2) < 1e-9 * (1.0 + std::abs(z1)))
                return base_->ray_transform_derivative(z1) - omega;
            return (base_value(z1) - base_value(z2)) / (z1 - z2) - omega;
        }
        case Kind::sum: {
            cdouble s = 0.0;
            for (const auto& [c, p] : parts_) {
                auto f = p->fast_transform(z);
                if (!f) return std::nullopt;
                s += c * (*f);
            }
            return s;
        }
        }
        return std::nullopt;
    }

    // d/dw of the ray transform at w = z.a (ray families, n arbitrary) or the
    // plain derivative for 1-d atom/grid measures: int (u.e_j ...) reduced to
    // the ray parameter.  Used by the spectral fit and the example-1 diagonal.
    cdouble ray_transform_derivative(cdouble w) const
    {
        switch (kind_) {
        case Kind::stable:
        case Kind::gamma:
            return detail::ray_levy_transform_derivative(ray_density(), w);
        case Kind::atoms: {
            if (n_ != 1) throw parameter_error("ray_transform_derivative: 1-d only for atoms");
            cdouble s = 0.0;
            for (const auto& a : atoms_) s += a.weight * a.location[0] * std::exp(w * a.location[0]);
            return s;
        }
        case Kind::grid_density: {
            if (n_ != 1) throw parameter_error("ray_transform_derivative: 1-d only for grid density");
            const double h = grid_U_ / double(grid_per_axis_);
            cdouble s = 0.0;
            for (std::size_t i = 0; i < grid_values_.size(); ++i) {
                const double u = (double(i) + 0.5) * h;
                s += grid_values_[i] * u * std::exp(w * u) * h;
            }
            return s;
        }
        case Kind::sum: {
            cdouble s = 0.0;
            for (const auto& [c, p] : parts_) s += c * p->ray_transform_derivative(w);
            return s;
        }
        default:
            throw parameter_error("ray_transform_derivative: unsupported variant");
        }
    }

    // Normalized tail pairing for the subordination defect model:
    //   W(z) = int_{tail} e^{z.u} dmu / mu(tail)
    // with tail = the part of the ray beyond the window [0,U]^n.  The
    // heavy-tail correspondence nu_t(tail) ~ t mu(tail) makes this the right
    // shape for pairing the unwindowed nu_t mass; W(0) = 1 exactly, so the
    // bookkept defect is reproduced at z = 0.  Returns nullopt when no ray
    // structure is available.
    std::optional<cdouble> nu_tail_model(const ComplexPoint& z, double window_U) const
    {
        switch (kind_) {
        case Kind::stable:
        case Kind::gamma: {
            const auto d = ray_density();
            const double R = window_U / *std::max_element(dir_.begin(), dir_.end());
            const double tm = d.tail_mass(R);
            if (tm <= 0.0) return cdouble(0.0, 0.0);
            const cdouble w = dot(z, dir_);
            if (std::abs(w) < 1e-300) return cdouble(1.0, 0.0);
            return detail::ray_tail_exp_integral(d, w, R) / tm;
        }
        case Kind::sum: {
            cdouble num = 0.0;
            double den = 0.0;
            for (const auto& [c, p] : parts_) {
                if (!p->is_ray()) return std::nullopt;
                const auto d = p->ray_density();
                const double R = window_U / *std::max_element(p->dir_.begin(), p->dir_.end());
                const double tm = d.tail_mass(R);
                const cdouble w = dot(z, p->direction());
                num += c * (std::abs(w) < 1e-300 ? cdouble(tm, 0.0)
                                                 : detail::ray_tail_exp_integral(d, w, R));
                den += c * tm;
            }
            if (den <= 0.0) return cdouble(0.0, 0.0);
            return num / den;
        }
        default:
            return std::nullopt;
        }
    }

    // Enumerate quadrature nodes (u, weight).  lin_bound and sup_bound describe
    // the integrand (|f(u)| <= lin_bound * |u| near 0, |f| <= sup_bound), and
    // control the truncation of singular and tail parts.
    template <class F>
    void for_each_node(double lin_bound, double sup_bound, double tol, F&& fn) const
    {
        const std::function<void(const RealPoint&, double)> erased = std::ref(fn);
        for_each_node_impl(lin_bound, sup_bound, tol, erased);
    }

    void for_each_node_impl(double lin_bound, double sup_bound, double tol,
                            const std::function<void(const RealPoint&, double)>& fn) const
    {
        switch (kind_) {
        case Kind::atoms:
            for (const auto& a : atoms_) fn(a.location, a.weight);
            return;
        case Kind::grid_density: {
            const double h = grid_U_ / double(grid_per_axis_);
            RealPoint u(n_);
            for (std::size_t i = 0; i < grid_values_.size(); ++i) {
                if (grid_values_[i] == 0.0) continue;
                std::size_t rest = i;
                for (int j = n_ - 1; j >= 0; --j) {
                    u[j] = (double(rest % grid_per_axis_) + 0.5) * h;
                    rest /= grid_per_axis_;
                }
                fn(u, grid_values_[i] * std::pow(h, n_));
            }
            if (tail_.present) {
                RealPoint corner(n_, grid_U_);
                fn(corner, tail_mass_descriptor(grid_U_));
            }
            return;
        }
        case Kind::stable:
        case Kind::gamma: {
            std::vector<std::pair<double, double>> nodes;
            detail::ray_nodes(ray_density(), lin_bound, sup_bound, tol, nodes);
            RealPoint u(n_);
            for (const auto& [r, w] : nodes) {
                for (int j = 0; j < n_; ++j) u[j] = r * dir_[j];
                fn(u, w);
            }
            return;
        }
        case Kind::example1: {
            const auto& g = gauss_legendre_16();
            RealPoint u(2);
            auto segment = [&](double v, double wv) {
                // uniform density on {(x, v-x): 0 <= x <= v}
                const double c = 0.5 * v, hw = 0.5 * v;
                for (int i = 0; i < 16; ++i) {
                    const double x = c + hw * g.x[i];
                    u[0] = x;
                    u[1] = v - x;
                    fn(u, wv * g.w[i] * hw);
                }
            };
            // integrand on the segment has |f| <= lin_bound * v and the segment
            // carries total weight v per unit base mass
            if (base_->kind_ == Kind::atoms) {
                for (const auto& a : base_->atoms_) segment(a.location[0], a.weight);
            } else if (base_->is_ray()) {
                std::vector<std::pair<double, double>> nodes;
                // f-integral over the segment scales like v, so the effective
                // near-origin bound gains one power of v: reuse lin_bound.
                detail::ray_nodes(base_->ray_density(), lin_bound, sup_bound, tol, nodes);
                for (const auto& [v, w] : nodes) segment(v, w);
            } else if (base_->kind_ == Kind::grid_density) {
                const double h = base_->grid_U_ / double(base_->grid_per_axis_);
                for (std::size_t i = 0; i < base_->grid_values_.size(); ++i) {
                    if (base_->grid_values_[i] == 0.0) continue;
                    segment((double(i) + 0.5) * h, base_->grid_values_[i] * h);
                }
            } else {
                throw parameter_error("example1: unsupported base variant");
            }
            return;
        }
        case Kind::sum: {
            for (const auto& [c, p] : parts_) {
                const double coef = c;
                if (coef == 0.0) continue;
                p->for_each_node_impl(lin_bound, sup_bound, tol / std::max(1.0, coef),
                                      [&](const RealPoint& u, double w) { fn(u, coef * w); });
            }
            return;
        }
        }
    }

    // Lévy integrability check: int (1 - e^{-1.u}) dmu finite under quadrature.
    double integrability_functional() const
    {
        ComplexPoint z(n_, cdouble(-1.0, 0.0));
        const cdouble v = levy_transform(z);
        if (!std::isfinite(v.real()))
            throw integrability_error("Levy integrability functional is not finite");
        return -v.real();
    }

    nlohmann::json to_json() const;
    static LevyMeasure from_json(const nlohmann::json& j);

private:
    static void check_direction(const RealPoint& a)
    {
        if (a.empty()) throw parameter_error("direction must be non-empty");
        double s = 0.0;
        for (double x : a) {
            if (x < 0.0) throw parameter_error("direction weights must be >= 0");
            s += x;
        }
        if (s == 0.0) throw parameter_error("direction must be nonzero");
    }

    double tail_mass_descriptor(double R) const
    {
        if (!tail_.present) return 0.0;
        return tail_.coef * std::pow(R, -tail_.exponent) * std::exp(-tail_.rate * R);
    }

    detail::RayDensity ray_density() const
    {
        detail::RayDensity d;
        if (kind_ == Kind::stable) {
            const double alpha = alpha_;
            const double c = alpha / std::tgamma(1.0 - alpha);
            d.p = [c, alpha](cdouble r) { return c * principal_pow(r, -1.0 - alpha); };
            d.first_moment_below = [c, alpha](double eps) {
                return c * std::pow(eps, 1.0 - alpha) / (1.0 - alpha);
            };
            d.tail_mass = [c, alpha](double R) { return (c / alpha) * std::pow(R, -alpha); };
            d.tail_first_moment_finite = false;
        } else if (kind_ == Kind::gamma) {
            d.p = [](cdouble r) { return std::exp(-r) / r; };
            d.first_moment_below = [](double eps) { return -std::expm1(-eps); };
            d.tail_mass = [](double R) { return expint_e1(R); };
            d.tail_first_moment_finite = true;
        } else {
            throw parameter_error("ray_density: not a ray family");
        }
        return d;
    }

    cdouble example1_transform(const ComplexPoint& z) const
    {
        // int over segments: per base node v, int_0^v (e^{z1 x + z2 (v-x)} - 1) dx
        auto segment_integral = [&](double v) -> cdouble {
            const cdouble z1 = z[0], z2 = z[1];
            const cdouble dz = z1 - z2;
            if (std::abs(dz) * v < 1e-8) {
                // series in dz around the diagonal
                const cdouble zm = 0.5 * (z1 + z2);
                // int_0^v e^{zm v + dz(x - v/2)} dx - v  ~ v e^{zm v}(1 + (dz v)^2/24) - v
                const cdouble corr = 1.0 + dz * v * dz * v / 24.0;
                return v * (std::exp(zm * v) * corr - 1.0);
            }
            return (std::exp(z1 * v) - std::exp(z2 * v)) / dz - v;
        };
        cdouble acc = 0.0;
        if (base_->kind_ == Kind::atoms) {
            for (const auto& a : base_->atoms_) acc += a.weight * segment_integral(a.location[0]);
        } else if (base_->is_ray()) {
            // |segment_integral(v)| <= |z| v^2 / 2 near 0 — integrable against
            // any base first moment; reuse the ray mesh with lin bound |z| v.
            std::vector<std::pair<double, double>> nodes;
            const double zb = std::abs(z[0]) + std::abs(z[1]);
            detail::ray_nodes(base_->ray_density(), zb, 2.0 + zb, detail::kQuadTol, nodes);
            for (const auto& [v, w] : nodes) acc += w * segment_integral(v);
        } else if (base_->kind_ == Kind::grid_density) {
            const double h = base_->grid_U_ / double(base_->grid_per_axis_);
            for (std::size_t i = 0; i < base_->grid_values_.size(); ++i)
                acc += base_->grid_values_[i] * h * segment_integral((double(i) + 0.5) * h);
        } else {
            throw parameter_error("example1: unsupported base variant");
        }
        return acc;
    }

    Kind kind_ = Kind::atoms;
    int n_ = 1;
    std::vector<Atom> atoms_;
    std::vector<double> grid_values_;
    std::size_t grid_per_axis_ = 0;
    double grid_U_ = 0.0;
    TailDescriptor tail_;
    double alpha_ = 0.0;
    RealPoint dir_;
    LevyMeasurePtr base_;
    std::vector<std::pair<double, LevyMeasurePtr>> parts_;
};

// ---------------------------------------------------------------------------

// psi(z) = c0 + c1.z + int (e^{z.u}-1) dmu.  Immutable after construction.
class BernsteinFunction {
public:
    enum class ClosedForm { none, stable, gamma, example1 };

    BernsteinFunction(int n, double c0, RealPoint c1, LevyMeasure mu,
                      ClosedForm tag = ClosedForm::none)
        : n_(n), c0_(c0), c1_(std::move(c1)), mu_(std::move(mu)), tag_(tag)
    {
        if (n_ < 1) throw parameter_error("dimension must be >= 1");
        if (c0_ > 0.0) throw parameter_error("c0 must be <= 0");
        if (int(c1_.size()) != n_) throw parameter_error("c1 dimension mismatch");
        for (double c : c1_)
            if (c < 0.0) throw parameter_error("c1 components must be >= 0");
        if (mu_.n() != n_) throw parameter_error("measure dimension mismatch");
        bool c1zero = true;
        for (double c : c1_) c1zero = c1zero && (c == 0.0);
        is_T0_ = (c0_ == 0.0) && c1zero;
    }

    int n() const { return n_; }
    double c0() const { return c0_; }
    const RealPoint& c1() const { return c1_; }
    const LevyMeasure& measure() const { return mu_; }
    // class T_n^0: c0 = 0 and c1 = 0 — the only class the subordination,
    // operator and analyticity modules accept
    bool is_T0() const { return is_T0_; }
    ClosedForm closed_form() const { return tag_; }

    // quadrature evaluation on the closed negative orthant
    cdouble eval_complex(const ComplexPoint& z) const
    {
        check_domain(z);
        if (is_zero_point(z)) return cdouble(c0_, 0.0);
        cdouble v = cdouble(c0_, 0.0);
        for (int j = 0; j < n_; ++j) v += c1_[j] * z[j];
        return v + mu_.levy_transform(z);
    }

    double eval_real(const RealPoint& s) const
    {
        for (double x : s)
            if (x > 0.0) throw domain_error("eval_real: s must lie in (-inf,0]^n");
        return eval_complex(to_complex(s)).real();
    }

    // closed-form evaluator where attached (oracle / fast path)
    bool has_closed_form() const { return mu_.has_fast_transform(); }

    cdouble closed_form_eval(const ComplexPoint& z) const
    {
        check_domain(z);
        auto f = mu_.fast_transform(z);
        if (!f) throw parameter_error("no closed form attached");
        cdouble v = cdouble(c0_, 0.0) + *f;
        for (int j = 0; j < n_; ++j) v += c1_[j] * z[j];
        return v;
    }

    // preferred evaluator: exact/cheap transform when one exists, quadrature
    // otherwise
    cdouble value(const ComplexPoint& z) const
    {
        check_domain(z);
        auto f = mu_.fast_transform(z);
        if (!f) return eval_complex(z);
        cdouble v = cdouble(c0_, 0.0) + *f;
        for (int j = 0; j < n_; ++j) v += c1_[j] * z[j];
        return v;
    }

    double value_real(const RealPoint& s) const { return value(to_complex(s)).real(); }

    // d psi / d w along a ray family's parameter (or the 1-d derivative)
    cdouble derivative(cdouble w) const
    {
        switch (tag_) {
        case ClosedForm::stable:
            return mu_.stable_alpha() * principal_pow(-w, mu_.stable_alpha() - 1.0);
        case ClosedForm::gamma:
            return 1.0 / (1.0 - w);
        default:
            return mu_.ray_transform_derivative(w) + (n_ == 1 ? c1_[0] : 0.0);
        }
    }

    // defect tail-shape model (see LevyMeasure::nu_tail_model)
    std::optional<cdouble> tail_model(const ComplexPoint& z, double R) const
    {
        return mu_.nu_tail_model(z, R);
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["n"] = n_;
        j["c0"] = c0_;
        j["c1"] = c1_;
        j["measure"] = mu_.to_json();
        return j;
    }

    static BernsteinFunction from_json(const nlohmann::json& j)
    {
        LevyMeasure mu = LevyMeasure::from_json(j.at("measure"));
        ClosedForm tag = ClosedForm::none;
        switch (mu.kind()) {
        case LevyMeasure::Kind::stable: tag = ClosedForm::stable; break;
        case LevyMeasure::Kind::gamma: tag = ClosedForm::gamma; break;
        case LevyMeasure::Kind::example1: tag = ClosedForm::example1; break;
        default: break;
        }
        return BernsteinFunction(j.at("n").get<int>(), j.at("c0").get<double>(),
                                 j.at("c1").get<RealPoint>(), std::move(mu), tag);
    }

private:
    void check_domain(const ComplexPoint& z) const
    {
        if (int(z.size()) != n_) throw shape_error("point dimension mismatch");
        for (const auto& zj : z)
            if (zj.real() > 0.0) throw domain_error("Re z_j must be <= 0");
    }

    static bool is_zero_point(const ComplexPoint& z)
    {
        for (const auto& zj : z)
            if (zj != cdouble(0.0, 0.0)) return false;
        return true;
    }

    int n_;
    double c0_;
    RealPoint c1_;
    LevyMeasure mu_;
    ClosedForm tag_;
    bool is_T0_ = false;
};

// --- constructors ----------------------------------------------------------

// psi(s) = -(-a.s)^alpha as the pushforward of (alpha/Gamma(1-alpha)) u^{-1-alpha} du
// along the ray {u a : u > 0}.
inline BernsteinFunction make_stable(double alpha, RealPoint a)
{
    const int n = int(a.size());
    return BernsteinFunction(n, 0.0, RealPoint(n, 0.0), LevyMeasure::make_stable(alpha, std::move(a)),
                             BernsteinFunction::ClosedForm::stable);
}

// psi(s) = -log(1 - a.s) with Lévy density u^{-1} e^{-u} along the ray.
inline BernsteinFunction make_gamma(RealPoint a)
{
    const int n = int(a.size());
    return BernsteinFunction(n, 0.0, RealPoint(n, 0.0), LevyMeasure::make_gamma(std::move(a)),
                             BernsteinFunction::ClosedForm::gamma);
}

// Divided-difference construction: psi(s1,s2) = (psi1(s1)-psi1(s2))/(s1-s2) - omega.
// Requires a 1-d base in T_1 with c1 = 0 and finite omega = psi1'(0-).
inline BernsteinFunction make_example1(const BernsteinFunction& psi1)
{
    if (psi1.n() != 1) throw parameter_error("example1: base must be one-dimensional");
    if (psi1.c1()[0] != 0.0) throw parameter_error("example1: base must have c1 = 0");
    auto base = std::make_shared<const LevyMeasure>(psi1.measure());
    const double omega = base->first_moment();
    if (!std::isfinite(omega))
        throw parameter_error("example1: omega = psi1'(0-) is not finite");
    return BernsteinFunction(2, 0.0, RealPoint(2, 0.0), LevyMeasure::make_example1(std::move(base)),
                             BernsteinFunction::ClosedForm::example1);
}

inline BernsteinFunction make_atoms(int n, std::vector<Atom> atoms)
{
    return BernsteinFunction(n, 0.0, RealPoint(n, 0.0), LevyMeasure::make_atoms(n, std::move(atoms)));
}

// Cone operation: triplet of the combination is the coefficient-weighted sum.
inline BernsteinFunction linear_combine(const std::vector<std::pair<double, BernsteinFunction>>& terms)
{
    if (terms.empty()) throw parameter_error("linear_combine: no terms");
    const int n = terms.front().second.n();
    double c0 = 0.0;
    RealPoint c1(n, 0.0);
    std::vector<std::pair<double, LevyMeasurePtr>> parts;
    for (const auto& [coef, psi] : terms) {
        if (coef < 0.0) throw parameter_error("linear_combine: coefficients must be >= 0");
        if (psi.n() != n) throw parameter_error("linear_combine: dimension mismatch");
        if (coef == 0.0) continue;
        c0 += coef * psi.c0();
        for (int j = 0; j < n; ++j) c1[j] += coef * psi.c1()[j];
        parts.emplace_back(coef, std::make_shared<const LevyMeasure>(psi.measure()));
    }
    if (parts.empty()) parts.emplace_back(0.0, std::make_shared<const LevyMeasure>(terms.front().second.measure()));
    if (parts.size() == 1 && parts.front().first == 1.0) {
        // plain copy keeps the part's own closed form
        for (const auto& [coef, psi] : terms)
            if (coef == 1.0) return psi;
    }
    return BernsteinFunction(n, c0, std::move(c1), LevyMeasure::make_sum(std::move(parts)));
}

// --- monotonicity probe ----------------------------------------------------

struct MonotonicityReport {
    double min_negated_value = 0.0; // min over samples of -psi(s)
    double min_partial = 0.0;       // min over samples/axes of forward differences
    bool pass = false;
};

// Finite-difference spot check of Definition-2 monotonicity on a sample grid
// strictly inside the open negative orthant.  Psi needs eval_real.
template <class Psi>
MonotonicityReport monotonicity_probe(const Psi& psi, const std::vector<RealPoint>& samples,
                                      double step = 1e-4, double tolerance = 1e-9)
{
    MonotonicityReport rep;
    rep.min_negated_value = std::numeric_limits<double>::infinity();
    rep.min_partial = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        const double v = psi.eval_real(s);
        rep.min_negated_value = std::min(rep.min_negated_value, -v);
        for (std::size_t j = 0; j < s.size(); ++j) {
            RealPoint sp = s;
            sp[j] += step; // toward 0: psi must not decrease
            if (sp[j] >= 0.0) continue;
            const double d = (psi.eval_real(sp) - v) / step;
            rep.min_partial = std::min(rep.min_partial, d);
        }
    }
    rep.pass = rep.min_negated_value >= -tolerance && rep.min_partial >= -tolerance;
    return rep;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json LevyMeasure::to_json() const
{
    nlohmann::json j;
    j["n"] = n_;
    switch (kind_) {
    case Kind::atoms: {
        j["variant"] = "atoms";
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& a : atoms_) {
            nlohmann::json item;
            item["u"] = a.location;
            item["w"] = a.weight;
            arr.push_back(item);
        }
        j["payload"]["atoms"] = arr;
        break;
    }
    case Kind::grid_density: {
        j["variant"] = "grid_density";
        j["payload"] = {{"U", grid_U_},
                        {"h", grid_U_ / double(grid_per_axis_)},
                        {"values", grid_values_}};
        if (tail_.present)
            j["payload"]["tail"] = {{"coef", tail_.coef}, {"exponent", tail_.exponent}, {"rate", tail_.rate}};
        break;
    }
    case Kind::stable:
        j["variant"] = "stable";
        j["payload"] = {{"alpha", alpha_}, {"a", dir_}};
        break;
    case Kind::gamma:
        j["variant"] = "gamma";
        j["payload"] = {{"a", dir_}};
        break;
    case Kind::example1:
        j["variant"] = "example1";
        j["payload"] = {{"base", base_->to_json()}};
        break;
    case Kind::sum: {
        j["variant"] = "sum";
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [c, p] : parts_) {
            nlohmann::json item;
            item["coef"] = c;
            item["measure"] = p->to_json();
            arr.push_back(item);
        }
        j["payload"]["parts"] = arr;
        break;
    }
    }
    return j;
}

inline LevyMeasure LevyMeasure::from_json(const nlohmann::json& j)
{
    const std::string variant = j.at("variant").get<std::string>();
    const int n = j.at("n").get<int>();
    const auto& p = j.at("payload");
    if (variant == "atoms") {
        std::vector<Atom> atoms;
        for (const auto& a : p.at("atoms"))
            atoms.push_back({a.at("u").get<RealPoint>(), a.at("w").get<double>()});
        return make_atoms(n, std::move(atoms));
    }
    if (variant == "grid_density") {
        TailDescriptor tail;
        if (p.contains("tail")) {
            tail.present = true;
            tail.coef = p["tail"].at("coef").get<double>();
            tail.exponent = p["tail"].at("exponent").get<double>();
            tail.rate = p["tail"].at("rate").get<double>();
        }
        return make_grid_density(n, p.at("U").get<double>(), p.at("values").get<std::vector<double>>(), tail);
    }
    if (variant == "stable")
        return make_stable(p.at("alpha").get<double>(), p.at("a").get<RealPoint>());
    if (variant == "gamma")
        return make_gamma(p.at("a").get<RealPoint>());
    if (variant == "example1") {
        auto base = std::make_shared<const LevyMeasure>(from_json(p.at("base")));
        return make_example1(std::move(base));
    }
    if (variant == "sum") {
        std::vector<std::pair<double, LevyMeasurePtr>> parts;
        for (const auto& item : p.at("parts"))
            parts.emplace_back(item.at("coef").get<double>(),
                               std::make_shared<const LevyMeasure>(from_json(item.at("measure"))));
        return make_sum(std::move(parts));
    }
    throw parameter_error("unknown measure variant: " + variant);
}

} // namespace bpcalc
