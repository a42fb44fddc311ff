// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discretized (sub-)probability measures on [0,U]^n grids and the exponential
// polynomial test space E(R+^n).
//
// Grid convention: per axis, cells [m h, (m+1) h) for m = 0..N-1 with
// h = U/N; a cell's mass is paired at its midpoint.  Discrete convolution is
// index convolution, which keeps delta_0 (all mass in cell 0) an exact
// identity element.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <vector>

#include "bpcalc/errors.hpp"
#include "bpcalc/fft.hpp"

#include "json.hpp"

namespace bpcalc {

struct InversionInfo {
    double sigma = 0.0;          // damping used by the inversion
    double clipped_mass = 0.0;   // negative ripple mass removed
    double leakage = 0.0;        // measured mass on the negative orthant probe
    double origin_cell_weight = 0.0;
    double cheb_tail_bound = 0.0; // a-priori bound for the window defect
    bool reference_used = false; // power-law reference subtraction engaged
    double trunc_residual = 0.0; // |transform| left at the dual cutoff
};

namespace grid_detail {

inline std::size_t checked_pow(std::size_t base, int exp)
{
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

} // namespace grid_detail

// Nonnegative cell masses + an estimated defect (mass beyond the window).
class GridMeasure {
public:
    GridMeasure() = default;
    GridMeasure(int n, std::size_t per_axis, double U, std::vector<double> weights,
                double defect = 0.0)
        : n_(n), per_axis_(per_axis), U_(U), w_(std::move(weights)), defect_(defect)
    {
        if (w_.size() != grid_detail::checked_pow(per_axis_, n_))
            throw shape_error("grid measure: weight count does not match the grid");
        for (double v : w_)
            if (v < 0.0) throw parameter_error("grid measure: negative weight");
        if (defect_ < 0.0) throw parameter_error("grid measure: negative defect");
    }

    static GridMeasure delta0(int n, std::size_t per_axis, double U)
    {
        std::vector<double> w(grid_detail::checked_pow(per_axis, n), 0.0);
        w[0] = 1.0;
        return GridMeasure(n, per_axis, U, std::move(w));
    }

    int n() const { return n_; }
    std::size_t per_axis() const { return per_axis_; }
    double U() const { return U_; }
    double h() const { return U_ / double(per_axis_); }
    const std::vector<double>& weights() const { return w_; }
    std::vector<double>& weights() { return w_; }
    double defect() const { return defect_; }
    void set_defect(double d) { defect_ = d; }
    InversionInfo& info() { return info_; }
    const InversionInfo& info() const { return info_; }

    double total_mass() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

    // midpoint of cell (multi-index decoded from the flat index, row-major)
    void cell_center(std::size_t flat, std::vector<double>& out) const
    {
        out.resize(n_);
        const double step = h();
        for (int j = n_ - 1; j >= 0; --j) {
            out[j] = (double(flat % per_axis_) + 0.5) * step;
            flat /= per_axis_;
        }
    }

    // sum_m w_m e^{z . u_m} over cell midpoints (no tail model; see
    // subordinator.hpp for the defect-aware pairing)
    cdouble pair_exponential_window(const std::vector<cdouble>& z) const
    {
        if (int(z.size()) != n_) throw shape_error("pairing: dimension mismatch");
        const double step = h();
        if (n_ == 1) {
            cdouble acc = 0.0;
            const cdouble ez = std::exp(z[0] * step);
            cdouble cur = std::exp(z[0] * 0.5 * step);
            for (std::size_t m = 0; m < w_.size(); ++m) {
                acc += w_[m] * cur;
                cur *= ez;
            }
            return acc;
        }
        std::vector<double> u;
        cdouble acc = 0.0;
        for (std::size_t m = 0; m < w_.size(); ++m) {
            if (w_[m] == 0.0) continue;
            cell_center(m, u);
            cdouble e = 0.0;
            for (int j = 0; j < n_; ++j) e += z[j] * u[j];
            acc += w_[m] * std::exp(e);
        }
        return acc;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["n"] = n_;
        j["U"] = U_;
        j["h"] = h();
        j["weights"] = w_;
        j["defect"] = defect_;
        return j;
    }

    static GridMeasure from_json(const nlohmann::json& j)
    {
        const int n = j.at("n").get<int>();
        std::vector<double> w = j.at("weights").get<std::vector<double>>();
        std::size_t per_axis = std::size_t(std::llround(std::pow(double(w.size()), 1.0 / n)));
        return GridMeasure(n, per_axis, j.at("U").get<double>(), std::move(w),
                           j.at("defect").get<double>());
    }

protected:
    int n_ = 1;
    std::size_t per_axis_ = 0;
    double U_ = 0.0;
    std::vector<double> w_;
    double defect_ = 0.0;
    InversionInfo info_;
};

// Signed cell masses (weak derivatives nu'_t).
class SignedGridMeasure {
public:
    SignedGridMeasure() = default;
    SignedGridMeasure(int n, std::size_t per_axis, double U, std::vector<double> weights)
        : n_(n), per_axis_(per_axis), U_(U), w_(std::move(weights))
    {
        if (w_.size() != grid_detail::checked_pow(per_axis_, n_))
            throw shape_error("signed grid measure: weight count does not match the grid");
    }

    int n() const { return n_; }
    std::size_t per_axis() const { return per_axis_; }
    double U() const { return U_; }
    double h() const { return U_ / double(per_axis_); }
    const std::vector<double>& weights() const { return w_; }
    std::vector<double>& weights() { return w_; }
    InversionInfo& info() { return info_; }
    const InversionInfo& info() const { return info_; }

    double tv_mass() const
    {
        double s = 0.0;
        for (double v : w_) s += std::fabs(v);
        return s;
    }

    double total_signed_mass() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

    // TV mass restricted to cells whose center sum exceeds none (all cells are
    // in R+^n by construction); kept for symmetry with the leakage statistic.
    double origin_cell_weight() const { return w_.empty() ? 0.0 : w_[0]; }

    void cell_center(std::size_t flat, std::vector<double>& out) const
    {
        out.resize(n_);
        const double step = h();
        for (int j = n_ - 1; j >= 0; --j) {
            out[j] = (double(flat % per_axis_) + 0.5) * step;
            flat /= per_axis_;
        }
    }

    cdouble pair_exponential_window(const std::vector<cdouble>& z) const
    {
        if (int(z.size()) != n_) throw shape_error("pairing: dimension mismatch");
        const double step = h();
        if (n_ == 1) {
            cdouble acc = 0.0;
            const cdouble ez = std::exp(z[0] * step);
            cdouble cur = std::exp(z[0] * 0.5 * step);
            for (std::size_t m = 0; m < w_.size(); ++m) {
                acc += w_[m] * cur;
                cur *= ez;
            }
            return acc;
        }
        std::vector<double> u;
        cdouble acc = 0.0;
        for (std::size_t m = 0; m < w_.size(); ++m) {
            if (w_[m] == 0.0) continue;
            cell_center(m, u);
            cdouble e = 0.0;
            for (int j = 0; j < n_; ++j) e += z[j] * u[j];
            acc += w_[m] * std::exp(e);
        }
        return acc;
    }

private:
    int n_ = 1;
    std::size_t per_axis_ = 0;
    double U_ = 0.0;
    std::vector<double> w_;
    InversionInfo info_;
};

// Total-variation norm of the window weights; the defect is reported by the
// measure itself, not folded in here.
inline double tv_norm(const SignedGridMeasure& m) { return m.tv_mass(); }

// Discrete convolution truncated to the common window; truncation loss is
// added to the defect.  FFT-based for deterministic, commutative results.
inline GridMeasure convolve(const GridMeasure& a, const GridMeasure& b)
{
    if (a.n() != b.n() || a.per_axis() != b.per_axis() || a.U() != b.U())
        throw shape_error("convolve: grids do not match");
    const int n = a.n();
    const std::size_t N = a.per_axis();
    const std::size_t P = 2 * N; // zero-padded for linear convolution
    std::vector<std::size_t> ext(n, P);
    std::size_t total = grid_detail::checked_pow(P, n);
    std::vector<cdouble> fa(total, 0.0), fb(total, 0.0);

    // embed row-major N^n blocks into P^n
    const std::size_t count = a.weights().size();
    std::vector<std::size_t> idx(n);
    for (std::size_t m = 0; m < count; ++m) {
        std::size_t rest = m, pos = 0;
        for (int j = n - 1; j >= 0; --j) {
            idx[j] = rest % N;
            rest /= N;
        }
        for (int j = 0; j < n; ++j) pos = pos * P + idx[j];
        fa[pos] = a.weights()[m];
        fb[pos] = b.weights()[m];
    }
    fft_nd_forward(fa, ext);
    fft_nd_forward(fb, ext);
    for (std::size_t i = 0; i < total; ++i) fa[i] *= fb[i];
    fft_nd_inverse(fa, ext);

    std::vector<double> out(count, 0.0);
    double kept = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
        std::size_t rest = m, pos = 0;
        for (int j = n - 1; j >= 0; --j) {
            idx[j] = rest % N;
            rest /= N;
        }
        for (int j = 0; j < n; ++j) pos = pos * P + idx[j];
        const double v = std::max(0.0, fa[pos].real());
        out[m] = v;
        kept += v;
    }
    const double product_mass = (a.total_mass() + a.defect()) * (b.total_mass() + b.defect());
    const double defect = std::max(0.0, product_mass - kept);
    GridMeasure r(n, N, a.U(), std::move(out), defect);
    return r;
}

// --- exponential polynomials -------------------------------------------------

struct ExpTerm {
    cdouble coef;
    std::vector<double> decay; // s_j in (-inf,0)^n
};

struct SupNormResult {
    double value = 0.0;     // certified lower bound for sup |p|
    double gap_bound = 0.0; // Lipschitz-based upper-bound gap
    std::vector<double> argmax;
};

// p(r) = sum_j c_j e^{s_j . r} on R+^n with the sup norm.
class ExponentialPolynomial {
public:
    ExponentialPolynomial(int n, std::vector<ExpTerm> terms)
        : n_(n), terms_(std::move(terms))
    {
        for (const auto& t : terms_) {
            if (int(t.decay.size()) != n_) throw shape_error("exponential polynomial: dimension mismatch");
            for (double s : t.decay)
                if (!(s < 0.0)) throw parameter_error("exponential polynomial: decay rates must be < 0");
        }
    }

    int n() const { return n_; }
    const std::vector<ExpTerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    cdouble eval(const std::vector<double>& r) const
    {
        cdouble acc = 0.0;
        for (const auto& t : terms_) {
            double e = 0.0;
            for (int j = 0; j < n_; ++j) e += t.decay[j] * r[j];
            acc += t.coef * std::exp(e);
        }
        return acc;
    }

    ExponentialPolynomial scaled(cdouble factor) const
    {
        auto terms = terms_;
        for (auto& t : terms) t.coef *= factor;
        return ExponentialPolynomial(n_, std::move(terms));
    }

    // Coarse-grid scan plus three levels of 4x local refinement around the
    // best cell.  The result is a certified lower bound (>= |p(0)|); the
    // residual Lipschitz gap is reported, never hidden.
    SupNormResult sup_norm() const
    {
        SupNormResult res;
        if (terms_.empty()) return res;
        double coef_sum = 0.0, lip = 0.0, slowest = std::numeric_limits<double>::infinity();
        for (const auto& t : terms_) {
            coef_sum += std::abs(t.coef);
            double l1 = 0.0;
            for (double s : t.decay) {
                l1 += std::fabs(s);
                slowest = std::min(slowest, std::fabs(s));
            }
            lip += std::abs(t.coef) * l1;
        }
        // beyond R the bound sum|c| e^{-slowest * r_j ... } cannot beat |p(0)|
        const double p0 = std::abs(eval(std::vector<double>(n_, 0.0)));
        const double floor_val = std::max(p0, 1e-300);
        const double R = std::max(1.0, std::log(std::max(coef_sum / floor_val, 2.0) + 1.0) / slowest);

        const int coarse = 64;
        std::vector<double> best_r(n_, 0.0);
        double best = p0;
        std::vector<double> r(n_);
        std::vector<int> ix(n_, 0);
        const std::size_t cells = grid_detail::checked_pow(std::size_t(coarse) + 1, n_);
        for (std::size_t flat = 0; flat < cells; ++flat) {
            std::size_t rest = flat;
            for (int j = n_ - 1; j >= 0; --j) {
                r[j] = R * double(rest % (coarse + 1)) / double(coarse);
                rest /= (coarse + 1);
            }
            const double v = std::abs(eval(r));
            if (v > best) {
                best = v;
                best_r = r;
            }
        }
        double span = R / double(coarse);
        for (int level = 0; level < 3; ++level) {
            const int fine = 8; // 4x refinement per level, scanning +-span
            std::vector<double> center = best_r;
            const std::size_t sub = grid_detail::checked_pow(std::size_t(fine) + 1, n_);
            for (std::size_t flat = 0; flat < sub; ++flat) {
                std::size_t rest = flat;
                for (int j = n_ - 1; j >= 0; --j) {
                    const double off = (double(rest % (fine + 1)) / double(fine) - 0.5) * 2.0 * span;
                    r[j] = std::max(0.0, center[j] + off);
                    rest /= (fine + 1);
                }
                const double v = std::abs(eval(r));
                if (v > best) {
                    best = v;
                    best_r = r;
                }
            }
            span /= 4.0;
        }
        res.value = best;
        res.gap_bound = lip * span;
        res.argmax = best_r;
        return res;
    }

private:
    int n_;
    std::vector<ExpTerm> terms_;
};

inline double sup_norm(const ExponentialPolynomial& p)
{
    if (p.empty()) throw parameter_error("sup_norm: empty term list");
    return p.sup_norm().value;
}

} // namespace bpcalc
