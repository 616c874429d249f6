#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "scatterhom/errors.hpp"

namespace scatterhom {
namespace quad {

namespace detail {

// 15-point Kronrod nodes/weights on [-1,1] with the embedded 7-point Gauss
// rule (xgk indices 1,3,5,7).
inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gk15(const F& f, double a, double b, double& value, double& error) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    fv[7] = f(c);
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * xgk[i]);
        fv[14 - i] = f(c + h * xgk[i]);
    }
    double resk = wgk[7] * fv[7];
    double resg = wg[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        resk += wgk[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) resg += wg[i / 2] * (fv[i] + fv[14 - i]);
    }
    value = resk * h;
    error = std::abs((resk - resg) * h);
}

struct Cell {
    double a, b, value, error;
    bool operator<(const Cell& o) const { return error < o.error; }
};

// Global-error refinement: keep bisecting the worst cell until the summed
// error estimate meets the tolerance. Handles algebraic endpoint
// singularities (e.g. quantiles behaving like u^{2/k} near zero) that defeat
// fixed per-interval budgets.
template <typename F>
inline double adapt(const F& f, double a, double b, double tol) {
    constexpr int max_cells = 20000;
    std::vector<Cell> heap;
    heap.reserve(256);
    auto make_cell = [&](double lo, double hi) {
        Cell c{lo, hi, 0.0, 0.0};
        gk15(f, lo, hi, c.value, c.error);
        if (!std::isfinite(c.value)) throw QuadratureFailureError("non-finite integrand value");
        return c;
    };
    heap.push_back(make_cell(a, b));
    double total_error = heap.front().error;
    while (total_error > tol) {
        if (static_cast<int>(heap.size()) >= max_cells)
            throw QuadratureFailureError("adaptive quadrature: tolerance unreachable");
        std::pop_heap(heap.begin(), heap.end());
        const Cell worst = heap.back();
        heap.pop_back();
        total_error -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        for (const Cell& half : {make_cell(worst.a, mid), make_cell(mid, worst.b)}) {
            total_error += half.error;
            heap.push_back(half);
            std::push_heap(heap.begin(), heap.end());
        }
    }
    double sum = 0.0;
    for (const Cell& c : heap) sum += c.value;
    return sum;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to absolute tolerance.
template <typename F>
inline double integrate(const F& f, double a, double b, double tol = 1e-9) {
    return detail::adapt(f, a, b, tol);
}

/// Integrates f over the unit interval, where typical integrands diverge
/// (slower than any power) at u -> 1. The right half is handled through the
/// substitution u = 1 - exp(-t), and f receives both u and 1-u so that
/// upper-tail quantities can be evaluated from the exactly-represented
/// complement. Stops extending the tail once blocks stop contributing.
template <typename F2>
inline double integrate_unit(const F2& f, double tol = 1e-9) {
    double total = detail::adapt([&](double u) { return f(u, 1.0 - u); }, 0.0, 0.5, 0.5 * tol);
    double lo = std::log(2.0);
    const double block = 25.0;
    for (int chunk = 0; chunk < 28; ++chunk) {
        const double hi = lo + block;
        const double piece = detail::adapt(
            [&](double t) {
                const double w = std::exp(-t);
                return f(1.0 - w, w) * w;
            },
            lo, hi, 0.25 * tol / (1 << std::min(chunk, 6)));
        total += piece;
        if (std::abs(piece) < 0.01 * tol) break;
        lo = hi;
    }
    return total;
}

}  // namespace quad
}  // namespace scatterhom
