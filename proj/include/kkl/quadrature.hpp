#pragma once

/**
 * @file quadrature.hpp
 * @brief Adaptive one-dimensional quadrature used throughout the library.
 *
 * Thin layer over the QUADPACK routines shipped with GSL (QAGS, QAGP, QAGIL,
 * QAGIU). Each call owns its workspace, so concurrent calls are safe. A call
 * that ends with an error estimate above its tolerance raises NumericError
 * carrying the partial value.
 */

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "kkl/errors.hpp"

namespace kkl {

struct QuadratureConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-300;
    int max_subdivisions = 2000;
    /// Separates the small-time singular regime from the tail in time integrals.
    double t_split = 1.0;

    void validate() const {
        require(rel_tol > 0.0 && rel_tol < 1.0, "rel_tol must lie in (0, 1)");
        require(abs_tol > 0.0 && abs_tol < 1.0, "abs_tol must lie in (0, 1)");
        require(max_subdivisions > 0, "max_subdivisions must be positive");
        require(t_split > 0.0, "t_split must be positive");
    }

    /// Tolerances for an integral nested inside another one.
    QuadratureConfig inner() const {
        QuadratureConfig q = *this;
        q.rel_tol = std::max(rel_tol * 1e-2, 1e-13);
        q.abs_tol = std::max(abs_tol * 1e-2, 1e-300);
        return q;
    }
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

inline void disable_gsl_abort() {
    static std::once_flag flag;
    std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

struct WorkspaceDeleter {
    void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};
using Workspace = std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter>;

inline Workspace make_workspace(int size) {
    disable_gsl_abort();
    return Workspace(gsl_integration_workspace_alloc(static_cast<size_t>(size)));
}

// GSL reports roundoff trouble even when the estimate is usable; accept the
// result when the error estimate is within a small factor of the target.
inline QuadResult check(int status, double value, double error, const QuadratureConfig& q,
                        const char* routine) {
    if (std::isnan(value)) {
        throw NumericError(std::string(routine) + ": integrand produced NaN", value, error);
    }
    const double target = std::max(q.abs_tol, q.rel_tol * std::fabs(value));
    if (status != GSL_SUCCESS && error > 100.0 * target) {
        std::ostringstream os;
        os << routine << ": " << gsl_strerror(status) << " (value " << value << ", error "
           << error << ")";
        throw NumericError(os.str(), value, error);
    }
    return {value, error};
}

// Exceptions must not unwind through the C frames of GSL: the trampoline
// parks them and run() rethrows once the routine has returned.
template <class F>
struct Call {
    F* f;
    std::exception_ptr error;
};

template <class F>
double trampoline(double x, void* params) {
    auto* call = static_cast<Call<F>*>(params);
    if (call->error) return 0.0;
    try {
        return (*call->f)(x);
    } catch (...) {
        call->error = std::current_exception();
        return 0.0;
    }
}

template <class F, class Routine>
QuadResult run(F& f, const QuadratureConfig& q, const char* name, Routine&& routine) {
    auto ws = make_workspace(q.max_subdivisions);
    Call<F> call{&f, nullptr};
    gsl_function g{&trampoline<F>, &call};
    double value = 0.0, error = 0.0;
    const int status = routine(&g, ws.get(), &value, &error);
    if (call.error) std::rethrow_exception(call.error);
    return check(status, value, error, q, name);
}

}  // namespace detail

/// ∫_a^b f with endpoint singularities handled by extrapolation (QAGS).
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureConfig& q) {
    if (a == b) return {};
    using Fn = std::remove_reference_t<F>;
    const auto limit = static_cast<size_t>(q.max_subdivisions);
    return detail::run<Fn>(f, q, "qags", [&](gsl_function* g, auto* ws, double* v, double* e) {
        return gsl_integration_qags(g, a, b, q.abs_tol, q.rel_tol, limit, ws, v, e);
    });
}

/// ∫_a^b f with known interior breakpoints (kinks, jumps, singularities).
template <class F>
QuadResult integrate_breaks(F&& f, double a, double b, std::vector<double> breaks,
                            const QuadratureConfig& q) {
    if (a == b) return {};
    std::vector<double> pts{a};
    std::sort(breaks.begin(), breaks.end());
    for (double x : breaks)
        if (x > pts.back() && x < b) pts.push_back(x);
    pts.push_back(b);
    if (pts.size() == 2) return integrate(std::forward<F>(f), a, b, q);
    using Fn = std::remove_reference_t<F>;
    const auto limit = static_cast<size_t>(q.max_subdivisions);
    return detail::run<Fn>(f, q, "qagp", [&](gsl_function* g, auto* ws, double* v, double* e) {
        return gsl_integration_qagp(g, pts.data(), pts.size(), q.abs_tol, q.rel_tol, limit, ws, v,
                                    e);
    });
}

/// ∫_a^∞ f.
template <class F>
QuadResult integrate_upper(F&& f, double a, const QuadratureConfig& q) {
    using Fn = std::remove_reference_t<F>;
    const auto limit = static_cast<size_t>(q.max_subdivisions);
    return detail::run<Fn>(f, q, "qagiu", [&](gsl_function* g, auto* ws, double* v, double* e) {
        return gsl_integration_qagiu(g, a, q.abs_tol, q.rel_tol, limit, ws, v, e);
    });
}

/// ∫_{-∞}^b f.
template <class F>
QuadResult integrate_lower(F&& f, double b, const QuadratureConfig& q) {
    using Fn = std::remove_reference_t<F>;
    const auto limit = static_cast<size_t>(q.max_subdivisions);
    return detail::run<Fn>(f, q, "qagil", [&](gsl_function* g, auto* ws, double* v, double* e) {
        return gsl_integration_qagil(g, b, q.abs_tol, q.rel_tol, limit, ws, v, e);
    });
}

/// ∫_{-∞}^∞ f.
template <class F>
QuadResult integrate_line(F&& f, const QuadratureConfig& q) {
    using Fn = std::remove_reference_t<F>;
    const auto limit = static_cast<size_t>(q.max_subdivisions);
    return detail::run<Fn>(f, q, "qagi", [&](gsl_function* g, auto* ws, double* v, double* e) {
        return gsl_integration_qagi(g, q.abs_tol, q.rel_tol, limit, ws, v, e);
    });
}

/// Golden-section maximization of a unimodal function on [a, b].
template <class F>
double golden_maximize(F&& f, double a, double b, double tol, double* argmax = nullptr) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (std::fabs(b - a) > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if (argmax) *argmax = fc > fd ? c : d;
    return std::max(fc, fd);
}

}  // namespace kkl
