#include "fdiag/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fdiag {

namespace {

void project(std::vector<double>& x, double lower) {
    for (double& v : x) v = std::clamp(v, lower, 1.0);
}

double sanitize(double f) { return std::isnan(f) ? std::numeric_limits<double>::infinity() : f; }

BoxMinimum nelder_mead_once(const ScalarObjective& objective, const std::vector<double>& x0,
                            const NelderMeadOptions& opt, std::size_t budget) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> simplex(d + 1, x0);
    std::vector<double> values(d + 1);
    std::size_t evals = 0;
    auto eval = [&](std::vector<double>& x) {
        project(x, opt.lower);
        ++evals;
        return sanitize(objective(x));
    };
    for (std::size_t i = 0; i < d; ++i) {
        auto& v = simplex[i + 1];
        v[i] = v[i] + opt.initial_step <= 1.0 ? v[i] + opt.initial_step : v[i] - opt.initial_step;
    }
    for (std::size_t i = 0; i <= d; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    std::vector<double> centroid(d), trial(d), trial2(d);
    bool converged = false;
    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

        const double spread = values[worst] - values[best];
        double size = 0.0;
        for (std::size_t i = 0; i <= d; ++i)
            for (std::size_t j = 0; j < d; ++j) size = std::max(size, std::abs(simplex[i][j] - simplex[best][j]));
        if (spread <= opt.f_tolerance * std::abs(values[best]) || size <= opt.x_tolerance) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= d; ++i)
            if (i != worst)
                for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[i][j] / static_cast<double>(d);

        for (std::size_t j = 0; j < d; ++j) trial[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
        const double f_reflect = eval(trial);
        if (f_reflect < values[best]) {
            for (std::size_t j = 0; j < d; ++j) trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
            const double f_expand = eval(trial2);
            if (f_expand < f_reflect) {
                simplex[worst] = trial2;
                values[worst] = f_expand;
            } else {
                simplex[worst] = trial;
                values[worst] = f_reflect;
            }
            continue;
        }
        if (f_reflect < values[second]) {
            simplex[worst] = trial;
            values[worst] = f_reflect;
            continue;
        }
        const bool outside = f_reflect < values[worst];
        for (std::size_t j = 0; j < d; ++j)
            trial2[j] = outside ? centroid[j] + 0.5 * (trial[j] - centroid[j])
                                : centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]);
        const double f_contract = eval(trial2);
        if (f_contract < (outside ? f_reflect : values[worst])) {
            simplex[worst] = trial2;
            values[worst] = f_contract;
            continue;
        }
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < d; ++j)
                simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = eval(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best], evals, converged};
}

// Solves A x = b for a small dense symmetric system; false if singular.
bool solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n, std::vector<double>& x) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (!(std::abs(a[pivot * n + col]) > 0.0)) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
            b[r] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
        x[r] = s / a[r * n + r];
    }
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

BoxMinimum nelder_mead_box(const ScalarObjective& objective, std::vector<double> x0,
                           const NelderMeadOptions& options) {
    project(x0, options.lower);
    BoxMinimum first = nelder_mead_once(objective, x0, options, options.max_evaluations);
    if (!first.converged || first.evaluations >= options.max_evaluations) return first;
    // A restart from the optimum guards against a collapsed simplex.
    NelderMeadOptions again = options;
    again.initial_step = std::max(options.initial_step * 0.1, 1e-4);
    BoxMinimum second = nelder_mead_once(objective, first.x, again, options.max_evaluations - first.evaluations);
    second.evaluations += first.evaluations;
    if (second.value > first.value) {
        first.evaluations = second.evaluations;
        first.converged = second.converged;
        return first;
    }
    return second;
}

BoxMinimum levenberg_marquardt_box(const ResidualFunction& residuals, std::size_t m, std::vector<double> x,
                                   const LeastSquaresOptions& opt) {
    project(x, opt.lower);
    const std::size_t d = x.size();
    std::vector<double> r(m), r_trial(m), r_plus(m), r_minus(m), jac(m * d);
    std::size_t evals = 0;
    auto sum_sq = [](std::span<const double> v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return sanitize(s);
    };
    residuals(x, r);
    ++evals;
    double f = sum_sq(r);
    double mu = 1e-3;
    bool converged = false;
    std::vector<double> xp(d), xm(d), jtj(d * d), jtr(d), step, trial(d);

    for (std::size_t it = 0; it < opt.max_iterations && std::isfinite(f); ++it) {
        for (std::size_t j = 0; j < d; ++j) {
            xp = x;
            xm = x;
            const double h = opt.fd_step * std::max(1.0, std::abs(x[j]));
            xp[j] = std::min(1.0, x[j] + h);
            xm[j] = std::max(opt.lower, x[j] - h);
            residuals(xp, r_plus);
            residuals(xm, r_minus);
            evals += 2;
            const double width = xp[j] - xm[j];
            for (std::size_t i = 0; i < m; ++i) jac[i * d + j] = (r_plus[i] - r_minus[i]) / width;
        }
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = &jac[i * d];
            for (std::size_t a = 0; a < d; ++a) {
                jtr[a] += row[a] * r[i];
                for (std::size_t b = 0; b < d; ++b) jtj[a * d + b] += row[a] * row[b];
            }
        }
        bool improved = false;
        while (mu < 1e16) {
            std::vector<double> lhs = jtj;
            std::vector<double> rhs(d);
            for (std::size_t a = 0; a < d; ++a) {
                lhs[a * d + a] += mu * std::max(jtj[a * d + a], 1e-300);
                rhs[a] = -jtr[a];
            }
            if (!solve_dense(lhs, rhs, d, step)) {
                mu *= 4.0;
                continue;
            }
            for (std::size_t a = 0; a < d; ++a) trial[a] = x[a] + step[a];
            project(trial, opt.lower);
            residuals(trial, r_trial);
            ++evals;
            const double f_trial = sum_sq(r_trial);
            if (f_trial < f) {
                const double decrease = f - f_trial;
                x = trial;
                r.swap(r_trial);
                f = f_trial;
                mu = std::max(mu / 3.0, 1e-12);
                improved = true;
                if (decrease <= opt.f_tolerance * f || f == 0.0) converged = true;
                break;
            }
            mu *= 4.0;
        }
        if (!improved) {
            converged = true;
            break;
        }
        if (converged) break;
    }
    return {x, f, evals, converged};
}

}  // namespace fdiag
