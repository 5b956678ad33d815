#pragma once

// Box-constrained Levenberg-Marquardt for small dense problems. Steps are
// projected onto the bounds; damping uses Marquardt's diagonal scaling.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace regime_bench {

struct LeastSquaresOptions {
    int max_iterations = 2000;
    double function_tolerance = 1.5e-8; // relative cost decrease
    double parameter_tolerance = 1e-8;  // relative step size
    double gradient_tolerance = 1e-16;
    double initial_lambda = 1e-3;
    double max_lambda = 1e16;
};

template <int N>
struct LeastSquaresResult {
    Eigen::Matrix<double, N, 1> x;
    double cost = 0.0;  // 0.5 * ||r||^2
    int iterations = 0;
    bool converged = false;
};

/// `eval(x, r, J)` fills residuals r (m) and Jacobian J (m x N) at x.
template <int N, typename Eval>
LeastSquaresResult<N> bounded_levenberg_marquardt(Eval&& eval, Eigen::Matrix<double, N, 1> x,
                                                  const Eigen::Matrix<double, N, 1>& lower,
                                                  const Eigen::Matrix<double, N, 1>& upper,
                                                  const LeastSquaresOptions& opt = {}) {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;
    auto project = [&](Vec v) { return v.cwiseMax(lower).cwiseMin(upper).eval(); };

    x = project(x);
    Eigen::VectorXd r;
    Eigen::Matrix<double, Eigen::Dynamic, N> J;
    eval(x, r, J);
    double cost = 0.5 * r.squaredNorm();
    double lambda = opt.initial_lambda;

    LeastSquaresResult<N> res;
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        const Mat JtJ = J.transpose() * J;
        const Vec g = J.transpose() * r;

        // Projected gradient: components pushing against an active bound vanish.
        Vec pg = g;
        for (int i = 0; i < N; ++i) {
            if ((x[i] <= lower[i] && g[i] > 0) || (x[i] >= upper[i] && g[i] < 0)) pg[i] = 0;
        }
        if (pg.template lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance || cost == 0.0) {
            res.converged = true;
            break;
        }

        Vec diag = JtJ.diagonal();
        const double floor = std::max(diag.maxCoeff() * 1e-12, std::numeric_limits<double>::min());
        diag = diag.cwiseMax(floor);

        bool accepted = false;
        while (lambda <= opt.max_lambda) {
            Mat A = JtJ;
            A.diagonal() += lambda * diag;
            const Vec step = A.ldlt().solve(-g);
            const Vec x_new = project(x + step);
            Eigen::VectorXd r_new;
            Eigen::Matrix<double, Eigen::Dynamic, N> J_new;
            eval(x_new, r_new, J_new);
            const double cost_new = 0.5 * r_new.squaredNorm();
            if (std::isfinite(cost_new) && cost_new < cost) {
                const double decrease = cost - cost_new;
                const double dx = (x_new - x).norm();
                x = x_new;
                r = std::move(r_new);
                J = std::move(J_new);
                cost = cost_new;
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (decrease <= opt.function_tolerance * cost ||
                    dx <= opt.parameter_tolerance * (x.norm() + opt.parameter_tolerance)) {
                    res.converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // No descent direction left at any damping: a stationary point.
            res.converged = true;
            break;
        }
        if (res.converged) break;
    }
    res.x = x;
    res.cost = cost;
    return res;
}

}  // namespace regime_bench
