#include "ghztomo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace ghztomo::optimize {

namespace {

using Point = std::vector<double>;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd as_eigen(const Point& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

Point as_point(const Eigen::VectorXd& v) { return Point(v.data(), v.data() + v.size()); }

// One simplex search from `start`; the result carries the number of evaluations used.
Minimum simplex_run(const Objective& f, const Point& start, double step,
                    const NelderMeadOptions& options, int budget) {
  const std::size_t n = start.size();
  std::vector<Point> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += (start[i] != 0.0 ? step * std::max(1.0, std::abs(start[i])) : step);
  }
  int evals = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    values[i] = f(simplex[i]);
    ++evals;
  }

  std::vector<std::size_t> order(n + 1);
  Minimum out;
  bool converged = false;
  int iterations = 0;
  while (evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    double x_spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        x_spread = std::max(x_spread, std::abs(simplex[i][k] - simplex[best][k]));
      }
    }
    if (values[worst] - values[best] <= options.f_tolerance && x_spread <= options.x_tolerance) {
      converged = true;
      break;
    }
    if (values[worst] - values[best] <= 0.1 * options.f_tolerance) {
      converged = true;
      break;
    }
    ++iterations;

    Point centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    }
    auto along = [&](double coeff) {
      Point p(n);
      for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + coeff * (simplex[worst][k] - centroid[k]);
      return p;
    };

    Point reflected = along(-1.0);
    const double f_reflected = f(reflected);
    ++evals;
    if (f_reflected < values[best]) {
      Point expanded = along(-2.0);
      const double f_expanded = f(expanded);
      ++evals;
      if (f_expanded < f_reflected) {
        simplex[worst] = std::move(expanded);
        values[worst] = f_expanded;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = std::move(reflected);
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    Point contracted = along(outside ? -0.5 : 0.5);
    const double f_contracted = f(contracted);
    ++evals;
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = std::move(contracted);
      values[worst] = f_contracted;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) {
        simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
      }
      values[i] = f(simplex[i]);
      ++evals;
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best_index = static_cast<std::size_t>(best_it - values.begin());
  out.x = simplex[best_index];
  out.value = *best_it;
  out.iterations = iterations;
  out.evaluations = evals;
  out.converged = converged;
  return out;
}

}  // namespace

Minimum nelder_mead(const Objective& f, Point start, const NelderMeadOptions& options) {
  Minimum result = simplex_run(f, start, options.initial_step, options, options.max_evaluations);
  int used = result.evaluations;
  int iterations = result.iterations;
  double step = options.initial_step;
  for (int r = 0; r < options.max_restarts && used < options.max_evaluations; ++r) {
    step *= 0.5;
    Minimum again = simplex_run(f, result.x, step, options, options.max_evaluations - used);
    used += again.evaluations;
    iterations += again.iterations;
    const bool improved = again.value < result.value - options.f_tolerance;
    if (again.value < result.value) {
      again.evaluations = used;
      result = std::move(again);
    }
    if (!improved) break;
  }
  result.evaluations = used;
  result.iterations = iterations;
  return result;
}

Minimum bfgs(const GradientObjective& f, Point start, const BfgsOptions& options) {
  const auto n = static_cast<Eigen::Index>(start.size());
  Point grad_buf(start.size());
  Point x_buf = start;

  Eigen::VectorXd x = as_eigen(start);
  double fx = f(x_buf, grad_buf);
  Eigen::VectorXd g = as_eigen(grad_buf);
  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool fresh_hessian = true;

  Minimum out;
  out.evaluations = 1;
  out.trace.push_back(fx);

  auto gradient_small = [&](double tol) { return inf_norm(g) <= tol * std::max(1.0, std::abs(fx)); };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (gradient_small(options.gradient_tolerance)) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd direction = -inv_hessian * g;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      fresh_hessian = true;
      direction = -g;
      slope = g.dot(direction);
    }

    // Backtracking line search with the Armijo condition.
    double alpha = 1.0;
    double f_new = 0.0;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + alpha * direction;
      x_buf = as_point(x_new);
      f_new = f(x_buf, grad_buf);
      ++out.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!fresh_hessian) {
        inv_hessian.setIdentity();
        fresh_hessian = true;
        continue;
      }
      // No further decrease is representable; accept the current point if it is stationary.
      out.converged = gradient_small(1e-6);
      break;
    }

    const Eigen::VectorXd g_new = as_eigen(grad_buf);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double f_change = fx - f_new;

    x = x_new;
    g = g_new;
    fx = f_new;
    out.iterations = iter + 1;
    out.trace.push_back(fx);

    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (fresh_hessian) {
        inv_hessian *= sy / y.squaredNorm();
        fresh_hessian = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hessian * y;
      inv_hessian += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                     rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (f_change <= options.relative_f_tolerance * std::max(1.0, std::abs(fx)) &&
        inf_norm(s) <= options.step_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.x = as_point(x);
  out.value = fx;
  return out;
}

Point numerical_gradient(const Objective& f, const Point& x, double step) {
  Point grad(x.size());
  Point probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace ghztomo::optimize
