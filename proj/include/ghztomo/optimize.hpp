// optimize.hpp
// Unconstrained local minimizers for the small smooth objectives in this
// library: a derivative-free simplex search for the angle fits and a
// dense BFGS for the likelihood, which has an analytic gradient.

#pragma once

#include <functional>
#include <vector>

namespace ghztomo::optimize {

using Objective = std::function<double(const std::vector<double>&)>;
// Returns the value and writes the gradient into the second argument.
using GradientObjective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct NelderMeadOptions {
  double initial_step = 0.5;
  double f_tolerance = 1e-13;
  double x_tolerance = 1e-10;
  int max_evaluations = 200000;
  // Simplex rebuilds around the incumbent after each convergence, to escape
  // false convergence on degenerate simplices.
  int max_restarts = 4;
};

struct BfgsOptions {
  double relative_f_tolerance = 1e-10;
  double step_tolerance = 1e-8;
  double gradient_tolerance = 1e-9;
  int max_iterations = 100000;
};

struct Minimum {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  // Objective after each accepted iteration (BFGS only).
  std::vector<double> trace;
};

Minimum nelder_mead(const Objective& f, std::vector<double> start,
                    const NelderMeadOptions& options = {});

Minimum bfgs(const GradientObjective& f, std::vector<double> start, const BfgsOptions& options = {});

// Central-difference gradient, used to verify analytic gradients in tests.
std::vector<double> numerical_gradient(const Objective& f, const std::vector<double>& x,
                                       double step = 1e-6);

}  // namespace ghztomo::optimize
