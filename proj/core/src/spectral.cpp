#include "ybpop/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace yb {

namespace {

double sup_norm_diff(const StateVector& a, const StateVector& b) {
  double sup = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    sup = std::max(sup, std::abs(a[k] - b[k]));
  return sup;
}

double l1_norm_diff(const StateVector& a, const StateVector& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs(a[k] - b[k]);
  return sum;
}

}  // namespace

FixedPointResult find_period2_point(const PopulationMap& map,
                                    const StateVector& seed, double tol,
                                    int max_iter) {
  if (!(tol >= 0.0)) throw std::invalid_argument("find_period2_point: tol < 0");
  FixedPointResult out;
  StateVector current = seed;
  out.converged = false;
  int used = 0;
  while (used < max_iter) {
    StateVector next = map.advance_two(current);
    ++used;
    const double change = sup_norm_diff(next, current);
    current = std::move(next);
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.iterations_used = used;
  StateVector image = map.advance_two(current);
  out.sup_residual = sup_norm_diff(image, current);
  out.l1_residual = l1_norm_diff(image, current);
  out.point = std::move(current);
  return out;
}

Eigen::MatrixXd jacobian_two_year(const PopulationMap& map,
                                  const StateVector& point,
                                  JacobianScheme scheme, double fd_step,
                                  bool* kink_warning) {
  const int dim = map.dim();
  const int p = map.params().steps_per_year;
  if (static_cast<int>(point.size()) != dim)
    throw std::invalid_argument("jacobian_two_year: bad point dimension");
  if (kink_warning) *kink_warning = false;

  Eigen::MatrixXd jac(dim, dim);

  if (scheme == JacobianScheme::kFiniteDifference) {
    if (!(fd_step > 0.0))
      throw std::invalid_argument("jacobian_two_year: fd step must be > 0");
    if (kink_warning) {
      for (double v : point)
        if (std::abs(v - 1.0) < fd_step) *kink_warning = true;
    }
    StateVector probe = point;
    for (int j = 0; j < dim; ++j) {
      const double base = point[static_cast<std::size_t>(j)];
      probe[static_cast<std::size_t>(j)] = base + fd_step;
      StateVector plus = map.advance_two(probe);
      probe[static_cast<std::size_t>(j)] = base - fd_step;
      StateVector minus = map.advance_two(probe);
      probe[static_cast<std::size_t>(j)] = base;
      for (int i = 0; i < dim; ++i) {
        jac(i, j) = (plus[static_cast<std::size_t>(i)] -
                     minus[static_cast<std::size_t>(i)]) /
                    (2.0 * fd_step);
      }
    }
    return jac;
  }

  // Forward accumulation through the recursion: row_t of the extended
  // trajectory differential is (1/p) * sum_h g'(N_{t-h}) * w(t,h) * row_{t-h},
  // with row_k = e_k for the input entries.
  const int lifespan = map.max_lag();
  const int min_lag = map.min_lag();
  const int total = dim + 2 * p;
  std::vector<double> values(static_cast<std::size_t>(total));
  std::vector<double> slopes(static_cast<std::size_t>(total));
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(total, dim);
  for (int k = 0; k < dim; ++k) {
    values[static_cast<std::size_t>(k)] = point[static_cast<std::size_t>(k)];
    slopes[static_cast<std::size_t>(k)] =
        yield_slope(point[static_cast<std::size_t>(k)], map.params());
    rows(k, k) = 1.0;
  }
  const double inv_p = 1.0 / static_cast<double>(p);
  for (int t = dim; t < total; ++t) {
    double acc = 0.0;
    auto row = rows.row(t);
    for (int h = min_lag; h <= lifespan; ++h) {
      const double w = map.kernel_weight(t, h);
      if (w == 0.0) continue;
      const int src = t - h;
      acc += reproduction_yield(values[static_cast<std::size_t>(src)],
                                map.params()) *
             w;
      row += slopes[static_cast<std::size_t>(src)] * w * inv_p * rows.row(src);
    }
    values[static_cast<std::size_t>(t)] = acc * inv_p;
    slopes[static_cast<std::size_t>(t)] =
        yield_slope(values[static_cast<std::size_t>(t)], map.params());
  }
  for (int i = 0; i < dim; ++i) {
    jac.row(i) = rows.row(2 * p + i);
  }
  return jac;
}

FixedPointResult newton_polish(const PopulationMap& map,
                               const StateVector& guess, double tol,
                               int max_iter) {
  const int dim = map.dim();
  FixedPointResult out;
  StateVector x = guess;

  auto residual = [&](const StateVector& v, double* sup, double* l1,
                      StateVector* image) {
    StateVector img = map.advance_two(v);
    *sup = sup_norm_diff(img, v);
    *l1 = l1_norm_diff(img, v);
    if (image) *image = std::move(img);
  };

  double sup = 0.0, l1 = 0.0;
  StateVector image;
  residual(x, &sup, &l1, &image);

  int iter = 0;
  for (; iter < max_iter && sup > tol; ++iter) {
    Eigen::MatrixXd jac =
        jacobian_two_year(map, x, JacobianScheme::kAnalyticChain);
    Eigen::MatrixXd system = jac - Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd f(dim);
    for (int k = 0; k < dim; ++k)
      f(k) = image[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)];

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd delta = lu.solve(-f);
    const double solve_err = (system * delta + f).norm();
    if (!delta.allFinite() || solve_err > 1e-8 * std::max(1.0, f.norm())) {
      throw std::runtime_error("newton_polish: singular linear system at iteration " +
                               std::to_string(iter + 1));
    }

    // Damped update: halve the step until the sup residual improves.
    double lambda = 1.0;
    bool improved = false;
    StateVector candidate(static_cast<std::size_t>(dim));
    for (int halving = 0; halving < 8; ++halving, lambda *= 0.5) {
      bool positive = true;
      for (int k = 0; k < dim; ++k) {
        candidate[static_cast<std::size_t>(k)] =
            x[static_cast<std::size_t>(k)] + lambda * delta(k);
        if (!(candidate[static_cast<std::size_t>(k)] > 0.0)) positive = false;
      }
      if (!positive) continue;
      double cand_sup = 0.0, cand_l1 = 0.0;
      StateVector cand_image;
      residual(candidate, &cand_sup, &cand_l1, &cand_image);
      if (cand_sup < sup) {
        x = candidate;
        sup = cand_sup;
        l1 = cand_l1;
        image = std::move(cand_image);
        improved = true;
        break;
      }
    }
    if (!improved) {
      ++iter;
      break;  // diverged / stalled: report best-so-far, unconverged
    }
  }

  out.point = std::move(x);
  out.sup_residual = sup;
  out.l1_residual = l1;
  out.iterations_used = iter;
  out.converged = sup <= tol;
  return out;
}

SpectrumReport spectrum(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols())
    throw std::invalid_argument("spectrum: matrix must be square");
  const int n = static_cast<int>(matrix.rows());
  SpectrumReport report;

  // Power iteration with Rayleigh-quotient sign recovery.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  v.normalize();
  double rayleigh = 0.0;
  bool power_ok = false;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = matrix * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    w /= norm;
    const double next = w.dot(matrix * w) / w.squaredNorm();
    v = std::move(w);
    if (it > 0 && std::abs(next - rayleigh) < 1e-10) {
      rayleigh = next;
      power_ok = true;
      break;
    }
    rayleigh = next;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, /*computeEigenvectors=*/false);
  const auto& eigenvalues = solver.eigenvalues();
  report.all_moduli.resize(static_cast<std::size_t>(n));
  int dominant_index = 0;
  for (int k = 0; k < n; ++k) {
    report.all_moduli[static_cast<std::size_t>(k)] = std::abs(eigenvalues(k));
    if (std::abs(eigenvalues(k)) > std::abs(eigenvalues(dominant_index)))
      dominant_index = k;
  }
  std::sort(report.all_moduli.begin(), report.all_moduli.end(),
            std::greater<double>());
  report.subdominant_modulus = n > 1 ? report.all_moduli[1] : 0.0;

  const double dense_modulus = report.all_moduli[0];
  if (power_ok && std::abs(std::abs(rayleigh) - dense_modulus) <= 1e-6) {
    report.dominant = rayleigh;
  } else {
    // Near-defective or stagnating: take the dense dominant value, flagged.
    report.power_iteration_fallback = true;
    const std::complex<double> dom = eigenvalues(dominant_index);
    report.dominant = dom.real();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix);
  report.smallest_singular_value = svd.singularValues().tail(1)(0);
  return report;
}

StateVector load_state_file(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_state_file: cannot open " + path);
  StateVector state;
  double value = 0.0;
  while (in >> value) state.push_back(value);
  if (static_cast<int>(state.size()) != expected_dim) {
    throw std::runtime_error("load_state_file: " + path + " holds " +
                             std::to_string(state.size()) + " values, expected " +
                             std::to_string(expected_dim));
  }
  return state;
}

void save_state_file(const std::string& path, const StateVector& state) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_state_file: cannot open " + path);
  char buffer[64];
  for (double v : state) {
    std::snprintf(buffer, sizeof(buffer), "%.17g\n", v);
    out << buffer;
  }
  if (!out) throw std::runtime_error("save_state_file: write failed for " + path);
}

}  // namespace yb
