#include <algorithm>
#include <cmath>
#include <limits>

#include "contesta/error.hpp"
#include "contesta/models.hpp"

namespace contesta {

namespace {

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

constexpr double kTau = 1e-12;

}  // namespace

double SvmSolution::decision_value(std::span<const double> x) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < support_vectors.size(); ++i)
    sum += coefficients[i] * rbf(support_vectors[i], x, gamma);
  return sum - bias;
}

// Dual: min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C, Q_ij = y_i y_j K_ij.
// Working-set selection uses second-order information; no shrinking, the
// full kernel matrix is cached (training sets here are small).
SvmSolution solve_svm(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                      const SvmHypers& hypers, double tolerance) {
  const std::size_t n = rows.size();
  if (n != labels.size() || n < 2) fail(ErrorCode::InvalidArgument, "SVM needs >= 2 labelled rows");
  if (!(hypers.c > 0.0) || !(hypers.gamma > 0.0))
    fail(ErrorCode::InvalidArgument, "SVM needs C > 0 and gamma > 0");

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == Label::LosNec ? 1.0 : -1.0;

  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = y[i] * y[j] * rbf(rows[i], rows[j], hypers.gamma);
      q[i * n + j] = v;
      q[j * n + i] = v;
    }
  const auto Q = [&](std::size_t i, std::size_t j) { return q[i * n + j]; };

  const double c = hypers.c;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  const auto at_upper = [&](std::size_t t) { return alpha[t] >= c; };
  const auto at_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const int max_iter = std::max<int>(10'000'000, static_cast<int>(100 * n));
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i_sel = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i_sel < 0) break;
    const auto i = static_cast<std::size_t>(i_sel);

    double gmax2 = -std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (at_lower(t)) continue;
        const double grad_diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (grad_diff > 0) {
          double quad = Q(i, i) + Q(t, t) - 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (at_upper(t)) continue;
        const double grad_diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (grad_diff > 0) {
          double quad = Q(i, i) + Q(t, t) + 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    if (gmax + gmax2 < tolerance || j_sel < 0) break;
    const auto j = static_cast<std::size_t>(j_sel);

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += Q(i, t) * dai + Q(j, t) * daj;
  }

  // bias: mean over free vectors, else the midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (at_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }

  SvmSolution sol;
  sol.gamma = hypers.gamma;
  sol.bias = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  sol.iterations = iter;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      sol.support_vectors.push_back(rows[t]);
      sol.coefficients.push_back(alpha[t] * y[t]);
    }
  }
  return sol;
}

double PlattSigmoid::operator()(double f) const {
  const double z = a * f + b;
  // numerically stable 1 / (1 + exp(z))
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

PlattSigmoid fit_platt(std::span<const double> dec, std::span<const Label> labels) {
  const std::size_t n = dec.size();
  if (n != labels.size() || n == 0) fail(ErrorCode::InvalidArgument, "Platt fit needs labelled values");
  double prior1 = 0, prior0 = 0;
  for (auto l : labels) (l == Label::LosNec ? prior1 : prior0) += 1.0;

  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == Label::LosNec ? hi_target : lo_target;

  const auto objective = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * A + B;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  double A = 0.0;
  double B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(A, B);
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * A + B;
      double p, q;
      if (z >= 0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= kMinStep) {
      const double nA = A + step * dA;
      const double nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < kMinStep) break;
  }
  return {A, B};
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  Standardizer s;
  if (rows.empty()) return s;
  const std::size_t p = rows.front().size();
  const double n = static_cast<double>(rows.size());
  s.mean.assign(p, 0.0);
  s.sd.assign(p, 1.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < p; ++k) s.mean[k] += r[k];
  for (auto& m : s.mean) m /= n;
  if (rows.size() < 2) return s;
  for (std::size_t k = 0; k < p; ++k) {
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
    const double sd = std::sqrt(ss / (n - 1.0));
    s.sd[k] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / sd[k];
  return z;
}

}  // namespace contesta
