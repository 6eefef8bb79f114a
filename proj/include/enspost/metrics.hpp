#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

// Probabilistic verification scores. The Gaussian CRPS has a closed form;
// crps_numeric integrates (F(x) - 1{x >= y})^2 directly and exists to check
// the closed form, not to be fast.

namespace enspost::metrics {

// Closed-form CRPS of N(mu, sigma^2) against observation y. Throws for
// sigma <= 0.
double crps_gaussian(double mu, double sigma, double y);

// Analytic partials of crps_gaussian; returns the score value.
double crps_gaussian_grad(double mu, double sigma, double y, double* d_mu,
                          double* d_sigma);

// Trapezoidal integral of the CRPS functional for an arbitrary CDF. The
// integrand has a kink at y, so [lo, y] and [y, hi] are integrated
// separately with n_points each. Bounds are clamped to contain y.
double crps_numeric(const std::function<double(double)>& cdf, double y,
                    double lo, double hi, int n_points);

// crps_numeric specialised to a Gaussian, with bounds mu +- 10 sigma widened
// to cover y +- 2 sigma.
double crps_numeric_gaussian(double mu, double sigma, double y,
                             int points_per_side = 20001);

// Exact CRPS of the empirical (step) CDF of an ensemble. The integrand is
// piecewise constant between sorted member values and y, so the integral is
// a finite sum with no quadrature error. Throws for an empty ensemble.
double crps_empirical(std::vector<double> members, double y);

// Skill score 1 - crps_pred / crps_ref. Throws for crps_ref <= 0.
double crpss(double crps_pred, double crps_ref);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

// One scored (date, region, metric) cell of an evaluation run.
struct ScoreRow {
  int date_index = -1;  // -1 means aggregated over dates
  std::string region;   // "global" or "y0:y1,x0:x1"
  std::string metric;
  double value = 0.0;
};

void write_score_csv(const std::filesystem::path& path,
                     const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path);

}  // namespace enspost::metrics
