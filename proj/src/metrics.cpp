#include "enspost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace enspost::metrics {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;

}  // namespace

double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) throw std::invalid_argument("crps_gaussian: sigma <= 0");
  double dp = y - mu;
  double u = dp / (kSqrt2 * sigma);
  return dp * std::erf(u) + sigma * kInvSqrtPi * (kSqrt2 * std::exp(-u * u) - 1.0);
}

double crps_gaussian_grad(double mu, double sigma, double y, double* d_mu,
                          double* d_sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("crps_gaussian_grad: sigma <= 0");
  double dp = y - mu;
  double u = dp / (kSqrt2 * sigma);
  double e = std::erf(u);
  if (d_mu) *d_mu = -e;
  if (d_sigma) *d_sigma = kInvSqrtPi * (kSqrt2 * std::exp(-u * u) - 1.0);
  return dp * e + sigma * kInvSqrtPi * (kSqrt2 * std::exp(-u * u) - 1.0);
}

namespace {

// Trapezoid over [a, b] of f with n equally spaced points. n >= 2.
double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n) {
  if (b <= a) return 0.0;
  double h = (b - a) / (n - 1);
  double acc = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n - 1; ++i) acc += f(a + i * h);
  return acc * h;
}

}  // namespace

double crps_numeric(const std::function<double(double)>& cdf, double y,
                    double lo, double hi, int n_points) {
  if (n_points < 2) throw std::invalid_argument("crps_numeric: n_points < 2");
  if (hi < lo) throw std::invalid_argument("crps_numeric: hi < lo");
  lo = std::min(lo, y);
  hi = std::max(hi, y);
  // Left of y the indicator is 0, right of y it is 1. Splitting at y keeps
  // the integrand smooth on each panel.
  auto left = [&](double x) {
    double f = cdf(x);
    return f * f;
  };
  auto right = [&](double x) {
    double f = cdf(x) - 1.0;
    return f * f;
  };
  return trapezoid(left, lo, y, n_points) + trapezoid(right, y, hi, n_points);
}

double crps_numeric_gaussian(double mu, double sigma, double y,
                             int points_per_side) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("crps_numeric_gaussian: sigma <= 0");
  double lo = std::min(mu - 10.0 * sigma, y - 2.0 * sigma);
  double hi = std::max(mu + 10.0 * sigma, y + 2.0 * sigma);
  auto cdf = [mu, sigma](double x) {
    return 0.5 * (1.0 + std::erf((x - mu) / (kSqrt2 * sigma)));
  };
  return crps_numeric(cdf, y, lo, hi, points_per_side);
}

double crps_empirical(std::vector<double> members, double y) {
  if (members.empty()) throw std::invalid_argument("crps_empirical: no members");
  std::sort(members.begin(), members.end());
  double m = static_cast<double>(members.size());
  std::vector<double> bp = members;
  bp.insert(std::lower_bound(bp.begin(), bp.end(), y), y);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
    double a = bp[k], b = bp[k + 1];
    if (b <= a) continue;
    // No member value lies strictly inside (a, b), so F is constant there.
    double f = static_cast<double>(std::upper_bound(members.begin(),
                                                    members.end(), a) -
                                   members.begin()) /
               m;
    double ind = (a >= y) ? 1.0 : 0.0;
    double d = f - ind;
    acc += d * d * (b - a);
  }
  return acc;
}

double crpss(double crps_pred, double crps_ref) {
  if (!(crps_ref > 0.0)) throw std::invalid_argument("crpss: reference <= 0");
  return 1.0 - crps_pred / crps_ref;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("rmse: size mismatch or empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

void write_score_csv(const std::filesystem::path& path,
                     const std::vector<ScoreRow>& rows) {
  std::ofstream os(path, std::ios::binary);  // binary: no platform newline drift
  if (!os)
    throw std::runtime_error("write_score_csv: cannot open " + path.string());
  os << "date_index,region,metric,value\n";
  char buf[64];
  for (const ScoreRow& r : rows) {
    bool quote = r.region.find(',') != std::string::npos;
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    os << r.date_index << ',';
    if (quote)
      os << '"' << r.region << '"';
    else
      os << r.region;
    os << ',' << r.metric << ',' << buf << '\n';
  }
  if (!os) throw std::runtime_error("write_score_csv: write failed");
}

std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("read_score_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "date_index,region,metric,value")
    throw std::runtime_error("read_score_csv: bad header in " + path.string());
  std::vector<ScoreRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // date_index is comma-free and so are metric and value, so split from
    // both ends; whatever remains in the middle is the region (possibly
    // quoted, possibly containing a comma).
    std::size_t first = line.find(',');
    std::size_t last = line.rfind(',');
    std::size_t second_last = line.rfind(',', last - 1);
    if (first == std::string::npos || second_last == std::string::npos ||
        second_last <= first)
      throw std::runtime_error("read_score_csv: bad row: " + line);
    ScoreRow r;
    r.date_index = std::stoi(line.substr(0, first));
    std::string region = line.substr(first + 1, second_last - first - 1);
    if (region.size() >= 2 && region.front() == '"' && region.back() == '"')
      region = region.substr(1, region.size() - 2);
    r.region = region;
    r.metric = line.substr(second_last + 1, last - second_last - 1);
    r.value = std::stod(line.substr(last + 1));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace enspost::metrics
