#include "zosmd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zosmd {
namespace {

constexpr double kTruncCut = 4.0;

double trunc_sigma0() {
  static const double s = std::sqrt(truncated_normal_variance(kTruncCut));
  return s;
}

// E|x - T0| for T0 a standard normal truncated to [-cut, cut] (unscaled).
double abs_moment_raw(double x) {
  const double a = kTruncCut;
  if (std::abs(x) >= a) return std::abs(x);
  const double z = 2.0 * standard_normal_cdf(a) - 1.0;
  return (2.0 * standard_normal_pdf(x) - 2.0 * standard_normal_pdf(a) +
          x * (2.0 * standard_normal_cdf(x) - 1.0)) /
         z;
}

double abs_moment_raw_deriv(double x) {
  const double a = kTruncCut;
  if (x >= a) return 1.0;
  if (x <= -a) return -1.0;
  const double z = 2.0 * standard_normal_cdf(a) - 1.0;
  return (2.0 * standard_normal_cdf(x) - 1.0) / z;
}

// E|delta - s*xi| for the unit-variance truncated noise with scale s.
double abs_noise_moment(double delta, double s) {
  if (s <= 0.0) return std::abs(delta);
  const double se = s / trunc_sigma0();
  return se * abs_moment_raw(delta / se);
}

double abs_noise_moment_deriv(double delta, double s) {
  if (s <= 0.0) return delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
  const double se = s / trunc_sigma0();
  return abs_moment_raw_deriv(delta / se);
}

double sup_norm_over_domain(const WeightDomain& dom) {
  if (dom.kind() == DomainKind::Ball) return dom.radius();
  double s = 0.0;
  for (int k = 0; k < dom.dim(); ++k) {
    const double reach = std::max(std::abs(dom.lo()[k]), std::abs(dom.hi()[k]));
    s += reach * reach;
  }
  return std::sqrt(s);
}

double sup_dist_to_point(const WeightDomain& dom, const Vec& c) {
  if (dom.kind() == DomainKind::Ball) return dom.radius() + c.norm();
  double s = 0.0;
  for (int k = 0; k < dom.dim(); ++k) {
    const double reach = std::max(dom.hi()[k] - c[k], c[k] - dom.lo()[k]);
    s += reach * reach;
  }
  return std::sqrt(s);
}

void check_family_params(const WeightDomain& domain, const std::vector<Vec>& centers,
                         const std::vector<double>& noise_scales,
                         const std::vector<double>& offsets) {
  const std::size_t m = centers.size();
  if (m == 0) throw std::invalid_argument("synthetic family: need at least one distribution");
  if (noise_scales.size() != m || offsets.size() != m) {
    throw std::invalid_argument("synthetic family: centers/noise_scales/offsets size mismatch");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (centers[i].size() != domain.dim()) {
      throw std::invalid_argument("synthetic family: center dimension mismatch");
    }
    if (noise_scales[i] < 0.0) throw std::invalid_argument("synthetic family: noise scale < 0");
    if (offsets[i] < 0.0) {
      throw std::invalid_argument("synthetic family: offsets must be nonnegative (loss >= 0)");
    }
  }
}

Vec draw_shifted(const Vec& center, double s, double offset, RandomStream& stream) {
  const int d = static_cast<int>(center.size());
  Vec z(d + 1);
  for (int k = 0; k < d; ++k) {
    z[k] = center[k] + s * truncated_normal_unit_var(stream, kTruncCut);
  }
  z[d] = offset;
  return z;
}

double max_sample_norm(const std::vector<Vec>& centers, const std::vector<double>& scales) {
  const double cut_eff = kTruncCut / trunc_sigma0();
  double zsup = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d = static_cast<double>(centers[i].size());
    zsup = std::max(zsup, centers[i].norm() + scales[i] * cut_eff * std::sqrt(d));
  }
  return zsup;
}

}  // namespace

double oracle_margin(int d) { return std::sqrt(static_cast<double>(d) + 2.0); }

void Problem::check_index(int i) const {
  if (i < 0 || i >= m_) throw std::out_of_range("distribution index out of range");
}

double Problem::risk_exact(int, const Vec&) const {
  throw std::logic_error("risk_exact: unsupported on empirical distributions (use risk_estimate)");
}

double Problem::rstar_exact(int) const {
  throw std::logic_error("rstar_exact: unsupported on empirical distributions");
}

Vec Problem::risk_grad(int, const Vec&) const {
  throw std::logic_error("risk_grad: unsupported on this family");
}

Vec Problem::loss_grad(const Vec&, const Vec&) const {
  throw std::logic_error("loss_grad: unsupported on this family");
}

ShiftedQuadratic::ShiftedQuadratic(WeightDomain domain, std::vector<Vec> centers,
                                   std::vector<double> noise_scales, std::vector<double> offsets)
    : Problem(static_cast<int>(centers.size()), std::move(domain)),
      centers_(std::move(centers)),
      noise_scales_(std::move(noise_scales)),
      offsets_(std::move(offsets)) {
  check_family_params(domain_, centers_, noise_scales_, offsets_);
  const double d = static_cast<double>(dim_);
  const double wsup = sup_norm_over_domain(domain_) + oracle_margin(dim_);
  const double zsup = max_sample_norm(centers_, noise_scales_);
  const double bmax = *std::max_element(offsets_.begin(), offsets_.end());
  const double smax = *std::max_element(noise_scales_.begin(), noise_scales_.end());
  double g = 0.0;
  for (const Vec& c : centers_) g = std::max(g, sup_dist_to_point(domain_, c));
  constants_.L = 1.0;
  constants_.Lstar = wsup + zsup;
  constants_.G = g;
  constants_.sigma = smax * std::sqrt(d);
  constants_.C = 0.5 * (wsup + zsup) * (wsup + zsup) + bmax;
}

double ShiftedQuadratic::loss(const Vec& w, const Vec& z) const {
  return 0.5 * (w - z.head(dim_)).squaredNorm() + z[dim_];
}

Vec ShiftedQuadratic::draw(int i, RandomStream& stream) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  return draw_shifted(centers_[u], noise_scales_[u], offsets_[u], stream);
}

double ShiftedQuadratic::risk_exact(int i, const Vec& w) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  const double s = noise_scales_[u];
  return 0.5 * (w - centers_[u]).squaredNorm() + 0.5 * s * s * dim_ + offsets_[u];
}

double ShiftedQuadratic::rstar_exact(int i) const {
  check_index(i);
  return risk_exact(i, domain_.project(centers_[static_cast<std::size_t>(i)]));
}

Vec ShiftedQuadratic::risk_grad(int i, const Vec& w) const {
  check_index(i);
  return w - centers_[static_cast<std::size_t>(i)];
}

Vec ShiftedQuadratic::loss_grad(const Vec& w, const Vec& z) const {
  return w - z.head(dim_);
}

PiecewiseAbsolute::PiecewiseAbsolute(WeightDomain domain, std::vector<Vec> centers,
                                     std::vector<double> noise_scales, std::vector<double> offsets)
    : Problem(static_cast<int>(centers.size()), std::move(domain)),
      centers_(std::move(centers)),
      noise_scales_(std::move(noise_scales)),
      offsets_(std::move(offsets)) {
  check_family_params(domain_, centers_, noise_scales_, offsets_);
  const double sqrt_d = std::sqrt(static_cast<double>(dim_));
  const double wsup = sup_norm_over_domain(domain_) + oracle_margin(dim_);
  const double zsup = max_sample_norm(centers_, noise_scales_);
  const double bmax = *std::max_element(offsets_.begin(), offsets_.end());
  constants_.Lstar = sqrt_d;
  constants_.G = sqrt_d;
  constants_.sigma = sqrt_d;
  constants_.C = sqrt_d * (wsup + zsup) + bmax;
}

double PiecewiseAbsolute::loss(const Vec& w, const Vec& z) const {
  return (w - z.head(dim_)).cwiseAbs().sum() + z[dim_];
}

Vec PiecewiseAbsolute::draw(int i, RandomStream& stream) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  return draw_shifted(centers_[u], noise_scales_[u], offsets_[u], stream);
}

double PiecewiseAbsolute::risk_exact(int i, const Vec& w) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  double acc = offsets_[u];
  for (int k = 0; k < dim_; ++k) {
    acc += abs_noise_moment(w[k] - centers_[u][k], noise_scales_[u]);
  }
  return acc;
}

double PiecewiseAbsolute::rstar_exact(int i) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  // Per-coordinate median optimality. Box domains clamp coordinatewise; for
  // balls the separable argument needs the center inside the domain.
  if (domain_.kind() == DomainKind::Ball && !domain_.contains(centers_[u], 1e-12)) {
    throw std::logic_error("rstar_exact: piecewise-absolute on a ball needs centers inside W");
  }
  return risk_exact(i, domain_.project(centers_[u]));
}

Vec PiecewiseAbsolute::risk_grad(int i, const Vec& w) const {
  check_index(i);
  const auto u = static_cast<std::size_t>(i);
  Vec g(dim_);
  for (int k = 0; k < dim_; ++k) {
    g[k] = abs_noise_moment_deriv(w[k] - centers_[u][k], noise_scales_[u]);
  }
  return g;
}

Vec PiecewiseAbsolute::loss_grad(const Vec& w, const Vec& z) const {
  Vec g(dim_);
  for (int k = 0; k < dim_; ++k) {
    const double diff = w[k] - z[k];
    g[k] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  }
  return g;
}

EmpiricalProblem::EmpiricalProblem(WeightDomain domain, std::vector<std::vector<Vec>> tables,
                                   EmpiricalLoss loss)
    : Problem(static_cast<int>(tables.size()), std::move(domain)),
      tables_(std::move(tables)),
      loss_kind_(loss) {
  if (tables_.empty()) throw std::invalid_argument("empirical problem: need at least one table");
  double max_row_norm = 0.0;
  double sigma_sq = 0.0;
  double g = 0.0;
  for (auto& table : tables_) {
    if (table.empty()) throw std::invalid_argument("empirical problem: empty distribution");
    Vec mean = Vec::Zero(dim_);
    for (auto& row : table) {
      if (row.size() != dim_) {
        throw std::invalid_argument("empirical problem: row dimension mismatch");
      }
      max_row_norm = std::max(max_row_norm, row.norm());
      mean += row;
      // append the zero offset so rows share the synthetic sample layout
      Vec aug(dim_ + 1);
      aug.head(dim_) = row;
      aug[dim_] = 0.0;
      row = std::move(aug);
    }
    mean /= static_cast<double>(table.size());
    double var = 0.0;
    for (const auto& row : table) var += (row.head(dim_) - mean).squaredNorm();
    sigma_sq = std::max(sigma_sq, var / static_cast<double>(table.size()));
    g = std::max(g, sup_dist_to_point(domain_, mean));
  }
  const double sqrt_d = std::sqrt(static_cast<double>(dim_));
  const double wsup = sup_norm_over_domain(domain_) + oracle_margin(dim_);
  if (loss_kind_ == EmpiricalLoss::Quadratic) {
    constants_.L = 1.0;
    constants_.Lstar = wsup + max_row_norm;
    constants_.G = g;
    constants_.sigma = std::sqrt(sigma_sq);
    constants_.C = 0.5 * (wsup + max_row_norm) * (wsup + max_row_norm);
  } else {
    constants_.Lstar = sqrt_d;
    constants_.G = sqrt_d;
    constants_.sigma = sqrt_d;
    constants_.C = sqrt_d * (wsup + max_row_norm);
  }
}

double EmpiricalProblem::loss(const Vec& w, const Vec& z) const {
  if (loss_kind_ == EmpiricalLoss::Quadratic) {
    return 0.5 * (w - z.head(dim_)).squaredNorm() + z[dim_];
  }
  return (w - z.head(dim_)).cwiseAbs().sum() + z[dim_];
}

Vec EmpiricalProblem::draw(int i, RandomStream& stream) const {
  check_index(i);
  const auto& table = tables_[static_cast<std::size_t>(i)];
  const auto idx = static_cast<std::size_t>(stream.uniform() * static_cast<double>(table.size()));
  return table[std::min(idx, table.size() - 1)];
}

Vec EmpiricalProblem::loss_grad(const Vec& w, const Vec& z) const {
  if (loss_kind_ != EmpiricalLoss::Quadratic) {
    throw std::logic_error("loss_grad: unsupported for the absolute empirical loss");
  }
  return w - z.head(dim_);
}

std::vector<Vec> ingest_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
  std::vector<Vec> rows;
  std::string line;
  long line_no = 0;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        vals.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("ingest_csv: parse failure at " + path + ":" +
                                 std::to_string(line_no) + " in cell '" + cell + "'");
      }
    }
    if (vals.empty()) {
      throw std::runtime_error("ingest_csv: parse failure at " + path + ":" +
                               std::to_string(line_no) + " (no values)");
    }
    if (dim < 0) dim = static_cast<Eigen::Index>(vals.size());
    if (static_cast<Eigen::Index>(vals.size()) != dim) {
      throw std::runtime_error("ingest_csv: dimension inconsistency at " + path + ":" +
                               std::to_string(line_no));
    }
    rows.push_back(Eigen::Map<const Vec>(vals.data(), dim));
  }
  if (rows.empty()) throw std::runtime_error("ingest_csv: empty distribution in " + path);
  return rows;
}

double risk_estimate(const Problem& p, int i, const Vec& w, long n, RandomStream& stream) {
  if (n < 1) throw std::invalid_argument("risk_estimate: n must be >= 1");
  double acc = 0.0;
  for (long k = 0; k < n; ++k) acc += p.loss(w, p.draw(i, stream));
  return acc / static_cast<double>(n);
}

void validate_instance(const Problem& p, long n, RandomStream& stream, double margin) {
  const double C = p.constants().C.value_or(std::numeric_limits<double>::infinity());
  const WeightDomain& dom = p.domain();
  for (long k = 0; k < n; ++k) {
    Vec w(dom.dim());
    if (dom.kind() == DomainKind::Ball) {
      w = sample_ball(stream, dom.dim(), dom.radius());
    } else {
      for (int j = 0; j < dom.dim(); ++j) {
        w[j] = dom.lo()[j] + stream.uniform() * (dom.hi()[j] - dom.lo()[j]);
      }
    }
    if (margin > 0.0) w += sample_ball(stream, dom.dim(), margin);
    const int i = static_cast<int>(k % p.m());
    const double v = p.loss(w, p.draw(i, stream));
    if (!(v >= -1e-12) || !(v <= C + 1e-9)) {
      std::ostringstream msg;
      msg << "validate_instance: loss " << v << " outside [0, " << C << "] for distribution " << i;
      throw std::runtime_error(msg.str());
    }
  }
}

}  // namespace zosmd
