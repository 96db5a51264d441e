#pragma once

#include "zosmd/geometry.hpp"
#include "zosmd/sampling.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace zosmd {

// Known problem constants. Each is optional metadata: the theorem schedules
// consume L (smooth) or L* (non-smooth); C bounds the loss; G and sigma feed
// the estimator diagnostics only.
struct ProblemConstants {
  std::optional<double> C;
  std::optional<double> L;
  std::optional<double> Lstar;
  std::optional<double> G;
  std::optional<double> sigma;
};

// A MERO instance: m distributions over a common sample space, one loss
// oracle, and a weight domain. Samples are stored as d+1 vectors; the last
// entry is an additive per-distribution offset folded into the loss so that
// l(w; z) stays a function of (w, z) alone.
class Problem {
 public:
  virtual ~Problem() = default;

  int m() const { return m_; }
  int dim() const { return dim_; }
  const WeightDomain& domain() const { return domain_; }
  const ProblemConstants& constants() const { return constants_; }
  virtual std::string family() const = 0;

  virtual double loss(const Vec& w, const Vec& z) const = 0;
  virtual Vec draw(int i, RandomStream& stream) const = 0;

  // Closed-form risks; only synthetic families support them.
  virtual bool has_exact_risk() const { return false; }
  virtual double risk_exact(int i, const Vec& w) const;
  virtual double rstar_exact(int i) const;
  virtual Vec risk_grad(int i, const Vec& w) const;

  // Per-sample gradients for the first-order baseline.
  virtual bool has_loss_grad() const { return false; }
  virtual Vec loss_grad(const Vec& w, const Vec& z) const;

 protected:
  Problem(int m, WeightDomain domain)
      : m_(m), dim_(domain.dim()), domain_(std::move(domain)) {}
  void check_index(int i) const;

  int m_;
  int dim_;
  WeightDomain domain_;
  ProblemConstants constants_;
};

// l(w; z) = 0.5*||w - z_pt||^2 + z_offset, with z_pt ~ c_i + s_i * xi and xi
// coordinatewise truncated normal rescaled to unit variance. Closed forms:
// R_i(w) = 0.5*||w - c_i||^2 + 0.5*s_i^2*d + b_i, R_i* at the projection of
// c_i onto W.
class ShiftedQuadratic final : public Problem {
 public:
  ShiftedQuadratic(WeightDomain domain, std::vector<Vec> centers, std::vector<double> noise_scales,
                   std::vector<double> offsets);

  std::string family() const override { return "shifted-quadratic"; }
  double loss(const Vec& w, const Vec& z) const override;
  Vec draw(int i, RandomStream& stream) const override;
  bool has_exact_risk() const override { return true; }
  double risk_exact(int i, const Vec& w) const override;
  double rstar_exact(int i) const override;
  Vec risk_grad(int i, const Vec& w) const override;
  bool has_loss_grad() const override { return true; }
  Vec loss_grad(const Vec& w, const Vec& z) const override;

  const std::vector<Vec>& centers() const { return centers_; }
  const std::vector<double>& noise_scales() const { return noise_scales_; }
  const std::vector<double>& offsets() const { return offsets_; }

 private:
  std::vector<Vec> centers_;
  std::vector<double> noise_scales_;
  std::vector<double> offsets_;
};

// l(w; z) = ||w - z_pt||_1 + z_offset: Lipschitz and non-smooth. R_i and R_i*
// are coordinatewise closed forms for the symmetric truncated noise.
class PiecewiseAbsolute final : public Problem {
 public:
  PiecewiseAbsolute(WeightDomain domain, std::vector<Vec> centers, std::vector<double> noise_scales,
                    std::vector<double> offsets);

  std::string family() const override { return "piecewise-absolute"; }
  double loss(const Vec& w, const Vec& z) const override;
  Vec draw(int i, RandomStream& stream) const override;
  bool has_exact_risk() const override { return true; }
  double risk_exact(int i, const Vec& w) const override;
  double rstar_exact(int i) const override;
  Vec risk_grad(int i, const Vec& w) const override;
  bool has_loss_grad() const override { return true; }
  Vec loss_grad(const Vec& w, const Vec& z) const override;

  const std::vector<Vec>& centers() const { return centers_; }
  const std::vector<double>& noise_scales() const { return noise_scales_; }
  const std::vector<double>& offsets() const { return offsets_; }

 private:
  std::vector<Vec> centers_;
  std::vector<double> noise_scales_;
  std::vector<double> offsets_;
};

enum class EmpiricalLoss { Quadratic, Absolute };

// Finite sample tables, drawn with replacement. Constants are computed from
// the data (means, spreads); exact risks are unavailable by construction.
class EmpiricalProblem final : public Problem {
 public:
  EmpiricalProblem(WeightDomain domain, std::vector<std::vector<Vec>> tables, EmpiricalLoss loss);

  std::string family() const override { return "empirical-csv"; }
  double loss(const Vec& w, const Vec& z) const override;
  Vec draw(int i, RandomStream& stream) const override;
  bool has_loss_grad() const override { return loss_kind_ == EmpiricalLoss::Quadratic; }
  Vec loss_grad(const Vec& w, const Vec& z) const override;

  std::size_t table_size(int i) const { return tables_[static_cast<std::size_t>(i)].size(); }

 private:
  std::vector<std::vector<Vec>> tables_;
  EmpiricalLoss loss_kind_;
};

// Comma-separated numeric rows, optional header, UTF-8. Throws
// std::runtime_error with the offending line number on parse failure; an
// empty table is an "empty distribution" error.
std::vector<Vec> ingest_csv(const std::string& path, bool has_header);

// Monte-Carlo risk estimate (for empirical distributions).
double risk_estimate(const Problem& p, int i, const Vec& w, long n, RandomStream& stream);

// Samples n (w, z) pairs with w drawn from the enlarged domain W (+) margin
// and checks 0 <= l(w; z) <= C. Throws on violation.
void validate_instance(const Problem& p, long n, RandomStream& stream, double margin);

// Margin of the enlarged oracle domain used when computing C.
double oracle_margin(int d);

}  // namespace zosmd
