#include "partsyn/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "partsyn/error.hpp"

namespace partsyn::models {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
double log_logistic(double v) { return -softplus(-v); }      // log p
double log1m_logistic(double v) { return -softplus(v); }     // log (1 - p)

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

/// y * eta - exp(eta) - log Z(exp(eta)); the lgamma(y + 1) constant is left out.
double poisson_log_term(int y, double eta, int upper) {
  if (eta > 700.0) return kNegInf;
  const double rate = std::exp(eta);
  const double log_z = rate < 1e-300 ? 0.0 : log_trunc_poisson_normalizer(rate, upper);
  return static_cast<double>(y) * eta - rate - log_z;
}

double dot(std::span<const double> a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b(static_cast<Eigen::Index>(j));
  return s;
}

/// Draw from N(Q^-1 b, Q^-1) given the precision Q.
Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw ModelFitError("conditional precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(b);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(b.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return mean + llt.matrixU().solve(xi);
}

double gamma_log_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double half_t_log_density(double x, double df, double scale) {
  if (!(x > 0.0)) return kNegInf;
  const double z = x / scale;
  return std::log(2.0) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi) - std::log(scale) - 0.5 * (df + 1.0) * std::log1p(z * z / df);
}

}  // namespace

double epsilon_scale(double tau, const ZitpOptions& options) {
  return options.tau_is_sd ? tau : 1.0 / std::sqrt(tau);
}

namespace {

double zitp_log_posterior_impl(const ZitpParams& params, const data::RowMatrix& x, std::span<const int> y,
                               const ZitpOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<Eigen::Index>(x.cols());
  if (y.size() != n || static_cast<std::size_t>(params.eps.size()) != n || params.z.size() != n ||
      params.alpha.size() != p || params.beta.size() != p)
    throw std::invalid_argument("zitp_log_posterior: dimension mismatch");
  if (!(params.tau > 0.0)) return kNegInf;

  const double scale = epsilon_scale(params.tau, options);
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row(x.data() + i * static_cast<std::size_t>(p), static_cast<std::size_t>(p));
    const double psi = dot(row, params.beta);
    const double eps = params.eps(static_cast<Eigen::Index>(i));
    if (params.z[i]) {
      if (y[i] > 0) return kNegInf;
      lp += log_logistic(psi);
    } else {
      const double eta = dot(row, params.alpha) + eps;
      lp += log1m_logistic(psi) + poisson_log_term(y[i], eta, options.upper) -
            std::lgamma(static_cast<double>(y[i]) + 1.0);
    }
    lp += normal_log_density(eps, 0.0, scale);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    lp += normal_log_density(params.alpha(j), 0.0, options.coef_prior_sd);
    lp += normal_log_density(params.beta(j), 0.0, options.coef_prior_sd);
  }
  lp += gamma_log_density(params.tau, options.tau_shape, options.tau_rate);
  return lp;
}

}  // namespace

double zitp_log_posterior(const ZitpParams& params, const data::DesignMatrix& design, std::span<const int> y,
                          const ZitpOptions& options) {
  return zitp_log_posterior_impl(params, design.x, y, options);
}

// ---------------------------------------------------------------------------
// ZitpTarget

struct ZitpTarget::Shared {
  data::RowMatrix x;
  std::vector<int> y;
  ZitpOptions options;
  Eigen::MatrixXd xtx;
  std::vector<std::size_t> zero_rows;
  std::vector<std::string> column_names;
  double lgamma_sum = 0.0;
};

ZitpTarget::ZitpTarget(const data::DesignMatrix& design, std::vector<int> y, ZitpOptions options) {
  if (y.size() != design.rows()) throw std::invalid_argument("ZitpTarget: y and design differ in length");
  auto s = std::make_shared<Shared>();
  s->x = design.x;
  s->y = std::move(y);
  s->options = options;
  s->column_names = design.column_names;
  s->xtx = (s->x.transpose() * s->x).eval();
  p_ = design.cols();
  n_ = design.rows();
  for (std::size_t i = 0; i < n_; ++i) {
    if (s->y[i] < 0 || s->y[i] > options.upper) throw DataError("AvailableDays outside the model support");
    if (s->y[i] == 0) s->zero_rows.push_back(i);
    s->lgamma_sum += std::lgamma(static_cast<double>(s->y[i]) + 1.0);
  }
  shared_ = std::move(s);
  z_.assign(n_, 0);
  for (std::size_t i : shared_->zero_rows) z_[i] = 1;
}

std::unique_ptr<mcmc::Target> ZitpTarget::clone() const { return std::make_unique<ZitpTarget>(*this); }

std::vector<mcmc::ParameterInfo> ZitpTarget::parameters() const {
  std::vector<mcmc::ParameterInfo> info;
  info.reserve(2 * p_ + 1 + n_);
  for (const auto& c : shared_->column_names) info.push_back({"alpha[" + c + "]", mcmc::Support::real, true});
  for (const auto& c : shared_->column_names) info.push_back({"beta[" + c + "]", mcmc::Support::real, true});
  info.push_back({"tau", mcmc::Support::positive, true});
  for (std::size_t i = 0; i < n_; ++i) info.push_back({"eta[" + std::to_string(i) + "]", mcmc::Support::real, false});
  return info;
}

std::vector<double> ZitpTarget::initial_point() const {
  const auto& s = *shared_;
  const auto p = static_cast<Eigen::Index>(p_);
  // alpha: ridge least squares of log y on the positive records.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) * 1e-3;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (s.y[i] == 0) continue;
    const auto row = s.x.row(static_cast<Eigen::Index>(i)).transpose();
    a.noalias() += row * row.transpose();
    b.noalias() += row * std::log(static_cast<double>(s.y[i]));
    ++positives;
  }
  Eigen::VectorXd alpha = positives ? Eigen::VectorXd(a.ldlt().solve(b)) : Eigen::VectorXd::Zero(p);

  std::vector<double> x(2 * p_ + 1 + n_, 0.0);
  for (std::size_t j = 0; j < p_; ++j) x[j] = alpha(static_cast<Eigen::Index>(j));
  double ss = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double m = s.x.row(static_cast<Eigen::Index>(i)).dot(alpha);
    const double eta = s.y[i] > 0 ? std::log(static_cast<double>(s.y[i])) : m;
    x[2 * p_ + 1 + i] = eta;
    ss += (eta - m) * (eta - m);
  }
  const double sd = positives > 1 ? std::clamp(std::sqrt(ss / static_cast<double>(positives)), 0.05, 5.0) : 1.0;
  x[2 * p_] = s.options.tau_is_sd ? sd : 1.0 / (sd * sd);
  return x;
}

ZitpParams ZitpTarget::unpack(std::span<const double> x) const {
  ZitpParams params;
  const auto p = static_cast<Eigen::Index>(p_);
  params.alpha = Eigen::Map<const Eigen::VectorXd>(x.data(), p);
  params.beta = Eigen::Map<const Eigen::VectorXd>(x.data() + p_, p);
  params.tau = x[2 * p_];
  const Eigen::Map<const Eigen::VectorXd> eta(x.data() + 2 * p_ + 1, static_cast<Eigen::Index>(n_));
  params.eps = eta - shared_->x * params.alpha;
  params.z = z_;
  return params;
}

double ZitpTarget::log_density(std::span<const double> x) const {
  return zitp_log_posterior_impl(unpack(x), shared_->x, shared_->y, shared_->options);
}

void ZitpTarget::sync(std::span<const double> x) {
  const auto p = static_cast<Eigen::Index>(p_);
  const Eigen::Map<const Eigen::VectorXd> alpha(x.data(), p);
  const Eigen::Map<const Eigen::VectorXd> beta(x.data() + p_, p);
  mean_eta_ = shared_->x * alpha;
  psi_ = shared_->x * beta;
  lik_.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    lik_(static_cast<Eigen::Index>(i)) = poisson_log_term(shared_->y[i], x[2 * p_ + 1 + i], shared_->options.upper);
}

double ZitpTarget::delta_log_density(std::span<const double> x, std::size_t j, double value) const {
  const auto& s = *shared_;
  if (j > 2 * p_) {
    const std::size_t i = j - 2 * p_ - 1;
    const double scale = epsilon_scale(x[2 * p_], s.options);
    const double m = mean_eta_(static_cast<Eigen::Index>(i));
    const double cur = x[j];
    double delta = -((value - m) * (value - m) - (cur - m) * (cur - m)) / (2.0 * scale * scale);
    if (!z_[i]) delta += poisson_log_term(s.y[i], value, s.options.upper) - lik_(static_cast<Eigen::Index>(i));
    return delta;
  }
  if (j == 2 * p_) {
    // tau under the sd convention: Normal(0, tau) on every eps plus its prior.
    const double cur = x[j];
    double ss = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double e = x[2 * p_ + 1 + i] - mean_eta_(static_cast<Eigen::Index>(i));
      ss += e * e;
    }
    auto lp = [&](double tau) {
      const double sc = epsilon_scale(tau, s.options);
      return -static_cast<double>(n_) * std::log(sc) - ss / (2.0 * sc * sc) +
             gamma_log_density(tau, s.options.tau_shape, s.options.tau_rate);
    };
    return lp(value) - lp(cur);
  }
  return Target::delta_log_density(x, j, value);
}

void ZitpTarget::accept(std::span<double> x, std::size_t j, double value) {
  if (j > 2 * p_) {
    const std::size_t i = j - 2 * p_ - 1;
    lik_(static_cast<Eigen::Index>(i)) = poisson_log_term(shared_->y[i], value, shared_->options.upper);
  }
  x[j] = value;
}

void ZitpTarget::update_beta(std::span<double> x, Rng& rng) {
  const auto& s = *shared_;
  const auto p = static_cast<Eigen::Index>(p_);
  const double prior_prec = 1.0 / (s.options.coef_prior_sd * s.options.coef_prior_sd);

  auto log_target = [&](const Eigen::VectorXd& psi, const Eigen::VectorXd& beta) {
    double lp = -0.5 * prior_prec * beta.squaredNorm();
    for (std::size_t i = 0; i < n_; ++i) {
      const double v = psi(static_cast<Eigen::Index>(i));
      lp += z_[i] ? log_logistic(v) : log1m_logistic(v);
    }
    return lp;
  };

  // Newton ascent to the mode of beta | z; the log target is strictly concave.
  Eigen::VectorXd mode = beta_mode_.size() == p ? beta_mode_ : Eigen::VectorXd(Eigen::VectorXd::Zero(p));
  Eigen::VectorXd psi = s.x * mode;
  double current = log_target(psi, mode);
  Eigen::MatrixXd hessian(p, p);
  Eigen::VectorXd w(static_cast<Eigen::Index>(n_));
  Eigen::VectorXd resid(static_cast<Eigen::Index>(n_));
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < n_; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double prob = 1.0 / (1.0 + std::exp(-psi(k)));
      w(k) = prob * (1.0 - prob);
      resid(k) = (z_[i] ? 1.0 : 0.0) - prob;
    }
    const Eigen::VectorXd grad = s.x.transpose() * resid - prior_prec * mode;
    hessian.noalias() = s.x.transpose() * w.asDiagonal() * s.x;
    hessian.diagonal().array() += prior_prec;
    const Eigen::VectorXd step = hessian.llt().solve(grad);
    if (0.5 * grad.dot(step) < 1e-10) {
      converged = true;
      break;
    }
    bool improved = false;
    double t = 1.0;
    for (int half = 0; half < 30 && !improved; ++half, t *= 0.5) {
      const Eigen::VectorXd next = mode + t * step;
      const Eigen::VectorXd next_psi = s.x * next;
      const double value = log_target(next_psi, next);
      if (value >= current) {
        mode = next;
        psi = next_psi;
        current = value;
        improved = true;
      }
    }
    if (!improved) {
      converged = true;
      break;
    }
  }
  if (!converged) return;
  beta_mode_ = mode;

  // Independence proposal N(mode, H^-1) at the mode's curvature.
  Eigen::LLT<Eigen::MatrixXd> llt(hessian);
  if (llt.info() != Eigen::Success) return;
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(p);
  for (Eigen::Index j = 0; j < p; ++j) xi(j) = normal(rng);
  const Eigen::VectorXd proposal = mode + llt.matrixU().solve(xi);
  const Eigen::Map<const Eigen::VectorXd> beta(x.data() + p_, p);
  auto log_q = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd d = b - mode;
    return -0.5 * d.dot(hessian * d);
  };
  const Eigen::VectorXd proposal_psi = s.x * proposal;
  const double log_ratio = log_target(proposal_psi, proposal) - log_target(psi_, beta) + log_q(beta) - log_q(proposal);
  ++beta_proposed_;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (std::log(uniform(rng)) < log_ratio) {
    for (Eigen::Index j = 0; j < p; ++j) x[p_ + static_cast<std::size_t>(j)] = proposal(j);
    psi_ = proposal_psi;
    ++beta_accepted_;
  }
}

void ZitpTarget::gibbs_update(std::span<double> x, Rng& rng) {
  const auto& s = *shared_;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Structural-zero indicators for the observed zeros.
  for (std::size_t i : s.zero_rows) {
    const double psi = psi_(static_cast<Eigen::Index>(i));
    const double l1 = log_logistic(psi);
    const double l0 = log1m_logistic(psi) + lik_(static_cast<Eigen::Index>(i));
    const double prob = 1.0 / (1.0 + std::exp(l0 - l1));
    z_[i] = uniform(rng) < prob ? 1 : 0;
  }

  update_beta(x, rng);

  // alpha | eta, tau is Gaussian: eta_i = alpha . x_i + eps_i.
  const auto p = static_cast<Eigen::Index>(p_);
  const Eigen::Map<const Eigen::VectorXd> eta(x.data() + 2 * p_ + 1, static_cast<Eigen::Index>(n_));
  const double scale = epsilon_scale(x[2 * p_], s.options);
  const double prec = 1.0 / (scale * scale);
  const double prior_prec = 1.0 / (s.options.coef_prior_sd * s.options.coef_prior_sd);
  Eigen::MatrixXd q = prec * s.xtx;
  q.diagonal().array() += prior_prec;
  const Eigen::VectorXd b = prec * (s.x.transpose() * eta);
  const Eigen::VectorXd alpha = draw_gaussian(q, b, rng);
  for (Eigen::Index j = 0; j < p; ++j) x[static_cast<std::size_t>(j)] = alpha(j);
  mean_eta_ = s.x * alpha;

  // tau | eta, alpha is Gamma when tau is a precision.
  if (!s.options.tau_is_sd) {
    const double ss = (eta - mean_eta_).squaredNorm();
    const double shape = s.options.tau_shape + 0.5 * static_cast<double>(n_);
    const double rate = s.options.tau_rate + 0.5 * ss;
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    x[2 * p_] = std::max(gamma(rng), std::numeric_limits<double>::min());
  }
}

std::vector<std::size_t> ZitpTarget::random_walk_components() const {
  std::vector<std::size_t> rw;
  rw.reserve(1 + n_);
  if (shared_->options.tau_is_sd) rw.push_back(2 * p_);
  for (std::size_t i = 0; i < n_; ++i) rw.push_back(2 * p_ + 1 + i);
  return rw;
}

ZitpDraw zitp_draw_from(std::span<const double> tracked_values, std::size_t n_coef) {
  if (tracked_values.size() != 2 * n_coef + 1) throw std::invalid_argument("zitp_draw_from: wrong length");
  ZitpDraw d;
  const auto p = static_cast<Eigen::Index>(n_coef);
  d.alpha = Eigen::Map<const Eigen::VectorXd>(tracked_values.data(), p);
  d.beta = Eigen::Map<const Eigen::VectorXd>(tracked_values.data() + n_coef, p);
  d.tau = tracked_values[2 * n_coef];
  return d;
}

int draw_synthetic_days(const ZitpDraw& params, std::span<const double> design_row, Rng& rng,
                        const ZitpOptions& options) {
  std::normal_distribution<double> normal(0.0, epsilon_scale(params.tau, options));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double eps = normal(rng);
  const double eta = std::min(dot(design_row, params.alpha) + eps, 700.0);
  const double psi = dot(design_row, params.beta);
  const double p_zero = 1.0 / (1.0 + std::exp(-psi));
  if (uniform(rng) < p_zero) return 0;
  const double rate = std::max(std::exp(eta), 1e-300);
  return sample_trunc_poisson({rate, options.upper}, rng);
}

// ---------------------------------------------------------------------------
// Price model

double price_log_posterior(const PriceParams& params, const data::DesignMatrix& design, std::span<const int> days,
                           std::span<const double> price, const PriceOptions& options) {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  if (days.size() != n || price.size() != n || static_cast<std::size_t>(params.gamma.size()) != p + 1)
    throw std::invalid_argument("price_log_posterior: dimension mismatch");
  if (!(params.sigma > 0.0)) return kNegInf;
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(price[i] > 0.0)) throw DataError("price_log_posterior: non-positive price");
    const auto row = design.row(i);
    double mu = params.gamma(static_cast<Eigen::Index>(p)) * static_cast<double>(days[i]);
    for (std::size_t j = 0; j < p; ++j) mu += params.gamma(static_cast<Eigen::Index>(j)) * row[j];
    lp += normal_log_density(std::log(price[i]), mu, params.sigma);
  }
  for (Eigen::Index j = 0; j < params.gamma.size(); ++j)
    lp += normal_log_density(params.gamma(j), 0.0, options.coef_prior_sd);
  lp += half_t_log_density(params.sigma, options.sigma_prior_df, options.sigma_prior_scale);
  return lp;
}

struct PriceTarget::Shared {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xtl;
  double ltl = 0.0;
  double n = 0.0;
  Eigen::VectorXd ols;
  double ols_sigma = 1.0;
  PriceOptions options;
  std::vector<std::string> names;
};

PriceTarget::PriceTarget(const data::DesignMatrix& design, std::span<const int> days, std::span<const double> price,
                         PriceOptions options) {
  const std::size_t n = design.rows();
  if (days.size() != n || price.size() != n) throw std::invalid_argument("PriceTarget: length mismatch");
  q_ = design.cols() + 1;
  const auto q = static_cast<Eigen::Index>(q_);
  auto s = std::make_shared<Shared>();
  s->options = options;
  s->xtx = Eigen::MatrixXd::Zero(q, q);
  s->xtl = Eigen::VectorXd::Zero(q);
  s->n = static_cast<double>(n);
  Eigen::VectorXd row(q);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(price[i] > 0.0)) throw DataError("PriceTarget: non-positive price at row " + std::to_string(i));
    for (std::size_t j = 0; j + 1 < q_; ++j) row(static_cast<Eigen::Index>(j)) = design.row(i)[j];
    row(q - 1) = static_cast<double>(days[i]);
    const double l = std::log(price[i]);
    s->xtx.noalias() += row * row.transpose();
    s->xtl.noalias() += row * l;
    s->ltl += l * l;
  }
  for (const auto& c : design.column_names) s->names.push_back("gamma[" + c + "]");
  s->names.emplace_back("gamma[AvailableDays]");
  Eigen::MatrixXd reg = s->xtx;
  reg.diagonal().array() += 1e-6;
  s->ols = reg.ldlt().solve(s->xtl);
  const double r = std::max(0.0, s->ltl - 2.0 * s->ols.dot(s->xtl) + s->ols.dot(s->xtx * s->ols));
  s->ols_sigma = std::sqrt(std::max(r / std::max(1.0, s->n), 1e-6));
  shared_ = std::move(s);
}

std::unique_ptr<mcmc::Target> PriceTarget::clone() const { return std::make_unique<PriceTarget>(*this); }

std::vector<mcmc::ParameterInfo> PriceTarget::parameters() const {
  std::vector<mcmc::ParameterInfo> info;
  for (const auto& n : shared_->names) info.push_back({n, mcmc::Support::real, true});
  info.push_back({"sigma", mcmc::Support::positive, true});
  return info;
}

std::vector<double> PriceTarget::initial_point() const {
  std::vector<double> x(shared_->ols.data(), shared_->ols.data() + q_);
  x.push_back(shared_->ols_sigma);
  return x;
}

double PriceTarget::rss(std::span<const double> gamma) const {
  const Eigen::Map<const Eigen::VectorXd> g(gamma.data(), static_cast<Eigen::Index>(q_));
  return std::max(0.0, shared_->ltl - 2.0 * g.dot(shared_->xtl) + g.dot(shared_->xtx * g));
}

double PriceTarget::log_density_given_rss(std::span<const double> gamma, double sigma, double r) const {
  if (!(sigma > 0.0)) return kNegInf;
  const auto& s = *shared_;
  double lp = -s.n * (kHalfLog2Pi + std::log(sigma)) - r / (2.0 * sigma * sigma);
  for (double g : gamma) lp += normal_log_density(g, 0.0, s.options.coef_prior_sd);
  return lp + half_t_log_density(sigma, s.options.sigma_prior_df, s.options.sigma_prior_scale);
}

double PriceTarget::log_density(std::span<const double> x) const {
  const auto gamma = x.first(q_);
  return log_density_given_rss(gamma, x[q_], rss(gamma));
}

double PriceTarget::delta_log_density(std::span<const double> x, std::size_t j, double value) const {
  if (j != q_) return Target::delta_log_density(x, j, value);
  const auto gamma = x.first(q_);
  const double r = rss(gamma);
  return log_density_given_rss(gamma, value, r) - log_density_given_rss(gamma, x[q_], r);
}

void PriceTarget::gibbs_update(std::span<double> x, Rng& rng) {
  const auto& s = *shared_;
  const double sigma = x[q_];
  const double prec = 1.0 / (sigma * sigma);
  Eigen::MatrixXd q = prec * s.xtx;
  q.diagonal().array() += 1.0 / (s.options.coef_prior_sd * s.options.coef_prior_sd);
  const Eigen::VectorXd gamma = draw_gaussian(q, prec * s.xtl, rng);
  for (std::size_t j = 0; j < q_; ++j) x[j] = gamma(static_cast<Eigen::Index>(j));
}

std::vector<std::size_t> PriceTarget::random_walk_components() const { return {q_}; }

PriceParams price_draw_from(std::span<const double> tracked_values, std::size_t n_coef) {
  if (tracked_values.size() != n_coef + 1) throw std::invalid_argument("price_draw_from: wrong length");
  PriceParams p;
  p.gamma = Eigen::Map<const Eigen::VectorXd>(tracked_values.data(), static_cast<Eigen::Index>(n_coef));
  p.sigma = tracked_values[n_coef];
  return p;
}

double draw_synthetic_logprice(const PriceParams& params, std::span<const double> design_row, int synthetic_days,
                               Rng& rng) {
  const auto p = static_cast<Eigen::Index>(design_row.size());
  if (params.gamma.size() != p + 1) throw std::invalid_argument("draw_synthetic_logprice: dimension mismatch");
  double mu = params.gamma(p) * static_cast<double>(synthetic_days);
  for (Eigen::Index j = 0; j < p; ++j) mu += params.gamma(j) * design_row[static_cast<std::size_t>(j)];
  std::normal_distribution<double> normal(mu, params.sigma);
  // Clamp so exp() stays finite and strictly positive.
  return std::exp(std::clamp(normal(rng), -700.0, 700.0));
}

// ---------------------------------------------------------------------------

std::vector<int> simulate_days(const data::DesignMatrix& design, const ZitpDraw& truth, Rng& rng,
                               const ZitpOptions& options) {
  std::vector<int> y(design.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = draw_synthetic_days(truth, design.row(i), rng, options);
  return y;
}

std::vector<double> simulate_prices(const data::DesignMatrix& design, std::span<const int> days,
                                    const PriceParams& truth, Rng& rng) {
  std::vector<double> out(design.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = draw_synthetic_logprice(truth, design.row(i), days[i], rng);
  return out;
}

void write_parameter_sets_csv(const std::vector<std::string>& names, const std::vector<mcmc::ParameterSet>& sets,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "set,chain,iteration,parameter,value\n";
  for (std::size_t k = 0; k < sets.size(); ++k)
    for (std::size_t j = 0; j < names.size(); ++j)
      out << k + 1 << ',' << sets[k].chain + 1 << ',' << sets[k].iteration << ",\"" << names[j] << "\","
          << sets[k].values[j] << '\n';
}

}  // namespace partsyn::models
