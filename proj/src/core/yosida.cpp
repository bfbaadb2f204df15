#include "mfg/yosida.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/parallel.hpp"

namespace mfg {
namespace {

class ShiftedMap final : public MeasureMap {
 public:
  ShiftedMap(MeasureMapPtr base, double c) : base_(std::move(base)), c_(c) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    base_->apply(xs, mu, out);
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] += c_ * xs[i];
  }

 private:
  MeasureMapPtr base_;
  double c_;
};

double eval1(const MeasureMap& f, double y, const EmpiricalMeasure& law) {
  double out = 0.0;
  f.apply({&y, 1}, law, {&out, 1});
  return out;
}

// y + eps f(y) = x in one dimension; phi is increasing for monotone f.
double invert_scalar(const MeasureMap& f, double eps, double x, const EmpiricalMeasure& law, double tol, int max_iter) {
  auto phi = [&](double y) { return y + eps * eval1(f, y, law) - x; };
  double y = x;
  double fy = phi(y);
  if (fy == 0.0) return y;
  // bracket the root by stepping away from x
  double step = std::max(1.0, std::fabs(x)) * (fy > 0 ? -1.0 : 1.0);
  double lo = y, flo = fy, hi = y + step, fhi = phi(hi);
  int guard = 0;
  while ((flo > 0) == (fhi > 0)) {
    lo = hi;
    flo = fhi;
    step *= 2.0;
    hi = lo + step;
    fhi = phi(hi);
    if (++guard > 2000) throw ConvergenceError("resolvent: no sign change while bracketing", std::fabs(flo), guard);
  }
  if (lo > hi) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
  }
  y = std::fabs(flo) < std::fabs(fhi) ? lo : hi;
  fy = std::fabs(flo) < std::fabs(fhi) ? flo : fhi;
  for (int it = 0; it < max_iter; ++it) {
    if (std::fabs(fy) <= tol) return y;
    const double h = 1e-7 * (1.0 + std::fabs(y));
    const double deriv = (phi(y + h) - fy) / h;
    double next = deriv > 0.0 ? y - fy / deriv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double fn = phi(next);
    if ((fn > 0) == (flo > 0)) {
      lo = next;
      flo = fn;
    } else {
      hi = next;
      fhi = fn;
    }
    y = next;
    fy = fn;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(y))) return y;
  }
  if (std::fabs(fy) <= 10.0 * tol) return y;
  throw ConvergenceError("resolvent: scalar solve did not converge", std::fabs(fy), max_iter);
}

bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r * n + c]) > std::fabs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double m = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= m * a[c * n + k];
      b[r] -= m * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    for (std::size_t k = c + 1; k < n; ++k) b[c] -= a[c * n + k] * b[k];
    b[c] /= a[c * n + c];
  }
  return true;
}

// Newton with finite-difference Jacobian and backtracking on |phi|.
std::vector<double> invert_vector(const MeasureMap& f, double eps, std::span<const double> x,
                                  const EmpiricalMeasure& law, double tol, int max_iter) {
  const std::size_t d = x.size();
  std::vector<double> y(x.begin(), x.end()), fy(d), r(d), trial(d), ft(d), jac(d * d), pert(d), fp(d);
  auto residual = [&](const std::vector<double>& yy, std::vector<double>& out) {
    std::vector<double> fv(d);
    f.apply(yy, law, fv);
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      out[k] = yy[k] + eps * fv[k] - x[k];
      n2 += out[k] * out[k];
    }
    return std::sqrt(n2);
  };
  double rn = residual(y, r);
  for (int it = 0; it < max_iter && rn > tol; ++it) {
    for (std::size_t c = 0; c < d; ++c) {
      pert = y;
      const double h = 1e-7 * (1.0 + std::fabs(y[c]));
      pert[c] += h;
      residual(pert, fp);
      for (std::size_t k = 0; k < d; ++k) jac[k * d + c] = (fp[k] - r[k]) / h;
    }
    std::vector<double> step(r.begin(), r.end());
    auto jcopy = jac;
    if (!solve_linear(jcopy, step, d)) throw ConvergenceError("resolvent: singular Jacobian", rn, it);
    double t = 1.0;
    double tn = rn;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      for (std::size_t k = 0; k < d; ++k) trial[k] = y[k] - t * step[k];
      tn = residual(trial, ft);
      if (tn < rn) break;
    }
    if (!(tn < rn)) break;
    y = trial;
    r = ft;
    rn = tn;
  }
  if (rn > 10.0 * tol) throw ConvergenceError("resolvent: Newton solve did not converge", rn, max_iter);
  return y;
}

double max_residual(const MeasureMap& f, double eps, std::span<const double> xs, const EmpiricalMeasure& y) {
  const auto fy = f.lifted(y);
  double r = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) r = std::max(r, std::fabs(y.points()[i] + eps * fy[i] - xs[i]));
  return r;
}

EmpiricalMeasure with_points(const EmpiricalMeasure& like, std::vector<double> pts) {
  if (like.is_uniform()) return EmpiricalMeasure::uniform(like.dim(), std::move(pts));
  return EmpiricalMeasure(like.dim(), std::move(pts), {like.weights().begin(), like.weights().end()});
}

void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("epsilon must be positive");
}

}  // namespace

std::vector<double> invert_frozen(const MeasureMap& base, double eps, std::span<const double> xs,
                                  const EmpiricalMeasure& law, const ResolventOptions& opts) {
  check_eps(eps);
  const std::size_t d = law.dim();
  const std::size_t n = xs.size() / d;
  std::vector<double> y(xs.size());
  const double atom_tol = 0.1 * opts.tol;
  parallel_for(n, [&](std::size_t i) {
    if (d == 1) {
      y[i] = invert_scalar(base, eps, xs[i], law, atom_tol, opts.max_iter);
    } else {
      auto yi = invert_vector(base, eps, xs.subspan(i * d, d), law, atom_tol, opts.max_iter);
      std::copy(yi.begin(), yi.end(), y.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  });
  return y;
}

ResolventResult resolvent(const MeasureMap& base, double eps, const EmpiricalMeasure& x,
                          const ResolventOptions& opts) {
  check_eps(eps);
  const auto xs = x.points();
  if (opts.lipschitz_constant && eps * *opts.lipschitz_constant < 1.0) {
    // contraction with factor eps*C
    EmpiricalMeasure y = x;
    for (int it = 1; it <= opts.max_iter; ++it) {
      const auto fy = base.lifted(y);
      std::vector<double> next(xs.size());
      double inc = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        next[i] = xs[i] - eps * fy[i];
        inc = std::max(inc, std::fabs(next[i] - y.points()[i]));
      }
      y = with_points(x, std::move(next));
      if (inc <= 0.1 * opts.tol) {
        const double res = max_residual(base, eps, xs, y);
        if (res <= opts.tol) return {std::move(y), it, res};
      }
    }
    throw ConvergenceError("resolvent: fixed-point sweeps did not converge", max_residual(base, eps, xs, y),
                           opts.max_iter);
  }
  // alternate: freeze law -> solve atoms -> update law
  EmpiricalMeasure y = x;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    y = with_points(x, invert_frozen(base, eps, xs, y, opts));
    res = max_residual(base, eps, xs, y);
    if (res <= opts.tol) return {std::move(y), it, res};
  }
  throw ConvergenceError("resolvent: law iteration did not converge", res, opts.max_iter);
}

RegularizedCoefficient::RegularizedCoefficient(MeasureMapPtr base, double epsilon, ResolventOptions opts,
                                               double shift_constant, std::optional<double> declared_growth)
    : original_(base), eps_(epsilon), opts_(opts), shift_(shift_constant) {
  check_eps(epsilon);
  if (declared_growth && !(epsilon * *declared_growth < 1.0))
    throw ValidationError("epsilon " + io::fmt(epsilon) + " must be below 1/C_F = " + io::fmt(1.0 / *declared_growth));
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw ValidationError("resolvent tolerance and iteration cap must be positive");
  base_ = shift_ != 0.0 ? std::make_shared<ShiftedMap>(std::move(base), shift_) : std::move(base);
  if (shift_ != 0.0 && opts_.lipschitz_constant) *opts_.lipschitz_constant += std::fabs(shift_);
}

EmpiricalMeasure RegularizedCoefficient::law_map(const EmpiricalMeasure& mu) const {
  return resolvent(*base_, eps_, mu, opts_).cloud;
}

std::vector<double> RegularizedCoefficient::point_map(std::span<const double> xs, const EmpiricalMeasure& mu) const {
  return invert_frozen(*base_, eps_, xs, law_map(mu), opts_);
}

void RegularizedCoefficient::apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const {
  const auto law = law_map(mu);
  std::vector<double> g;
  if (xs.data() == mu.points().data() && xs.size() == mu.points().size())
    g.assign(law.points().begin(), law.points().end());  // atoms of mu map to the resolvent atoms
  else
    g = invert_frozen(*base_, eps_, xs, law, opts_);
  base_->apply(g, law, out);
  if (shift_ != 0.0)
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] -= shift_ * xs[i];
}

RegularizedCoefficient regularize(MeasureMapPtr base, double epsilon, ResolventOptions opts, double shift_constant,
                                  std::optional<double> declared_growth) {
  return RegularizedCoefficient(std::move(base), epsilon, opts, shift_constant, declared_growth);
}

double regularized_growth_bound(double growth_constant, double epsilon) {
  if (growth_constant * epsilon >= 1.0) return std::numeric_limits<double>::infinity();
  return (1.0 + growth_constant) / (1.0 - growth_constant * epsilon);
}

double growth_ratio(const MeasureMap& f, const SamplerSpec& sampler, std::size_t n_clouds, std::uint64_t seed) {
  std::vector<double> worst(n_clouds, 0.0);
  const std::size_t d = sampler.dim;
  parallel_for(n_clouds, [&](std::size_t c) {
    RngStream rng(CounterRng(pair_seed(seed, c), 2));
    const auto mu = sample_cloud(sampler, rng);
    const auto v = f.lifted(mu);
    const double root_e2 = std::sqrt(mu.second_moment());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      double nv = 0.0, nx = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        nv += v[i * d + k] * v[i * d + k];
        nx += mu.point(i)[k] * mu.point(i)[k];
      }
      worst[c] = std::max(worst[c], std::sqrt(nv) / (1.0 + std::sqrt(nx) + root_e2));
    }
  });
  return *std::max_element(worst.begin(), worst.end());
}

std::vector<SweepRow> convergence_sweep(MeasureMapPtr base, std::span<const double> epsilons, const SweepOptions& opts) {
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] < epsilons[i - 1])) throw ValidationError("sweep epsilons must be strictly decreasing");
  std::vector<EmpiricalMeasure> compact;
  for (std::size_t c = 0; c < opts.n_clouds; ++c) {
    RngStream rng(CounterRng(pair_seed(opts.seed, c), 2));
    compact.push_back(sample_cloud(opts.compact, rng));
  }
  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    const RegularizedCoefficient reg(base, eps, opts.resolvent, opts.shift_constant);
    SweepRow row;
    row.epsilon = eps;
    for (const auto& mu : compact) {
      const auto fe = reg.lifted(mu);
      const auto f = base->lifted(mu);
      for (std::size_t i = 0; i < f.size(); ++i) row.sup_error = std::max(row.sup_error, std::fabs(fe[i] - f[i]));
    }
    row.lipschitz_quotient = lifted_lipschitz_quotient(reg, opts.pairs, opts.n_pairs, opts.seed);
    row.growth_ratio = growth_ratio(reg, opts.compact, opts.n_clouds, opts.seed);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "epsilon,sup_error,lipschitz_quotient,growth_ratio\n";
  for (const auto& r : rows)
    out += io::fmt(r.epsilon) + "," + io::fmt(r.sup_error) + "," + io::fmt(r.lipschitz_quotient) + "," +
           io::fmt(r.growth_ratio) + "\n";
  return out;
}

}  // namespace mfg
