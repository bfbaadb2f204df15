#include "mfg/field.hpp"

#include <algorithm>

namespace mfg {

void Field::evaluate_stderr(double, std::span<const double>, const EmpiricalMeasure&, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

std::vector<double> Field::at(double t, std::span<const double> x, const EmpiricalMeasure& mu) const {
  std::vector<double> out(x.size());
  evaluate(t, x, mu, out);
  return out;
}

std::vector<double> Field::lifted(double t, const EmpiricalMeasure& mu) const {
  std::vector<double> out(mu.points().size());
  evaluate(t, mu.points(), mu, out);
  return out;
}

namespace {

class FnField final : public Field {
 public:
  FnField(std::size_t dim, FieldFn fn) : dim_(dim), fn_(std::move(fn)) {}
  std::size_t dim() const override { return dim_; }
  void evaluate(double t, std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    fn_(t, xs, mu, out);
  }

 private:
  std::size_t dim_;
  FieldFn fn_;
};

class SliceMap final : public MeasureMap {
 public:
  SliceMap(FieldPtr f, double t) : f_(std::move(f)), t_(t) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    f_->evaluate(t_, xs, mu, out);
  }

 private:
  FieldPtr f_;
  double t_;
};

class ScaledField final : public Field {
 public:
  ScaledField(FieldPtr f, double c) : f_(std::move(f)), c_(c) {}
  std::size_t dim() const override { return f_->dim(); }
  void evaluate(double t, std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    f_->evaluate(t, xs, mu, out);
    for (auto& v : out) v *= c_;
  }
  void evaluate_stderr(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                       std::span<double> out) const override {
    f_->evaluate_stderr(t, xs, mu, out);
    for (auto& v : out) v *= c_ < 0 ? -c_ : c_;
  }

 private:
  FieldPtr f_;
  double c_;
};

}  // namespace

FieldPtr make_field(std::size_t dim, FieldFn fn) { return std::make_shared<FnField>(dim, std::move(fn)); }

FieldPtr constant_in_time(std::size_t dim, MeasureMapPtr w0) {
  return make_field(dim, [w0](double, std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) {
    w0->apply(xs, mu, out);
  });
}

MeasureMapPtr time_slice(FieldPtr field, double t) { return std::make_shared<SliceMap>(std::move(field), t); }

FieldPtr scaled(FieldPtr field, double c) { return std::make_shared<ScaledField>(std::move(field), c); }

}  // namespace mfg
