#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/simd/kernels.hpp"
#include "mfg/solver.hpp"

namespace mfg {
namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

// cell and fraction on an increasing node list, linear extrapolation outside
std::pair<std::size_t, double> locate(std::span<const double> nodes, double v) {
  const std::size_t n = nodes.size();
  if (n == 1) return {0, 0.0};
  auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
  std::size_t j = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
  j = std::min(j, n - 2);
  return {j, (v - nodes[j]) / (nodes[j + 1] - nodes[j])};
}

}  // namespace

DecouplingField::DecouplingField(std::size_t dim, double T, double dt, GridSpec grid,
                                 std::vector<EmpiricalMeasure> references, MeasureMapPtr w0)
    : dim_(dim), T_(T), dt_(dt), K_(step_count(T, dt)), grid_(std::move(grid)), refs_(std::move(references)),
      w0_(std::move(w0)) {
  if (dim_ == 0) throw ValidationError("field dimension must be positive");
  if (refs_.empty()) throw ValidationError("field needs at least one reference measure");
  for (const auto& r : refs_)
    if (r.dim() != dim_) throw DimensionError("reference measure dimension differs from the field");
  if (grid_.n == 0) throw ValidationError("spatial grid needs at least one node");
  if (grid_.n > 1 && !(grid_.hi > grid_.lo)) throw ValidationError("spatial grid needs hi > lo");
  if (grid_.shifts.empty()) throw ValidationError("shift grid needs at least one offset");
  for (std::size_t i = 1; i < grid_.shifts.size(); ++i)
    if (!(grid_.shifts[i] > grid_.shifts[i - 1])) throw ValidationError("shift offsets must be strictly increasing");
  if (!w0_) throw ValidationError("field needs the terminal map W0");
  n_shift_ = ipow(grid_.shifts.size(), dim_);
  n_nodes_ = ipow(grid_.n, dim_);
  for (const auto& r : refs_)
    for (std::size_t l = 0; l < n_shift_; ++l) node_measures_.push_back(pushforward_shift(r, shift_offset(l)));
  values_.assign(refs_.size() * (K_ + 1) * n_shift_ * n_nodes_ * dim_, 0.0);
  stderr_.assign(values_.size(), 0.0);
}

std::vector<double> DecouplingField::shift_offset(std::size_t l) const {
  std::vector<double> o(dim_);
  const std::size_t ns = grid_.shifts.size();
  for (std::size_t c = 0; c < dim_; ++c, l /= ns) o[c] = grid_.shifts[l % ns];
  return o;
}

std::vector<double> DecouplingField::node_point(std::size_t node) const {
  std::vector<double> x(dim_);
  const double step = grid_.n > 1 ? (grid_.hi - grid_.lo) / static_cast<double>(grid_.n - 1) : 0.0;
  for (std::size_t c = 0; c < dim_; ++c, node /= grid_.n) x[c] = grid_.lo + step * static_cast<double>(node % grid_.n);
  return x;
}

std::vector<double> DecouplingField::all_node_points() const {
  std::vector<double> out;
  out.reserve(n_nodes_ * dim_);
  for (std::size_t j = 0; j < n_nodes_; ++j) {
    const auto p = node_point(j);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t DecouplingField::nearest_reference(const EmpiricalMeasure& mu) const {
  std::size_t best = 0;
  double best_cost = 0.0, best_mean = 0.0;
  for (std::size_t r = 0; r < refs_.size(); ++r) {
    const double ds = mu.spread() - refs_[r].spread();
    const double cost = static_cast<double>(dim_) * ds * ds;
    double dm = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) {
      const double t = mu.mean()[c] - refs_[r].mean()[c];
      dm += t * t;
    }
    if (r == 0 || cost < best_cost || (cost == best_cost && dm < best_mean)) {
      best = r;
      best_cost = cost;
      best_mean = dm;
    }
  }
  return best;
}

void DecouplingField::combine(double t, const EmpiricalMeasure& mu, std::span<const double> table, bool absolute,
                              std::vector<double>& slice) const {
  const std::size_t width = n_nodes_ * dim_;
  slice.assign(width, 0.0);
  const std::size_t r = nearest_reference(mu);
  const std::size_t ns = grid_.shifts.size();

  // time weights
  std::size_t k0 = 0;
  double ft = 0.0;
  if (K_ > 0) {
    double tau = std::clamp(t, 0.0, T_) / dt_;
    const double rounded = std::round(tau);
    if (std::fabs(tau - rounded) < 1e-9) tau = rounded;
    k0 = std::min(static_cast<std::size_t>(std::floor(tau)), K_ - 1);
    ft = tau - static_cast<double>(k0);
  }

  // shift weights per coordinate
  std::vector<std::size_t> cell(dim_, 0);
  std::vector<double> frac(dim_, 0.0);
  for (std::size_t c = 0; c < dim_; ++c) {
    const auto [j, f] = locate(grid_.shifts, mu.mean()[c] - refs_[r].mean()[c]);
    cell[c] = j;
    frac[c] = f;
  }
  const std::size_t corners = ns > 1 ? (std::size_t{1} << dim_) : 1;
  const auto& kern = simd::active();
  for (int tc = 0; tc < 2; ++tc) {
    const double wt = tc == 0 ? 1.0 - ft : ft;
    if (wt == 0.0) continue;
    const std::size_t k = k0 + static_cast<std::size_t>(tc);
    for (std::size_t corner = 0; corner < corners; ++corner) {
      double w = wt;
      std::size_t l = 0, stride = 1;
      for (std::size_t c = 0; c < dim_; ++c, stride *= ns) {
        const bool up = ns > 1 && ((corner >> c) & 1u);
        w *= ns > 1 ? (up ? frac[c] : 1.0 - frac[c]) : 1.0;
        l += (cell[c] + (up ? 1 : 0)) * stride;
      }
      if (w == 0.0) continue;
      kern.axpy(absolute ? std::fabs(w) : w, table.data() + index(r, k, l, 0, 0), slice.data(), width);
    }
  }
}

void DecouplingField::interpolate(std::span<const double> slice, std::span<const double> xs,
                                  std::span<double> out) const {
  const double step = grid_.n > 1 ? (grid_.hi - grid_.lo) / static_cast<double>(grid_.n - 1) : 1.0;
  if (dim_ == 1) {
    simd::active().interp_linear({grid_.lo, step, grid_.n}, slice.data(), xs.data(), out.data(), xs.size());
    return;
  }
  const std::size_t n = xs.size() / dim_;
  std::vector<std::size_t> cell(dim_);
  std::vector<double> frac(dim_);
  const std::size_t corners = grid_.n > 1 ? (std::size_t{1} << dim_) : 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim_; ++c) {
      if (grid_.n == 1) {
        cell[c] = 0;
        frac[c] = 0.0;
        continue;
      }
      const double s = (xs[i * dim_ + c] - grid_.lo) / step;
      const double cl = std::fmin(std::fmax(std::floor(s), 0.0), static_cast<double>(grid_.n - 2));
      cell[c] = static_cast<std::size_t>(cl);
      frac[c] = s - cl;
    }
    for (std::size_t comp = 0; comp < dim_; ++comp) out[i * dim_ + comp] = 0.0;
    for (std::size_t corner = 0; corner < corners; ++corner) {
      double w = 1.0;
      std::size_t node = 0, stride = 1;
      for (std::size_t c = 0; c < dim_; ++c, stride *= grid_.n) {
        const bool up = grid_.n > 1 && ((corner >> c) & 1u);
        if (grid_.n > 1) w *= up ? frac[c] : 1.0 - frac[c];
        node += (cell[c] + (up ? 1 : 0)) * stride;
      }
      for (std::size_t comp = 0; comp < dim_; ++comp) out[i * dim_ + comp] += w * slice[node * dim_ + comp];
    }
  }
}

void DecouplingField::evaluate(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                               std::span<double> out) const {
  if (mu.dim() != dim_) throw DimensionError("field evaluated on a measure of another dimension");
  if (t <= 0.0) {
    w0_->apply(xs, mu, out);
    return;
  }
  thread_local std::vector<double> slice;
  combine(t, mu, values_, false, slice);
  interpolate(slice, xs, out);
}

void DecouplingField::evaluate_stderr(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                                      std::span<double> out) const {
  if (t <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  thread_local std::vector<double> slice;
  combine(t, mu, stderr_, true, slice);
  interpolate(slice, xs, out);
  for (auto& v : out) v = std::fabs(v);
}

void DecouplingField::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["dim"] = dim_;
  m["T"] = T_;
  m["dt"] = dt_;
  m["steps"] = K_;
  m["grid"] = {{"lo", grid_.lo}, {"hi", grid_.hi}, {"n", grid_.n}, {"shifts", grid_.shifts}};
  m["iteration_count"] = iteration_count;
  m["final_increment"] = final_increment;
  m["converged"] = converged;
  m["tol"] = tol;
  m["tol_effective"] = tol_effective;
  m["tol_raised"] = tol_raised;
  m["max_stderr"] = max_stderr;
  m["config_hash"] = config_hash;
  auto refs = nlohmann::json::array();
  for (std::size_t r = 0; r < refs_.size(); ++r) {
    char ref_name[32], table_name[32];
    std::snprintf(ref_name, sizeof ref_name, "reference_%03zu.csv", r);
    std::snprintf(table_name, sizeof table_name, "table_%03zu.csv", r);
    io::write_measure_csv(dir / ref_name, refs_[r]);
    std::string csv = "k,shift,node,component,value,stderr\n";
    for (std::size_t k = 0; k <= K_; ++k)
      for (std::size_t l = 0; l < n_shift_; ++l)
        for (std::size_t j = 0; j < n_nodes_; ++j)
          for (std::size_t c = 0; c < dim_; ++c) {
            const std::size_t i = index(r, k, l, j, c);
            csv += std::to_string(k) + "," + std::to_string(l) + "," + std::to_string(j) + "," + std::to_string(c) +
                   "," + io::fmt(values_[i]) + "," + io::fmt(stderr_[i]) + "\n";
          }
    io::write_text(dir / table_name, csv);
    refs.push_back({{"measure", ref_name}, {"table", table_name}});
  }
  m["references"] = refs;
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
  io::write_text(dir / "history.csv", history_to_csv(*this));
}

DecouplingField DecouplingField::load(const std::filesystem::path& dir, MeasureMapPtr w0) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field manifest: ") + e.what());
  }
  try {
    GridSpec g;
    g.lo = m.at("grid").at("lo").get<double>();
    g.hi = m.at("grid").at("hi").get<double>();
    g.n = m.at("grid").at("n").get<std::size_t>();
    g.shifts = m.at("grid").at("shifts").get<std::vector<double>>();
    std::vector<EmpiricalMeasure> refs;
    for (const auto& r : m.at("references")) refs.push_back(io::read_measure_csv(dir / r.at("measure").get<std::string>()));
    DecouplingField f(m.at("dim").get<std::size_t>(), m.at("T").get<double>(), m.at("dt").get<double>(), g,
                      std::move(refs), std::move(w0));
    f.iteration_count = m.at("iteration_count").get<int>();
    f.final_increment = m.at("final_increment").get<double>();
    f.converged = m.at("converged").get<bool>();
    f.tol = m.at("tol").get<double>();
    f.tol_effective = m.at("tol_effective").get<double>();
    f.tol_raised = m.at("tol_raised").get<bool>();
    f.max_stderr = m.at("max_stderr").get<double>();
    f.config_hash = m.at("config_hash").get<std::string>();
    std::size_t r = 0;
    for (const auto& ref : m.at("references")) {
      const auto text = io::read_text(dir / ref.at("table").get<std::string>());
      std::size_t pos = text.find('\n') + 1;
      while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const auto line = std::string_view(text).substr(pos, end - pos);
        pos = end == std::string::npos ? text.size() : end + 1;
        if (line.empty()) continue;
        const auto fields = io::split_csv_line(line);
        if (fields.size() != 6) throw ValidationError("field table: malformed row");
        const auto k = std::stoul(fields[0]), l = std::stoul(fields[1]), j = std::stoul(fields[2]),
                   c = std::stoul(fields[3]);
        if (k > f.K_ || l >= f.n_shift_ || j >= f.n_nodes_ || c >= f.dim_) throw ValidationError("field table: index out of range");
        f.values_[f.index(r, k, l, j, c)] = io::parse_double(fields[4]);
        f.stderr_[f.index(r, k, l, j, c)] = io::parse_double(fields[5]);
      }
      ++r;
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field manifest: ") + e.what());
  }
}

std::string history_to_csv(const DecouplingField& field) {
  std::string out = "iteration,increment,lifted_increment,max_stderr\n";
  for (const auto& h : field.history)
    out += std::to_string(h.iteration) + "," + io::fmt(h.increment) + "," + io::fmt(h.lifted_increment) + "," +
           io::fmt(h.max_stderr) + "\n";
  return out;
}

}  // namespace mfg
