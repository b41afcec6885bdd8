#include "vkh/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vkh/error.hpp"

namespace vkh {

namespace {

int phase_of(double x, double period, double fraction) {
  const double t = x / period - std::floor(x / period);
  return t < fraction ? 0 : 1;
}

Phase blend(const Phase& a, const Phase& b, double t) {
  return {a.lambda + t * (b.lambda - a.lambda), a.mu + t * (b.mu - a.mu)};
}

// Halton radical inverse, used for deterministic well-spread samples.
double radical_inverse(int i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

Phase parse_phase(const nlohmann::json& j, std::size_t idx) {
  auto pick = [&](const char* key) {
    const auto& v = j.at(key);
    if (v.is_array()) return v.at(idx).get<double>();
    return v.get<double>();
  };
  return {pick("lambda"), pick("mu")};
}

}  // namespace

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::ConstantIsotropic: return "constant-isotropic";
    case FieldKind::InPlaneLaminate: return "in-plane-laminate";
    case FieldKind::Checkerboard: return "checkerboard";
    case FieldKind::SmoothModulated: return "smooth-modulated";
    case FieldKind::X3Graded: return "x3-graded";
    case FieldKind::Table: return "table";
  }
  return "?";
}

FieldKind field_kind_from_string(const std::string& s) {
  for (auto k : {FieldKind::ConstantIsotropic, FieldKind::InPlaneLaminate, FieldKind::Checkerboard,
                 FieldKind::SmoothModulated, FieldKind::X3Graded, FieldKind::Table})
    if (s == to_string(k)) return k;
  throw ConfigError("microstructure.kind", "unknown microstructure kind '" + s + "'");
}

double ScaleRule::period(double h, double fixed_period) const {
  switch (type) {
    case Type::Fixed: return fixed_period;
    case Type::Linear: return factor * h;
    case Type::Power: return factor * std::pow(h, p);
  }
  return fixed_period;
}

MicrostructureField MicrostructureField::constant_isotropic(double lambda, double mu) {
  isotropic_form(lambda, mu);  // validates
  MicrostructureField f;
  f.kind_ = FieldKind::ConstantIsotropic;
  f.phases_ = {{lambda, mu}};
  f.derive_bounds();
  return f;
}

MicrostructureField MicrostructureField::laminate(Phase a, Phase b, double period, int axis,
                                                  double fraction) {
  if (!(period > 0.0)) throw PreconditionError("laminate: period must be positive");
  if (axis != 0 && axis != 1) throw PreconditionError("laminate: axis must be 0 or 1");
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("laminate: fraction must be in (0,1)");
  isotropic_form(a.lambda, a.mu);
  isotropic_form(b.lambda, b.mu);
  MicrostructureField f;
  f.kind_ = FieldKind::InPlaneLaminate;
  f.phases_ = {a, b};
  f.period_ = period;
  f.axis_ = axis;
  f.fraction_ = fraction;
  f.derive_bounds();
  return f;
}

MicrostructureField MicrostructureField::checkerboard(Phase a, Phase b, double period) {
  if (!(period > 0.0)) throw PreconditionError("checkerboard: period must be positive");
  isotropic_form(a.lambda, a.mu);
  isotropic_form(b.lambda, b.mu);
  MicrostructureField f;
  f.kind_ = FieldKind::Checkerboard;
  f.phases_ = {a, b};
  f.period_ = period;
  f.derive_bounds();
  return f;
}

MicrostructureField MicrostructureField::smooth_modulated(Phase base, double amplitude, double period) {
  if (!(period > 0.0)) throw PreconditionError("smooth-modulated: period must be positive");
  if (!(amplitude >= 0.0 && amplitude < 1.0))
    throw PreconditionError("smooth-modulated: amplitude must be in [0,1)");
  isotropic_form(base.lambda, base.mu);
  MicrostructureField f;
  f.kind_ = FieldKind::SmoothModulated;
  f.phases_ = {base};
  f.amplitude_ = amplitude;
  f.period_ = period;
  f.derive_bounds();
  return f;
}

MicrostructureField MicrostructureField::x3_graded(Phase a, Phase b, bool symmetric) {
  isotropic_form(a.lambda, a.mu);
  isotropic_form(b.lambda, b.mu);
  MicrostructureField f;
  f.kind_ = FieldKind::X3Graded;
  f.phases_ = {a, b};
  f.symmetric_ = symmetric;
  f.derive_bounds();
  return f;
}

MicrostructureField MicrostructureField::table(int nx, int ny, std::vector<ElasticForm> cells) {
  if (nx < 1 || ny < 1 || static_cast<std::size_t>(nx) * ny != cells.size())
    throw PreconditionError("table: cell count does not match nx*ny");
  MicrostructureField f;
  f.kind_ = FieldKind::Table;
  f.table_nx_ = nx;
  f.table_ny_ = ny;
  f.table_ = std::move(cells);
  f.derive_bounds();
  if (!(f.alpha_ > 0.0)) throw PreconditionError("table: cell form is not positive definite");
  return f;
}

MicrostructureField& MicrostructureField::with_scale_rule(ScaleRule rule) {
  scale_ = rule;
  return *this;
}

MicrostructureField& MicrostructureField::with_omega(Rect omega) {
  if (!(omega.width() > 0.0 && omega.height() > 0.0)) throw PreconditionError("omega must have positive area");
  omega_ = omega;
  return *this;
}

MicrostructureField& MicrostructureField::with_bounds(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha <= beta)) throw PreconditionError("bounds must satisfy 0 < alpha <= beta");
  alpha_ = alpha;
  beta_ = beta;
  bounds_declared_ = true;
  return *this;
}

bool MicrostructureField::h_independent() const {
  switch (kind_) {
    case FieldKind::ConstantIsotropic:
    case FieldKind::X3Graded:
    case FieldKind::Table: return true;
    default: return scale_.type == ScaleRule::Type::Fixed;
  }
}

void MicrostructureField::derive_bounds() {
  double lo = 1e300, hi = 0.0;
  auto add = [&](const Phase& p) {
    lo = std::min(lo, 2.0 * p.mu);
    hi = std::max(hi, 2.0 * p.mu + 3.0 * p.lambda);
  };
  switch (kind_) {
    case FieldKind::SmoothModulated: {
      const Phase& p = phases_[0];
      lo = 2.0 * p.mu * (1.0 - amplitude_);
      hi = (2.0 * p.mu + 3.0 * p.lambda) * (1.0 + amplitude_);
      break;
    }
    case FieldKind::Table:
      for (const auto& c : table_) {
        auto [a, b] = c.spectral_bounds();
        lo = std::min(lo, a);
        hi = std::max(hi, b);
      }
      break;
    default:
      // Blends of two isotropic phases are monotone in the Lame parameters.
      for (const auto& p : phases_) add(p);
  }
  alpha_ = lo;
  beta_ = hi;
}

ElasticForm MicrostructureField::form_unchecked(double h, const Point3& x) const {
  switch (kind_) {
    case FieldKind::ConstantIsotropic: return isotropic_form(phases_[0].lambda, phases_[0].mu);
    case FieldKind::InPlaneLaminate: {
      const double coord = axis_ == 0 ? x.x1 : x.x2;
      const Phase& p = phases_[phase_of(coord, period(h), fraction_)];
      return isotropic_form(p.lambda, p.mu);
    }
    case FieldKind::Checkerboard: {
      const double eps = period(h);
      const long k = static_cast<long>(std::floor(x.x1 / eps)) + static_cast<long>(std::floor(x.x2 / eps));
      const Phase& p = phases_[((k % 2) + 2) % 2];
      return isotropic_form(p.lambda, p.mu);
    }
    case FieldKind::SmoothModulated: {
      const double eps = period(h);
      const double s = 1.0 + amplitude_ * std::sin(2.0 * std::numbers::pi * x.x1 / eps) *
                                 std::sin(2.0 * std::numbers::pi * x.x2 / eps);
      return isotropic_form(phases_[0].lambda * s, phases_[0].mu * s);
    }
    case FieldKind::X3Graded: {
      const double t = symmetric_ ? 2.0 * std::abs(x.x3) : x.x3 + 0.5;
      const Phase p = blend(phases_[0], phases_[1], std::clamp(t, 0.0, 1.0));
      return isotropic_form(p.lambda, p.mu);
    }
    case FieldKind::Table: {
      int ix = static_cast<int>(std::floor((x.x1 - omega_.x0) / omega_.width() * table_nx_));
      int iy = static_cast<int>(std::floor((x.x2 - omega_.y0) / omega_.height() * table_ny_));
      ix = std::clamp(ix, 0, table_nx_ - 1);
      iy = std::clamp(iy, 0, table_ny_ - 1);
      return table_[static_cast<std::size_t>(ix) * table_ny_ + iy];
    }
  }
  return {};
}

ElasticForm MicrostructureField::form_at(double h, const Point3& x) const {
  if (!(h > 0.0)) throw PreconditionError("form_at: h must be positive");
  constexpr double tol = 1e-12;
  if (!omega_.contains({x.x1, x.x2}, tol) || x.x3 < -0.5 - tol || x.x3 > 0.5 + tol)
    throw PreconditionError("form_at: point outside Omega");
  return form_unchecked(h, x);
}

std::vector<ElasticForm> read_form_table_csv(const std::filesystem::path& file, int nx, int ny) {
  std::ifstream in(file);
  if (!in) throw ConfigError("table.file", "cannot open " + file.string());
  std::vector<ElasticForm> cells(static_cast<std::size_t>(nx) * ny);
  std::vector<bool> seen(cells.size(), false);
  std::string line;
  std::getline(in, line);  // header
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() != 23)
      throw ConfigError("table.file", "line " + std::to_string(lineno) + ": expected 23 columns");
    const int ix = static_cast<int>(vals[0]), iy = static_cast<int>(vals[1]);
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny)
      throw ConfigError("table.file", "line " + std::to_string(lineno) + ": cell index out of range");
    Mat6 c;
    int k = 2;
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) c(i, j) = c(j, i) = vals[k++];
    const std::size_t idx = static_cast<std::size_t>(ix) * ny + iy;
    cells[idx] = ElasticForm(c);
    seen[idx] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ConfigError("table.file", "table does not cover every cell");
  return cells;
}

MicrostructureField MicrostructureField::from_json(const nlohmann::json& j,
                                                   const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("microstructure", "expected an object");
  if (!j.contains("kind")) throw ConfigError("microstructure.kind", "missing");
  const FieldKind kind = field_kind_from_string(j.at("kind").get<std::string>());
  const double period = j.value("period", 1.0);
  MicrostructureField f;
  try {
    switch (kind) {
      case FieldKind::ConstantIsotropic: f = constant_isotropic(j.at("lambda"), j.at("mu")); break;
      case FieldKind::InPlaneLaminate:
        f = laminate(parse_phase(j, 0), parse_phase(j, 1), period, j.value("axis", 0), j.value("fraction", 0.5));
        break;
      case FieldKind::Checkerboard: f = checkerboard(parse_phase(j, 0), parse_phase(j, 1), period); break;
      case FieldKind::SmoothModulated: f = smooth_modulated(parse_phase(j, 0), j.value("amplitude", 0.5), period); break;
      case FieldKind::X3Graded:
        f = x3_graded(parse_phase(j, 0), parse_phase(j, 1), j.value("profile", std::string("linear")) == "symmetric");
        break;
      case FieldKind::Table: {
        const auto& t = j.at("table");
        const int nx = t.at("nx"), ny = t.at("ny");
        std::filesystem::path file = t.at("file").get<std::string>();
        if (file.is_relative()) file = base_dir / file;
        f = table(nx, ny, read_form_table_csv(file, nx, ny));
        f.table_file_ = t.at("file").get<std::string>();
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("microstructure", e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError("microstructure", e.what());
  }
  if (j.contains("omega")) {
    const auto& o = j.at("omega");
    f.with_omega({o.at(0), o.at(1), o.at(2), o.at(3)});
  }
  if (j.contains("scale_rule")) {
    const auto& s = j.at("scale_rule");
    ScaleRule rule;
    const std::string type = s.is_string() ? s.get<std::string>() : s.at("type").get<std::string>();
    if (type == "fixed") rule.type = ScaleRule::Type::Fixed;
    else if (type == "linear") rule.type = ScaleRule::Type::Linear;
    else if (type == "power") rule.type = ScaleRule::Type::Power;
    else throw ConfigError("microstructure.scale_rule", "unknown type '" + type + "'");
    if (s.is_object()) {
      rule.factor = s.value("factor", 1.0);
      rule.p = s.value("p", 1.0);
    }
    f.with_scale_rule(rule);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    try {
      f.with_bounds(b.at(0), b.at(1));
    } catch (const PreconditionError& e) {
      throw ConfigError("microstructure.bounds", e.what());
    }
  }
  return f;
}

nlohmann::json MicrostructureField::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  if (kind_ != FieldKind::Table) {
    if (phases_.size() == 1) {
      j["lambda"] = phases_[0].lambda;
      j["mu"] = phases_[0].mu;
    } else {
      j["lambda"] = {phases_[0].lambda, phases_[1].lambda};
      j["mu"] = {phases_[0].mu, phases_[1].mu};
    }
  } else {
    j["table"] = {{"file", table_file_}, {"nx", table_nx_}, {"ny", table_ny_}};
  }
  j["period"] = period_;
  if (kind_ == FieldKind::InPlaneLaminate) {
    j["axis"] = axis_;
    j["fraction"] = fraction_;
  }
  if (kind_ == FieldKind::SmoothModulated) j["amplitude"] = amplitude_;
  if (kind_ == FieldKind::X3Graded) j["profile"] = symmetric_ ? "symmetric" : "linear";
  const char* type = scale_.type == ScaleRule::Type::Fixed ? "fixed"
                     : scale_.type == ScaleRule::Type::Linear ? "linear"
                                                              : "power";
  j["scale_rule"] = {{"type", type}, {"factor", scale_.factor}, {"p", scale_.p}};
  j["bounds"] = {alpha_, beta_};
  j["omega"] = {omega_.x0, omega_.y0, omega_.x1, omega_.y1};
  return j;
}

BoundsReport verify_bounds(const MicrostructureField& field, double h, int samples) {
  if (samples < 1) throw PreconditionError("verify_bounds: samples must be >= 1");
  BoundsReport rep;
  rep.alpha = field.alpha();
  rep.beta = field.beta();
  rep.samples = samples;
  rep.min_eig = 1e300;
  rep.max_eig = -1e300;
  const Rect& om = field.omega();
  for (int i = 0; i < samples; ++i) {
    const Point3 x{om.x0 + om.width() * radical_inverse(i + 1, 2),
                   om.y0 + om.height() * radical_inverse(i + 1, 3), -0.5 + radical_inverse(i + 1, 5)};
    auto [lo, hi] = field.form_at(h, x).spectral_bounds();
    rep.min_eig = std::min(rep.min_eig, lo);
    rep.max_eig = std::max(rep.max_eig, hi);
  }
  const double slack = 1e-10 * rep.beta;
  rep.pass = rep.min_eig >= rep.alpha - slack && rep.max_eig <= rep.beta + slack;
  return rep;
}

}  // namespace vkh
