#include "nsfp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nsfp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ParseCtx {
  std::string origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << origin << ":" << line << ": " << msg;
    throw ConfigError(os.str());
  }

  double num(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) fail("trailing characters in number '" + v + "'");
      return d;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("cannot parse number '" + v + "'");
    }
  }

  int integer(const std::string& v) const {
    const double d = num(v);
    if (d != std::floor(d)) fail("expected an integer, got '" + v + "'");
    return static_cast<int>(d);
  }

  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("expected a boolean, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& v) const {
    std::vector<double> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(num(item));
    }
    return out;
  }
};

using Setter = std::function<void(RunConfig&, const std::string&, const ParseCtx&)>;
using Section = std::map<std::string, Setter>;

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = [] {
    std::map<std::string, Section> m;

    m["grid"] = {
        {"dim", [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.dim = p.integer(v);
           c.stepping.dim = c.dim;
         }},
        {"cells", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.cells = p.integer(v); }},
        {"half_width",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.half_width = p.num(v); }},
    };

    m["domain"] = {
        {"shape",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           if (v == "circle")
             c.shape.kind = ShapeKind::Circle;
           else if (v == "ellipse")
             c.shape.kind = ShapeKind::Ellipse;
           else if (v == "halfspace")
             c.shape.kind = ShapeKind::HalfSpace;
           else if (v == "box")
             c.shape.kind = ShapeKind::Box;
           else
             p.fail("unknown shape '" + v + "'");
         }},
        {"center_x", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.center.x = p.num(v); }},
        {"center_y", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.center.y = p.num(v); }},
        {"center_z", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.center.z = p.num(v); }},
        {"radius", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.r = p.num(v); }},
        {"rx", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.rx = p.num(v); }},
        {"ry", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.ry = p.num(v); }},
        {"rz", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.shape.rz = p.num(v); }},
        {"velocity",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           if (v == "static")
             c.velocity.kind = VelocityKind::Static;
           else if (v == "rigid_rotation")
             c.velocity.kind = VelocityKind::RigidRotation;
           else if (v == "pulsation")
             c.velocity.kind = VelocityKind::Pulsation;
           else if (v == "tabulated")
             c.velocity.kind = VelocityKind::UserTabulated;
           else
             p.fail("unknown velocity field '" + v + "'");
         }},
        {"rotation_rate",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.velocity.rate = p.num(v); }},
        {"pulsation_amplitude",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.velocity.amplitude = p.num(v); }},
        {"pulsation_frequency",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.velocity.frequency = p.num(v); }},
        {"support_radius",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.velocity.support_radius = p.num(v); }},
        {"cutoff_width",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.velocity.cutoff_width = p.num(v); }},
        {"velocity_table",
         [](RunConfig& c, const std::string& v, const ParseCtx&) { c.velocity.table_path = v; }},
        {"volume_floor",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.volume_floor = p.num(v); }},
        {"tube_width_cells",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.tube_width_cells = p.num(v); }},
    };

    m["initial"] = {
        {"profile",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           if (v == "uniform")
             c.initial.kind = ProfileKind::Uniform;
           else if (v == "gaussian_blob")
             c.initial.kind = ProfileKind::GaussianBlob;
           else if (v == "hydrostatic_1d")
             c.initial.kind = ProfileKind::Hydrostatic1D;
           else
             p.fail("unknown initial profile '" + v + "'");
         }},
        {"rho0", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.rho0 = p.num(v); }},
        {"theta0", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.theta0 = p.num(v); }},
        {"sigma", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.sigma = p.num(v); }},
        {"peak", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.peak = p.num(v); }},
        {"pedestal", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.pedestal = p.num(v); }},
        {"center_x", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.center.x = p.num(v); }},
        {"center_y", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.center.y = p.num(v); }},
        {"center_z", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.center.z = p.num(v); }},
        {"accel", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.initial.accel = p.num(v); }},
    };

    m["boundary"] = {
        {"theta_base",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.boundary.base = p.num(v); }},
        {"theta_angular_amplitude",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.boundary.angular_amplitude = p.num(v);
         }},
        {"theta_angular_mode",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.boundary.angular_mode = p.integer(v);
         }},
    };

    m["eos"] = {
        {"a", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.eos.a = p.num(v); }},
        {"p_inf", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.eos.p_inf = p.num(v); }},
        {"z_lo", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.eos.z_lo = p.num(v); }},
        {"z_hi", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.eos.z_hi = p.num(v); }},
    };

    m["transport"] = {
        {"mu_lo", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.mu_lo = p.num(v); }},
        {"mu_hi", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.mu_hi = p.num(v); }},
        {"eta_lo", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.eta_lo = p.num(v); }},
        {"eta_hi", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.eta_hi = p.num(v); }},
        {"kappa_lo", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.kappa_lo = p.num(v); }},
        {"kappa_hi", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.transport.kappa_hi = p.num(v); }},
        {"alpha",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.transport.alpha = p.num(v);
           c.penalty.alpha = c.transport.alpha;
         }},
    };

    m["penalty"] = {
        {"eps", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.eps = p.num(v); }},
        {"delta", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.delta = p.num(v); }},
        {"beta",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.penalty.beta = p.num(v);
           if (c.penalty.beta < 4.0)
             p.fail("artificial-pressure exponent must satisfy beta >= 4");
         }},
        {"h", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.h = p.num(v); }},
        {"use_schedule",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.penalty_use_schedule = p.boolean(v);
         }},
        {"lambda", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.lambda = p.num(v); }},
        {"omega", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.omega = p.num(v); }},
        {"nu", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.nu = p.num(v); }},
        {"xi", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.penalty.xi = p.num(v); }},
    };

    m["gravity"] = {
        {"g", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.gravity.g = p.num(v); }},
        {"tolerance",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.gravity.tolerance = p.num(v); }},
        {"max_iterations",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.gravity.max_iterations = p.integer(v);
         }},
    };

    m["stepping"] = {
        {"t_end", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.t_end = p.num(v); }},
        {"cfl_conv", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.cfl_conv = p.num(v); }},
        {"cfl_visc", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.cfl_visc = p.num(v); }},
        {"cfl_cond", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.cfl_cond = p.num(v); }},
        {"dt_max", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.dt_max = p.num(v); }},
        {"rho_floor", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.rho_floor = p.num(v); }},
        {"theta_floor",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.theta_floor = p.num(v); }},
        {"rho_vacuum_cut",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.rho_vacuum_cut = p.num(v); }},
        {"rho_visc_implicit",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.rho_visc_implicit = p.num(v);
         }},
        {"dirichlet_band_cells",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.dirichlet_band_cells = p.num(v);
         }},
        {"mask_width_cells",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.mask_width_cells = p.num(v);
         }},
        {"band_half_width_cells",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.band_half_width_cells = p.num(v);
         }},
        {"geometry_rebuild_fraction",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.geometry_rebuild_fraction = p.num(v);
         }},
        {"dt_geom", [](RunConfig& c, const std::string& v, const ParseCtx& p) { c.stepping.dt_geom = p.num(v); }},
        {"extension_sweeps",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.extension_sweeps = p.integer(v);
         }},
        {"vacuum_sweeps",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.vacuum_sweeps = p.integer(v);
         }},
        {"max_dt_retries",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.stepping.max_dt_retries = p.integer(v);
         }},
    };

    m["output"] = {
        {"directory",
         [](RunConfig& c, const std::string& v, const ParseCtx&) { c.output.directory = v; }},
        {"diagnostics_cadence",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.output.diagnostics_cadence = p.integer(v);
         }},
        {"snapshot_interval",
         [](RunConfig& c, const std::string& v, const ParseCtx& p) {
           c.output.snapshot_interval = p.num(v);
         }},
    };

    auto sweep_section = [](SweepSection RunConfig::* field) {
      Section s;
      s["values"] = [field](RunConfig& c, const std::string& v, const ParseCtx& p) {
        (c.*field).values = p.numbers(v);
      };
      s["slope_min"] = [field](RunConfig& c, const std::string& v, const ParseCtx& p) {
        (c.*field).slope_min = p.num(v);
      };
      s["r2_min"] = [field](RunConfig& c, const std::string& v, const ParseCtx& p) {
        (c.*field).r2_min = p.num(v);
      };
      return s;
    };
    m["sweep_eps"] = sweep_section(&RunConfig::sweep_eps);
    m["sweep_h"] = sweep_section(&RunConfig::sweep_h);
    m["sweep_delta"] = sweep_section(&RunConfig::sweep_delta);

    return m;
  }();
  return s;
}

const std::vector<std::string>& required_sections() {
  static const std::vector<std::string> req = {"grid",      "domain",  "initial",
                                               "boundary",  "eos",     "transport",
                                               "penalty",   "gravity", "stepping",
                                               "output"};
  return req;
}

}  // namespace

void RunConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("grid: dim must be 2 or 3");
  if (cells < 8) throw ConfigError("grid: need at least 8 cells per side");
  if (half_width <= 0.0) throw ConfigError("grid: half_width must be positive");
  if (velocity.support_radius >= half_width)
    throw ConfigError("domain: velocity support_radius must be < the box half-width");
  if (velocity.kind == VelocityKind::UserTabulated && velocity.table_path.empty())
    throw ConfigError("domain: tabulated velocity needs velocity_table");
  if (volume_floor <= 0.0) throw ConfigError("domain: volume_floor must be positive");
  if (t_end <= 0.0) throw ConfigError("stepping: t_end must be positive");
  if (output.diagnostics_cadence < 1)
    throw ConfigError("output: diagnostics_cadence must be >= 1");
  if (initial.theta0 <= 0.0) throw ConfigError("initial: theta0 must be positive");
  if (initial.rho0 < 0.0 || initial.peak < 0.0 || initial.pedestal < 0.0)
    throw ConfigError("initial: densities must be nonnegative");
  eos.validate();
  transport.validate();
  penalty.validate();
  gravity.validate();
  stepping.validate();
  boundary.validate();
  for (const SweepSection* s : {&sweep_eps, &sweep_h, &sweep_delta}) {
    if (s->values.size() < 3)
      throw ConfigError("sweep: need at least 3 parameter values");
    for (std::size_t i = 0; i + 1 < s->values.size(); ++i)
      if (!(s->values[i] > s->values[i + 1]))
        throw ConfigError("sweep: values must be strictly decreasing");
    if (s->values.back() <= 0.0) throw ConfigError("sweep: values must be positive");
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  ParseCtx ctx;
  ctx.origin = origin;

  const auto& sch = schema();
  const Section* current = nullptr;
  std::string current_name;
  std::vector<std::string> seen;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++ctx.line;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("malformed section header");
      current_name = trim(line.substr(1, line.size() - 2));
      auto it = sch.find(current_name);
      if (it == sch.end()) ctx.fail("unknown section [" + current_name + "]");
      current = &it->second;
      seen.push_back(current_name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) ctx.fail("expected key = value");
    if (!current) ctx.fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = current->find(key);
    if (it == current->end())
      ctx.fail("unknown key '" + key + "' in section [" + current_name + "]");
    it->second(cfg, value, ctx);
  }

  std::vector<std::string> missing;
  for (const auto& req : required_sections())
    if (std::find(seen.begin(), seen.end(), req) == seen.end()) missing.push_back(req);
  if (!missing.empty()) {
    std::ostringstream os;
    os << origin << ": missing required sections:";
    for (const auto& s : missing) os << " [" << s << "]";
    throw ConfigError(os.str());
  }

  if (cfg.penalty_use_schedule) apply_scaling_schedule(cfg.penalty, cfg.penalty.h);
  if (cfg.velocity.kind == VelocityKind::UserTabulated && !cfg.velocity.table_path.empty()) {
    VelocityFieldSpec loaded = load_tabulated_velocity(cfg.velocity.table_path);
    loaded.support_radius = cfg.velocity.support_radius;
    loaded.cutoff_width = cfg.velocity.cutoff_width;
    cfg.velocity = loaded;
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), path);
}

std::string default_config_text() {
  return R"(# Penalized Navier-Stokes-Fourier-Poisson solver: reference configuration.
# The defaults describe the rotating-ellipse scenario on a 64^2 grid.

[grid]
dim = 2                  # spatial dimension, 2 or 3
cells = 64               # cells per side
half_width = 2           # box is [-half_width, half_width]^dim

[domain]
shape = ellipse          # fluid region Omega_0: circle | ellipse | halfspace | box
center_x = 0
center_y = 0
center_z = 0
radius = 1               # circle radius
rx = 1                   # ellipse semi-axes
ry = 0.7
rz = 0.7
velocity = rigid_rotation  # static | rigid_rotation | pulsation | tabulated
rotation_rate = 0.5
pulsation_amplitude = 0
pulsation_frequency = 1
support_radius = 1.6     # V = 0 for |x| >= support_radius
cutoff_width = 0.4       # smooth cutoff band ending at support_radius
velocity_table =         # path for velocity = tabulated
volume_floor = 0.5       # abort when |Omega_t| drops below this (M0)
tube_width_cells = 3     # div V audit tube around the interface

[initial]
profile = gaussian_blob  # uniform | gaussian_blob | hydrostatic_1d
rho0 = 1                 # uniform density / hydrostatic center value
theta0 = 1
sigma = 0.35             # gaussian e-folding radius
peak = 1
pedestal = 0.05
center_x = 0
center_y = 0
center_z = 0
accel = 1                # hydrostatic_1d: potential is -accel x^2/2

[boundary]
theta_base = 1           # theta_B on the interface
theta_angular_amplitude = 0
theta_angular_mode = 1

[eos]
a = 1                    # radiation constant
p_inf = 1                # degenerate pressure coefficient
z_lo = 0.1               # structural thresholds, 0 < z_lo < z_hi
z_hi = 10

[transport]
mu_lo = 0.05             # shear viscosity envelope
mu_hi = 0.1
eta_lo = 0.025           # bulk viscosity envelope
eta_hi = 0.05
kappa_lo = 0.1           # conductivity envelope
kappa_hi = 0.2
alpha = 6.5              # conductivity exponent, > 6

[penalty]
eps = 1e-3               # interface penalty strength
delta = 1e-3             # artificial pressure weight
beta = 4                 # artificial pressure exponent, >= 4
h = 0.35                 # master scale
use_schedule = true      # lambda = h, nu = omega = h^3, xi = h^6
lambda = 0.35            # individual floors, used when use_schedule = false
omega = 0.042875
nu = 0.042875
xi = 1.838265625e-3

[gravity]
g = 0.05
tolerance = 1e-10        # relative CG residual
max_iterations = 20000

[stepping]
t_end = 0.5
cfl_conv = 0.4
cfl_visc = 0.08
cfl_cond = 0.2
dt_max = 5e-3
rho_floor = 1e-12
theta_floor = 1e-12
rho_vacuum_cut = 1e-8    # below this a cell is treated as matter-free
rho_visc_implicit = 0.04 # below this the viscous update is pointwise implicit
dirichlet_band_cells = 1
mask_width_cells = 3     # f_omega cosine ramp width
band_half_width_cells = 1.5
geometry_rebuild_fraction = 0.2
dt_geom = 2e-3           # flow-map RK4 step
extension_sweeps = 60
vacuum_sweeps = 200      # Gauss-Seidel sweep cap of the vacuum conduction solve
max_dt_retries = 10

[output]
directory = out
diagnostics_cadence = 1
snapshot_interval = 0.1

[sweep_eps]
values = 1e-1, 1e-2, 1e-3, 1e-4
slope_min = 0.8
r2_min = 0

[sweep_h]
values = 0.5, 0.35, 0.25, 0.18
slope_min = 0
r2_min = 0.9

[sweep_delta]
values = 1e-1, 1e-2, 1e-3, 1e-4
slope_min = 0.9
r2_min = 0
)";
}

}  // namespace nsfp
