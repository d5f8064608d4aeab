#pragma once

// JSON descriptions of vehicles, actuators, ramp plans and scenarios.
//
// A "vehicle", "actuator" or "table" entry is either an inline object, a
// path (relative to the file that mentions it), or a bare preset name looked
// up under <preset dir>/vehicles or <preset dir>/actuators. Objects may carry
// "base": <reference> and override single keys of it.

#include "identification.hpp"
#include "sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#ifndef MRAV_PRESET_DIR
#define MRAV_PRESET_DIR "presets"
#endif

namespace mrav::config {

using nlohmann::json;
namespace fs = std::filesystem;

/// MRAV_PRESET_DIR from the environment, else the source tree's presets/.
inline fs::path preset_dir()
{
  if (const char * env = std::getenv("MRAV_PRESET_DIR"); env != nullptr && *env != '\0') { return env; }
  return MRAV_PRESET_DIR;
}

/// Parsed text plus its origin, for messages.
struct Document
{
  json root;
  std::string text;
  fs::path path;  // empty for inline text

  std::string where() const { return path.empty() ? std::string("<inline>") : path.string(); }
  fs::path base_dir() const { return path.empty() ? fs::current_path() : path.parent_path(); }

  /// Line of the first "key" in the text, 0 when absent.
  int line_of(const std::string & key) const
  {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) { return 0; }
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }
};

using DocPtr = std::shared_ptr<const Document>;

inline DocPtr parse_text(const std::string & text, const fs::path & origin = {})
{
  auto d = std::make_shared<Document>();
  d->text = text;
  d->path = origin;
  try {
    d->root = json::parse(text);
  } catch (const json::parse_error & e) {
    // e.byte counts from 1 and points at the offending character
    const std::size_t at = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (const auto p = msg.find("syntax error"); p != std::string::npos) { msg = msg.substr(p); }
    throw ConfigError(d->where() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  if (!d->root.is_object()) { throw ConfigError(d->where() + ": top level must be an object"); }
  return d;
}

inline DocPtr load_file(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open " + path.string()); }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

/// Typed view of one JSON object; every message carries file, line and key path.
class Node
{
public:
  Node(DocPtr doc, const json & j, std::string path) : doc_(std::move(doc)), j_(&j), path_(std::move(path)) {}
  explicit Node(const DocPtr & doc) : Node(doc, doc->root, "") {}

  const json & raw() const { return *j_; }
  const Document & doc() const { return *doc_; }
  const DocPtr & doc_ptr() const { return doc_; }
  const std::string & path() const { return path_; }
  bool has(const std::string & key) const { return j_->contains(key) && !j_->at(key).is_null(); }

  std::string key_path(const std::string & key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string & key, const std::string & what) const
  {
    const int line = doc_->line_of(key);
    throw ConfigError(doc_->where() + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + key_path(key) + ": " + what);
  }

  /// Rejects keys outside @p allowed, so typos do not pass silently.
  void only(std::initializer_list<const char *> allowed) const
  {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto & item : j_->items()) {
      if (!ok.count(item.key())) { fail(item.key(), "unknown key"); }
    }
  }

  Node child(const std::string & key) const
  {
    if (!has(key) || !j_->at(key).is_object()) { fail(key, "expected an object"); }
    return Node(doc_, j_->at(key), key_path(key));
  }

  std::size_t array_size(const std::string & key) const
  {
    if (!has(key) || !j_->at(key).is_array()) { fail(key, "expected an array"); }
    return j_->at(key).size();
  }

  Node element(const std::string & key, std::size_t i) const
  {
    const json & e = j_->at(key).at(i);
    if (!e.is_object()) { fail(key, "entry " + std::to_string(i) + " must be an object"); }
    return Node(doc_, e, key_path(key) + "[" + std::to_string(i) + "]");
  }

  double num(const std::string & key) const
  {
    if (!has(key)) { fail(key, "missing"); }
    if (!j_->at(key).is_number()) { fail(key, "expected a number"); }
    return j_->at(key).get<double>();
  }
  double num(const std::string & key, double fallback) const { return has(key) ? num(key) : fallback; }

  double positive(const std::string & key) const
  {
    const double v = num(key);
    if (!(v > 0.0)) { fail(key, "must be positive"); }
    return v;
  }
  double positive(const std::string & key, double fallback) const
  {
    const double v = num(key, fallback);
    if (!(v > 0.0)) { fail(key, "must be positive"); }
    return v;
  }

  int integer(const std::string & key, int fallback) const
  {
    if (!has(key)) { return fallback; }
    if (!j_->at(key).is_number_integer()) { fail(key, "expected an integer"); }
    return j_->at(key).get<int>();
  }

  bool flag(const std::string & key, bool fallback) const
  {
    if (!has(key)) { return fallback; }
    if (!j_->at(key).is_boolean()) { fail(key, "expected true or false"); }
    return j_->at(key).get<bool>();
  }

  std::string str(const std::string & key, const std::string & fallback) const
  {
    if (!has(key)) { return fallback; }
    if (!j_->at(key).is_string()) { fail(key, "expected a string"); }
    return j_->at(key).get<std::string>();
  }

  std::vector<double> list(const std::string & key, int size = -1) const
  {
    if (!has(key)) { fail(key, "missing"); }
    const json & a = j_->at(key);
    if (!a.is_array()) { fail(key, "expected an array"); }
    if (size >= 0 && static_cast<int>(a.size()) != size) { fail(key, "expected " + std::to_string(size) + " values"); }
    std::vector<double> out;
    for (const auto & v : a) {
      if (!v.is_number()) { fail(key, "expected numbers"); }
      out.push_back(v.get<double>());
    }
    return out;
  }

  Vec3 vec3(const std::string & key) const
  {
    const auto v = list(key, 3);
    return Vec3(v[0], v[1], v[2]);
  }
  Vec3 vec3(const std::string & key, const Vec3 & fallback) const { return has(key) ? vec3(key) : fallback; }

  /// Three values, or one broadcast to all axes.
  Vec3 vec3_or_scalar(const std::string & key, const Vec3 & fallback) const
  {
    if (!has(key)) { return fallback; }
    if (j_->at(key).is_number()) { return Vec3::Constant(j_->at(key).get<double>()); }
    return vec3(key);
  }

  Vec3 nonneg3(const std::string & key, const Vec3 & fallback) const
  {
    const Vec3 v = vec3_or_scalar(key, fallback);
    if ((v.array() < 0.0).any()) { fail(key, "must be nonnegative"); }
    return v;
  }

private:
  DocPtr doc_;
  const json * j_;
  std::string path_;
};

// references to other files ------------------------------------------------

/// Applies "base": the referenced object with the sibling keys written over it.
inline Node merge_base(const Node & n, const std::string & kind);

/// Loads the object a reference names: inline object, relative path or preset.
inline Node resolve(const Node & parent, const std::string & key, const std::string & kind)
{
  if (!parent.has(key)) { parent.fail(key, "missing"); }
  const json & v = parent.raw().at(key);
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    fs::path p = s;
    const bool looks_like_path = s.find('/') != std::string::npos || p.has_extension();
    if (looks_like_path) {
      if (p.is_relative()) { p = parent.doc().base_dir() / p; }
    } else {
      p = preset_dir() / kind / (s + ".json");
    }
    if (!fs::exists(p)) {
      parent.fail(
        key, looks_like_path ? "file not found: " + p.string() : "no " + kind + " preset named '" + s + "' in " + (preset_dir() / kind).string());
    }
    return merge_base(Node(load_file(p)), kind);
  }
  if (!v.is_object()) { parent.fail(key, "expected an object, a path or a preset name"); }
  return merge_base(parent.child(key), kind);
}

inline Node merge_base(const Node & n, const std::string & kind)
{
  if (!n.has("base")) { return n; }
  const Node b = resolve(n, "base", kind);
  auto merged = std::make_shared<Document>();
  merged->path = n.doc().path;
  merged->text = n.doc().text;
  merged->root = b.raw();
  for (const auto & item : n.raw().items()) {
    if (item.key() != "base") { merged->root[item.key()] = item.value(); }
  }
  return Node(merged, merged->root, n.path());
}

// vehicles -----------------------------------------------------------------

inline VehicleModel vehicle_from(const Node & n)
{
  n.only({"name", "comment", "mass", "inertia", "gravity", "c_f", "c_f_tau", "rotors", "tiltable", "tilt_limits", "failed_rotor",
          "allocation"});
  const auto in = n.list("inertia", 9);
  Mat3 j;
  j << in[0], in[1], in[2], in[3], in[4], in[5], in[6], in[7], in[8];
  const bool tiltable = n.flag("tiltable", false);
  const std::size_t count = n.array_size("rotors");
  if (count == 0) { n.fail("rotors", "needs at least one rotor"); }
  std::vector<RotorGeometry> rotors;
  for (std::size_t i = 0; i < count; ++i) {
    const Node r = n.element("rotors", i);
    r.only({"arm_angle_deg", "arm_length", "position", "alpha_deg", "beta_deg", "spin_sign", "tilt_sign"});
    const double arm = r.num("arm_angle_deg") * kDegToRad;
    const double beta = r.num("beta_deg", 0.0) * kDegToRad;
    const int spin = r.integer("spin_sign", 0);
    if (spin != 1 && spin != -1) { r.fail("spin_sign", "must be 1 or -1"); }
    std::optional<Vec3> pos;
    if (r.has("position")) { pos = r.vec3("position"); }
    const double length = r.num("arm_length", pos ? pos->norm() : -1.0);
    if (!(length > 0.0)) { r.fail("arm_length", "give a positive arm_length or a position"); }
    RotorGeometry g;
    if (tiltable) {
      if (r.has("alpha_deg")) { r.fail("alpha_deg", "tiltable rotors take tilt_sign; alpha is a state"); }
      const double s = r.num("tilt_sign", 0.0);
      if (s != 1.0 && s != -1.0) { r.fail("tilt_sign", "must be 1 or -1"); }
      g = RotorGeometry::tiltable_on_arm(arm, length, s, beta, spin);
    } else {
      if (r.has("tilt_sign")) { r.fail("tilt_sign", "only for tiltable vehicles"); }
      g = RotorGeometry::on_arm(arm, length, r.num("alpha_deg", 0.0) * kDegToRad, beta, spin);
    }
    if (pos) { g.position_in_body = *pos; }
    rotors.push_back(g);
  }
  VehicleModel m = [&] {
    try {
      return VehicleModel(n.positive("mass"), j, n.positive("gravity", 9.81), rotors, n.num("c_f"), n.num("c_f_tau"));
    } catch (const ConfigError & e) {
      throw ConfigError(n.doc().where() + ": " + (n.path().empty() ? std::string("vehicle") : n.path()) + ": " + e.what());
    }
  }();
  if (tiltable) {
    TiltLimits tl;
    if (n.has("tilt_limits")) {
      const Node t = n.child("tilt_limits");
      t.only({"angle_deg", "rate_deg"});
      const auto a = t.list("angle_deg", 2), r = t.list("rate_deg", 2);
      if (!(a[0] < a[1]) || !(r[0] < 0.0 && r[1] > 0.0)) { t.fail("angle_deg", "need lo < hi and rate_lo < 0 < rate_hi"); }
      tl = {a[0] * kDegToRad, a[1] * kDegToRad, r[0] * kDegToRad, r[1] * kDegToRad};
    }
    m.set_tilt_limits(tl);
  } else if (n.has("tilt_limits")) {
    n.fail("tilt_limits", "only for tiltable vehicles");
  }
  if (n.has("failed_rotor")) {
    const int f = n.integer("failed_rotor", 0);
    if (f < 1 || f > m.rotor_count()) { n.fail("failed_rotor", "must be a rotor number in 1.." + std::to_string(m.rotor_count())); }
    m = m.without_rotor(f - 1);
  }
  if (n.has("allocation")) {
    // inline 6 x n rows, or a file written by identify-allocation
    const int cols = m.rotor_count();
    std::vector<double> a;
    if (n.raw().at("allocation").is_string()) {
      fs::path p = n.raw().at("allocation").get<std::string>();
      if (p.is_relative()) { p = n.doc().base_dir() / p; }
      if (!fs::exists(p)) { n.fail("allocation", "file not found: " + p.string()); }
      const Node f(load_file(p));
      a = f.list("allocation", 6 * cols);
    } else {
      a = n.list("allocation", 6 * cols);
    }
    AllocationMatrix g(6, cols);
    for (int i = 0; i < 6; ++i) {
      for (int k = 0; k < cols; ++k) { g(i, k) = a[static_cast<std::size_t>(i * cols + k)]; }
    }
    try {
      m.set_allocation_override(g);
    } catch (const ConfigError & e) {
      n.fail("allocation", e.what());
    }
  }
  return m;
}

inline VehicleModel load_vehicle(const fs::path & path) { return vehicle_from(Node(load_file(path))); }

// actuators ----------------------------------------------------------------

inline AccelLimitTable table_from(const Node & n)
{
  n.only({"comment", "speeds", "accel_lo", "accel_hi", "c_f", "eps_f", "filter_cutoff", "source"});
  AccelLimitTable t;
  t.speeds = n.list("speeds");
  t.accel_lo = n.list("accel_lo", static_cast<int>(t.speeds.size()));
  t.accel_hi = n.list("accel_hi", static_cast<int>(t.speeds.size()));
  try {
    t.validate();
  } catch (const ConfigError & e) {
    n.fail("speeds", e.what());
  }
  return t;
}

inline ActuatorModel actuator_from(const Node & n)
{
  n.only({"name", "comment", "c_f", "speed_lo", "speed_hi", "rho", "allow_switch_off", "table"});
  ActuatorModel a;
  a.c_f = n.positive("c_f");
  a.speed_lo = n.positive("speed_lo");
  a.speed_hi = n.positive("speed_hi");
  if (!(a.speed_hi > a.speed_lo)) { n.fail("speed_hi", "must exceed speed_lo"); }
  a.rate_scale = n.positive("rho", 1.0);
  a.allow_switch_off = n.flag("allow_switch_off", false);
  a.accel_table = table_from(resolve(n, "table", "tables"));
  return a;
}

inline ActuatorModel load_actuator(const fs::path & path) { return actuator_from(Node(load_file(path))); }

// ramp plans ---------------------------------------------------------------

/// {"setpoints": [..] | {"from","to","step"}, "slopes": [..] | {"from","to","step"}, "half_width", "rest", "dt"}
inline ident::RampPlan plan_from(const Node & n)
{
  n.only({"comment", "setpoints", "slopes", "half_width", "rest", "dt"});
  const auto values = [&](const std::string & key) {
    if (n.has(key) && n.raw().at(key).is_object()) {
      const Node g = n.child(key);
      g.only({"from", "to", "step"});
      const double a = g.num("from"), b = g.num("to"), s = g.positive("step");
      if (!(b >= a)) { g.fail("to", "must not be below from"); }
      std::vector<double> v;
      for (int k = 0; a + k * s <= b + 1e-9 * s; ++k) { v.push_back(a + k * s); }
      return v;
    }
    return n.list(key);
  };
  ident::RampPlan p;
  p.setpoints = values("setpoints");
  p.slopes = values("slopes");
  for (double s : p.slopes) {
    if (!(s > 0.0)) { n.fail("slopes", "slope magnitudes must be positive"); }
  }
  p.half_width = n.positive("half_width", p.half_width);
  p.rest = n.num("rest", p.rest);
  if (p.rest < 0.0) { n.fail("rest", "must be nonnegative"); }
  p.dt = n.positive("dt", p.dt);
  return p;
}

/// The plan file may name the actuator whose speed range and c_f apply.
struct PlanConfig
{
  ident::RampPlan plan;
  std::optional<ActuatorModel> actuator;
};

inline PlanConfig load_plan(const fs::path & path)
{
  const Node root(load_file(path));
  if (root.has("plan")) {
    root.only({"comment", "plan", "actuator"});
    PlanConfig pc{plan_from(root.child("plan")), {}};
    if (root.has("actuator")) { pc.actuator = actuator_from(resolve(root, "actuator", "actuators")); }
    return pc;
  }
  return {plan_from(root), {}};
}

// scenarios ----------------------------------------------------------------

inline StageWeights stage_weights_from(const Node & n)
{
  n.only({"p", "v", "acc", "eta", "omega", "angacc", "energy"});
  StageWeights w;
  w.p = n.nonneg3("p", w.p);
  w.v = n.nonneg3("v", w.v);
  w.acc = n.nonneg3("acc", w.acc);
  w.eta = n.nonneg3("eta", w.eta);
  w.omega = n.nonneg3("omega", w.omega);
  w.angacc = n.nonneg3("angacc", w.angacc);
  w.energy = n.num("energy", 0.0);
  if (w.energy < 0.0) { n.fail("energy", "must be nonnegative"); }
  return w;
}

inline Weights weights_from(const Node & n, int inputs)
{
  n.only({"stage", "terminal", "r_u", "r_tilt", "slack_penalty"});
  Weights w;
  w.stage = stage_weights_from(n.child("stage"));
  if (n.has("terminal")) { w.terminal = stage_weights_from(n.child("terminal")); }
  if (n.has("r_u")) {
    if (n.raw().at("r_u").is_number()) {
      w.r_u = Vec::Constant(inputs, n.num("r_u"));
    } else {
      const auto v = n.list("r_u", inputs);
      w.r_u = Eigen::Map<const Vec>(v.data(), inputs);
    }
  }
  w.r_tilt = n.num("r_tilt", 0.0);
  w.slack_penalty = n.positive("slack_penalty", w.slack_penalty);
  try {
    w.validate();
  } catch (const ConfigError & e) {
    n.fail("stage", e.what());
  }
  return w;
}

inline Reference reference_from(const Node & n)
{
  const std::string type = n.str("type", "");
  if (type == "chirp") {
    n.only({"type", "amplitude", "slope", "t_bar", "axis", "offset"});
    const std::string axis = n.str("axis", "x");
    if (axis != "x" && axis != "y" && axis != "z") { n.fail("axis", "must be x, y or z"); }
    return Reference::chirp(
      n.positive("amplitude"), n.positive("slope"), n.positive("t_bar"), axis[0] - 'x', n.vec3("offset", Vec3::Zero()));
  }
  if (type == "step") {
    n.only({"type", "p1", "p2", "period"});
    return Reference::step(n.vec3("p1"), n.vec3("p2"), n.positive("period"));
  }
  if (type == "hover") {
    n.only({"type", "position", "eta_deg"});
    return Reference::hover(n.vec3("position"), n.vec3("eta_deg", Vec3::Zero()) * kDegToRad);
  }
  n.fail("type", "must be chirp, step or hover");
}

inline Disturbance disturbance_from(const Node & n, const VehicleModel & vehicle)
{
  n.only({"type", "direction", "peak", "t1", "t2", "torque", "worst_case", "t_on"});
  Disturbance d;
  const std::string type = n.str("type", "none");
  if (type == "none") {
    d.kind = Disturbance::Kind::none;
  } else if (type == "triangular_force") {
    d.kind = Disturbance::Kind::triangular_force;
    d.direction = n.vec3("direction");
    if (!(d.direction.norm() > 0.0)) { n.fail("direction", "must be nonzero"); }
    d.peak = n.num("peak");
    d.t1 = n.num("t1");
    d.t2 = n.num("t2");
    if (d.peak < 0.0) { n.fail("peak", "must be nonnegative"); }
    if (!(d.t1 < d.t2)) { n.fail("t2", "must exceed t1"); }
  } else if (type == "body_torque") {
    d.kind = Disturbance::Kind::constant_body_torque;
    d.t_on = n.num("t_on", 0.0);
    if (n.has("torque") == n.has("worst_case")) { n.fail("torque", "give exactly one of torque and worst_case"); }
    if (n.has("torque")) {
      d.torque = n.vec3("torque");
    } else {
      // torque direction the remaining rotors cannot produce except through rotor `rotor`
      const Node w = n.child("worst_case");
      w.only({"rotor", "magnitude"});
      const int r = w.integer("rotor", 0);
      if (r < 1 || r > vehicle.rotor_count()) { w.fail("rotor", "must be a rotor number of the vehicle"); }
      try {
        d.torque = worst_case_torque(vehicle, r - 1, w.positive("magnitude"));
      } catch (const ConfigError & e) {
        w.fail("rotor", e.what());
      }
    }
  } else {
    n.fail("type", "must be none, triangular_force or body_torque");
  }
  return d;
}

inline NoiseSpec noise_from(const Node & n)
{
  n.only({"sigma_p", "sigma_v", "sigma_eta_deg", "sigma_omega_deg", "cutoff", "convention"});
  NoiseSpec s;
  s.sigma_p = n.nonneg3("sigma_p", s.sigma_p);
  s.sigma_v = n.nonneg3("sigma_v", s.sigma_v);
  s.sigma_eta = n.nonneg3("sigma_eta_deg", Vec3::Zero()) * kDegToRad;
  s.sigma_omega = n.nonneg3("sigma_omega_deg", Vec3::Zero()) * kDegToRad;
  s.cutoff = n.positive("cutoff", s.cutoff);
  const std::string c = n.str("convention", "stationary");
  if (c == "stationary") {
    s.convention = NoiseSpec::Convention::stationary;
  } else if (c == "white") {
    s.convention = NoiseSpec::Convention::white;
  } else {
    n.fail("convention", "must be stationary or white");
  }
  return s;
}

inline RhoSchedule rho_from(const Node & parent)
{
  RhoSchedule r;
  const json & v = parent.raw().at("rho");
  if (v.is_number()) {
    r.start = r.max = parent.positive("rho", 1.0);
    return r;
  }
  const Node n = parent.child("rho");
  n.only({"start", "step", "max", "every"});
  r.start = n.positive("start", 1.0);
  r.step = n.num("step", 0.0);
  r.max = n.positive("max", r.start);
  r.every = n.integer("every", 2);
  if (r.step < 0.0) { n.fail("step", "must be nonnegative"); }
  if (r.max < r.start) { n.fail("max", "must not be below start"); }
  if (r.every < 1) { n.fail("every", "must be at least 1"); }
  return r;
}

inline Scenario scenario_from(const Node & n)
{
  n.only({"name", "comment", "vehicle", "actuator", "reference", "weights", "horizon", "rho", "disturbance", "noise", "seed", "duration",
          "t_ctrl", "dt_plant", "fixed_tilt_deg", "initial_tilt_deg", "initial_eta_deg", "abort_radius", "deadline", "mismatch",
          "velocity_estimator", "rti"});
  Scenario s;
  s.name = n.str("name", n.doc().path.empty() ? std::string("scenario") : n.doc().path.stem().string());
  s.vehicle = vehicle_from(resolve(n, "vehicle", "vehicles"));
  s.actuator = actuator_from(resolve(n, "actuator", "actuators"));
  s.reference = reference_from(n.child("reference"));
  s.weights = weights_from(n.child("weights"), s.vehicle.rotor_count());
  if (n.has("horizon")) {
    const Node h = n.child("horizon");
    h.only({"N", "T", "tightening", "energy_output"});
    s.horizon.horizon_steps = h.integer("N", s.horizon.horizon_steps);
    if (s.horizon.horizon_steps < 1) { h.fail("N", "must be at least 1"); }
    s.horizon.step = h.positive("T", s.horizon.step);
    s.horizon.tightening = h.num("tightening", s.horizon.tightening);
    if (!(s.horizon.tightening > 0.0 && s.horizon.tightening <= 1.0)) { h.fail("tightening", "must be in (0, 1]"); }
    s.horizon.energy_output = h.flag("energy_output", false);
  }
  if (n.has("rho")) { s.rho = rho_from(n); }
  if (n.has("disturbance")) { s.disturbance = disturbance_from(n.child("disturbance"), s.vehicle); }
  if (n.has("noise")) { s.noise = noise_from(n.child("noise")); }
  if (n.has("seed")) {
    if (!n.raw().at("seed").is_number_unsigned()) { n.fail("seed", "expected a nonnegative integer"); }
    s.seed = n.raw().at("seed").get<std::uint64_t>();
  }
  s.duration = n.positive("duration", s.duration);
  s.t_ctrl = n.positive("t_ctrl", s.t_ctrl);
  s.dt_plant = n.positive("dt_plant", s.dt_plant);
  if (n.has("fixed_tilt_deg")) {
    if (!s.vehicle.tiltable()) { n.fail("fixed_tilt_deg", "vehicle has no tilt"); }
    s.fixed_tilt = n.num("fixed_tilt_deg") * kDegToRad;
  }
  if (n.has("initial_tilt_deg")) {
    if (!s.vehicle.tiltable()) { n.fail("initial_tilt_deg", "vehicle has no tilt"); }
    s.initial_tilt = n.num("initial_tilt_deg") * kDegToRad;
  }
  s.initial_eta = n.vec3("initial_eta_deg", Vec3::Zero()) * kDegToRad;
  s.abort_radius = n.positive("abort_radius", s.abort_radius);
  s.deadline = n.positive("deadline", s.deadline);
  if (n.has("mismatch")) {
    const Node m = n.child("mismatch");
    m.only({"mass", "inertia", "c_f"});
    s.mass_factor = m.positive("mass", 1.0);
    s.inertia_factor = m.positive("inertia", 1.0);
    s.c_f_factor = m.positive("c_f", 1.0);
  }
  if (n.has("velocity_estimator")) {
    if (n.raw().at("velocity_estimator").is_boolean()) {
      s.velocity_estimator = n.flag("velocity_estimator", false);
    } else {
      const Node e = n.child("velocity_estimator");
      e.only({"window"});
      s.velocity_estimator = true;
      s.estimator_window = e.integer("window", s.estimator_window);
    }
  }
  if (n.has("rti")) {
    const Node r = n.child("rti");
    r.only({"substeps", "levenberg", "qp_max_iterations"});
    s.rti.substeps = r.integer("substeps", s.rti.substeps);
    if (s.rti.substeps < 1) { r.fail("substeps", "must be at least 1"); }
    s.rti.levenberg = r.num("levenberg", s.rti.levenberg);
    if (s.rti.levenberg < 0.0) { r.fail("levenberg", "must be nonnegative"); }
    s.rti.qp.max_iterations = r.integer("qp_max_iterations", s.rti.qp.max_iterations);
    if (s.rti.qp.max_iterations < 1) { r.fail("qp_max_iterations", "must be at least 1"); }
  }
  try {
    s.validate();
  } catch (const ConfigError & e) {
    throw ConfigError(n.doc().where() + ": " + e.what());
  }
  return s;
}

inline Scenario load_scenario(const fs::path & path) { return scenario_from(Node(load_file(path))); }

// writers ------------------------------------------------------------------

inline json table_to_json(const AccelLimitTable & t)
{
  return json{{"speeds", t.speeds}, {"accel_lo", t.accel_lo}, {"accel_hi", t.accel_hi}};
}

inline json allocation_to_json(const ident::AllocationResult & r, const AllocationMatrix & nominal)
{
  std::vector<double> g, e;
  const Mat rel = ident::relative_error_percent(nominal, r.g);
  for (Eigen::Index i = 0; i < r.g.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.g.cols(); ++k) {
      g.push_back(r.g(i, k));
      e.push_back(rel(i, k));
    }
  }
  json rel_json = json::array();
  for (double v : e) { rel_json.push_back(std::isnan(v) ? json(nullptr) : json(v)); }
  return json{{"rotors", r.g.cols()}, {"allocation", g}, {"relative_error_percent", rel_json}, {"residual", r.residual},
              {"condition", r.condition}};
}

inline void write_json(const fs::path & path, const json & j)
{
  std::ofstream out(path);
  if (!out) { throw ConfigError("cannot write " + path.string()); }
  out << j.dump(2) << "\n";
  if (!out) { throw ConfigError("write failed: " + path.string()); }
}

}  // namespace mrav::config
