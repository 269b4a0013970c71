#include "ctmove/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctmove/kernels.hpp"

namespace ctmove {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_full_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

// Basic ISO-8601: YYYY-MM-DD[ T HH:MM[:SS[.frac]]][Z]; returns hours since
// the civil epoch.
bool parse_iso_hours(const std::string& s, double& hours) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  std::string t = s;
  if (!t.empty() && (t.back() == 'Z' || t.back() == 'z')) t.pop_back();
  std::replace(t.begin(), t.end(), 'T', ' ');
  const int n = std::sscanf(t.c_str(), "%4d-%2d-%2d %2d:%2d:%lf%n", &y, &mo, &d, &h, &mi, &sec,
                            &consumed);
  if (n < 3) return false;
  if (n >= 3 && n < 5) {
    // date-only (or date + hour, which sscanf cannot yield here)
    std::sscanf(t.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed);
    if (consumed != static_cast<int>(t.size())) return false;
    h = mi = 0;
    sec = 0.0;
  } else if (n == 5) {
    sec = 0.0;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) return false;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  hours = static_cast<double>(days) * 24.0 + h + mi / 60.0 + sec / 3600.0;
  return true;
}

void write_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::ofstream open_out(const std::string& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + file);
  return f;
}

std::vector<Vec2> path_locations(const RefinedPath& path) {
  return integrate_locations(path.origin, path.bearings, path.steps);
}

void append_path_rows(std::string& out, const RefinedPath& path, const char* prefix) {
  const std::vector<Vec2> locs = path_locations(path);
  const std::size_t n = path.n_intervals();
  for (std::size_t i = 0; i <= n; ++i) {
    out += prefix;
    write_double(out, path.times[i]);
    out += ',';
    if (i < n) {
      out += std::to_string(path.behaviour[i] + 1);
      out += ',';
      write_double(out, path.bearings[i]);
      out += ',';
      write_double(out, path.steps[i]);
    } else {
      out += ",,";  // no interval starts at the final time
    }
    out += ',';
    write_double(out, locs[i].x);
    out += ',';
    write_double(out, locs[i].y);
    out += '\n';
  }
}

}  // namespace

TimeUnit parse_time_unit(const std::string& s) {
  if (s == "hours") return TimeUnit::hours;
  if (s == "days") return TimeUnit::days;
  throw std::invalid_argument("unknown time unit: " + s + " (expected hours|days)");
}

DistanceUnit parse_distance_unit(const std::string& s) {
  if (s == "metres" || s == "meters") return DistanceUnit::metres;
  if (s == "kilometres" || s == "kilometers") return DistanceUnit::kilometres;
  throw std::invalid_argument("unknown distance unit: " + s + " (expected metres|kilometres)");
}

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::string Config::get_str(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_full_double(get_str(key), v))
    throw std::runtime_error("config: key '" + key + "' is not a number");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const double v = get_double(key);
  return static_cast<std::int64_t>(std::llround(v));
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_str(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("config: key '" + key + "' is not an unsigned integer");
  return v;
}

std::vector<double> Config::get_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& tok : split(get_str(key), ',')) {
    double v = 0.0;
    if (!parse_full_double(trim(tok), v))
      throw std::runtime_error("config: key '" + key + "' has a non-numeric element");
    out.push_back(v);
  }
  return out;
}

ObservationSeries load_observations(const std::string& file, TimeUnit time_unit,
                                    DistanceUnit distance_unit) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("cannot open observations: " + file);

  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(file + ": empty file");
  {
    auto cols = split(trim(line), ',');
    for (auto& c : cols) c = trim(c);
    if (cols.size() != 3 || cols[0] != "time" || cols[1] != "x" || cols[2] != "y")
      throw std::runtime_error(file + ": expected header 'time,x,y'");
  }

  const double dist_scale = distance_unit == DistanceUnit::kilometres ? 1000.0 : 1.0;
  const double time_scale = time_unit == TimeUnit::days ? 24.0 : 1.0;

  ObservationSeries obs;
  int line_no = 1;
  bool any_iso = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 3)
      throw std::runtime_error(file + ": line " + std::to_string(line_no) +
                               ": expected 3 columns");
    const std::string ts = trim(cols[0]);
    const std::string xs = trim(cols[1]);
    const std::string ys = trim(cols[2]);
    if (xs.empty() || ys.empty()) continue;  // missing observation

    double t_hours = 0.0;
    double numeric = 0.0;
    if (parse_full_double(ts, numeric)) {
      t_hours = numeric * time_scale;
    } else if (parse_iso_hours(ts, t_hours)) {
      any_iso = true;
    } else {
      throw std::runtime_error(file + ": line " + std::to_string(line_no) +
                               ": unparseable time '" + ts + "'");
    }

    double x = 0.0, y = 0.0;
    if (!parse_full_double(xs, x) || !parse_full_double(ys, y))
      throw std::runtime_error(file + ": line " + std::to_string(line_no) +
                               ": unparseable location");

    if (!obs.times.empty()) {
      const double prev = obs.times.back();
      if (t_hours == prev)
        throw std::runtime_error(file + ": line " + std::to_string(line_no) +
                                 ": duplicate observation time");
      if (t_hours < prev)
        throw std::runtime_error(file + ": line " + std::to_string(line_no) +
                                 ": non-monotone observation time");
    }
    obs.times.push_back(t_hours);
    obs.locations.push_back({x * dist_scale, y * dist_scale});
  }
  (void)any_iso;
  if (obs.size() < 3) throw std::runtime_error(file + ": fewer than 3 usable observations");

  const double t0 = obs.times.front();
  for (double& t : obs.times) t -= t0;
  obs.validate();
  return obs;
}

SamplerConfig sampler_config_from(const Config& cfg) {
  SamplerConfig sc;
  sc.n_iter = cfg.get_int("n_iter", sc.n_iter);
  sc.thin = static_cast<int>(cfg.get_int("thin", sc.thin));
  sc.burn_in_fraction = cfg.get_double("burn_in_fraction", sc.burn_in_fraction);
  sc.path_updates_per_iter =
      static_cast<int>(cfg.get_int("path_updates_per_iter", sc.path_updates_per_iter));
  sc.section_min_points = static_cast<int>(cfg.get_int("section_min_points", sc.section_min_points));
  sc.section_max_points = static_cast<int>(cfg.get_int("section_max_points", sc.section_max_points));
  sc.delta_t = cfg.get_double("delta_t", sc.delta_t);
  {
    // one value shared across states, or a comma list per state
    const char* keys[4] = {"rw_sd_sigma_theta_sq", "rw_sd_mu", "rw_sd_beta",
                           "rw_sd_sigma_psi_sq"};
    std::size_t n_entries = 1;
    std::array<std::vector<double>, 4> lists;
    for (int k = 0; k < 4; ++k) {
      lists[static_cast<std::size_t>(k)] =
          cfg.has(keys[k]) ? cfg.get_list(keys[k]) : std::vector<double>{0.0};
      n_entries = std::max(n_entries, lists[static_cast<std::size_t>(k)].size());
    }
    sc.rw_sd.assign(n_entries, {0.0, 0.0, 0.0, 0.0});
    for (int k = 0; k < 4; ++k) {
      const auto& l = lists[static_cast<std::size_t>(k)];
      for (std::size_t s = 0; s < n_entries; ++s)
        sc.rw_sd[s][static_cast<std::size_t>(k)] = l[l.size() == 1 ? 0 : s];
    }
  }
  sc.rw_sd_rel = cfg.get_double("rw_sd_rel", sc.rw_sd_rel);
  sc.path_store_stride = static_cast<int>(cfg.get_int("path_store_stride", sc.path_store_stride));
  sc.speed_threshold = cfg.get_double("speed_threshold", sc.speed_threshold);
  sc.seed = cfg.get_uint("seed", sc.seed);
  return sc;
}

PriorSpec prior_spec_from(const Config& cfg, int n_states) {
  PriorSpec pr = PriorSpec::defaults(n_states);
  auto fill = [&](const std::string& key, Eigen::VectorXd& v) {
    if (!cfg.has(key)) return;
    const auto vals = cfg.get_list(key);
    if (vals.size() == 1)
      v.setConstant(vals[0]);
    else if (vals.size() == static_cast<std::size_t>(n_states))
      for (int i = 0; i < n_states; ++i) v[i] = vals[static_cast<std::size_t>(i)];
    else
      throw std::runtime_error("config: '" + key + "' needs 1 or n_states values");
  };
  fill("prior_lambda_shape", pr.lambda_shape);
  fill("prior_lambda_rate", pr.lambda_rate);
  pr.dirichlet_weight = cfg.get_double("prior_q_weight", pr.dirichlet_weight);
  pr.r_max = cfg.get_double("prior_r_max", pr.r_max);

  const char* kinds[4] = {"sigma_theta_sq", "mu", "beta", "sigma_psi_sq"};
  for (int s = 0; s < n_states; ++s) {
    for (int k = 0; k < 4; ++k) {
      const std::string key =
          "prior_" + std::string(kinds[k]) + "_" + std::to_string(s + 1);
      if (!cfg.has(key)) continue;
      const std::string spec = cfg.get_str(key);
      ParamPrior& p = pr.movement[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
      if (spec == "flat") {
        p.kind = ParamPrior::Kind::flat_positive;
      } else if (spec.rfind("normal(", 0) == 0 && spec.back() == ')') {
        const auto parts = split(spec.substr(7, spec.size() - 8), ',');
        if (parts.size() != 2) throw std::runtime_error("config: bad prior spec '" + spec + "'");
        p.kind = ParamPrior::Kind::trunc_normal;
        if (!parse_full_double(trim(parts[0]), p.mean) || !parse_full_double(trim(parts[1]), p.sd))
          throw std::runtime_error("config: bad prior spec '" + spec + "'");
      } else {
        throw std::runtime_error("config: bad prior spec '" + spec +
                                 "' (expected flat or normal(mean,sd))");
      }
    }
  }
  pr.validate();
  return pr;
}

Parameters parameters_from(const Config& cfg) {
  const int n_states = static_cast<int>(cfg.get_int("n_states", 2));
  Parameters params;
  const auto lambda = cfg.get_list("lambda");
  if (lambda.size() != static_cast<std::size_t>(n_states))
    throw std::runtime_error("config: 'lambda' needs n_states values");
  params.behaviour.lambda = Eigen::Map<const Eigen::VectorXd>(lambda.data(), n_states);
  params.behaviour.q = Eigen::MatrixXd::Zero(n_states, n_states);
  if (n_states == 2) {
    params.behaviour.q(0, 1) = params.behaviour.q(1, 0) = 1.0;
  } else {
    for (int i = 0; i < n_states; ++i) {
      const auto row = cfg.get_list("q_" + std::to_string(i + 1));
      if (row.size() != static_cast<std::size_t>(n_states))
        throw std::runtime_error("config: 'q_i' rows need n_states values");
      for (int j = 0; j < n_states; ++j) params.behaviour.q(i, j) = row[static_cast<std::size_t>(j)];
    }
  }
  params.movement.resize(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) {
    const std::string p = "state_" + std::to_string(s + 1) + "_";
    MovementParams& m = params.movement[static_cast<std::size_t>(s)];
    m.sigma_theta_sq = cfg.get_double(p + "sigma_theta_sq");
    m.mu = cfg.get_double(p + "mu");
    m.beta = cfg.get_double(p + "beta");
    m.sigma_psi_sq = cfg.get_double(p + "sigma_psi_sq");
  }
  params.validate();
  return params;
}

void write_path_csv(const std::string& file, const RefinedPath& path) {
  std::string out = "t,state,theta,nu,x,y\n";
  append_path_rows(out, path, "");
  open_out(file) << out;
}

void write_draws_csv(const std::string& file, const PosteriorSamples& samples) {
  std::string out = "draw,iter";
  for (const std::string& n : parameter_names(samples.n_states)) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (Eigen::Index r = 0; r < samples.draws.rows(); ++r) {
    out += std::to_string(r + 1);
    out += ',';
    out += std::to_string(samples.draw_iters[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < samples.draws.cols(); ++c) {
      out += ',';
      write_double(out, samples.draws(r, c));
    }
    out += '\n';
  }
  open_out(file) << out;
}

void write_snapshots_csv(const std::string& file, const PosteriorSamples& samples) {
  std::string out = "draw,t,state,theta,nu,x,y\n";
  for (std::size_t s = 0; s < samples.snapshots.size(); ++s) {
    const std::string prefix = std::to_string(samples.snapshot_draws[s] + 1) + ",";
    append_path_rows(out, samples.snapshots[s], prefix.c_str());
  }
  open_out(file) << out;
}

DrawTable read_draws_csv(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("cannot open draws: " + file);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(file + ": empty");
  auto header = split(trim(line), ',');
  if (header.size() < 3 || header[0] != "draw" || header[1] != "iter")
    throw std::runtime_error(file + ": unexpected draw-table header");

  DrawTable table;
  table.names.assign(header.begin() + 2, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != header.size()) throw std::runtime_error(file + ": ragged row");
    table.draw_ids.push_back(std::stoll(cols[0]));
    table.iters.push_back(std::stoll(cols[1]));
    std::vector<double> vals(cols.size() - 2);
    for (std::size_t c = 2; c < cols.size(); ++c) {
      if (!parse_full_double(cols[c], vals[c - 2]))
        throw std::runtime_error(file + ": non-numeric draw value");
    }
    rows.push_back(std::move(vals));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < table.names.size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

std::vector<RefinedPath> read_snapshots_csv(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw std::runtime_error("cannot open snapshots: " + file);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(file + ": empty");

  std::vector<RefinedPath> out;
  std::int64_t cur_draw = -1;
  RefinedPath cur;
  bool has_origin = false;
  auto flush = [&]() {
    if (cur_draw >= 0) {
      if (cur.times.size() < 2) throw std::runtime_error(file + ": truncated snapshot");
      out.push_back(cur);
    }
    cur = RefinedPath{};
    has_origin = false;
  };
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 7) throw std::runtime_error(file + ": expected 7 columns");
    const std::int64_t draw = std::stoll(cols[0]);
    if (draw != cur_draw) {
      flush();
      cur_draw = draw;
    }
    double t = 0.0, x = 0.0, y = 0.0;
    if (!parse_full_double(cols[1], t) || !parse_full_double(cols[5], x) ||
        !parse_full_double(cols[6], y))
      throw std::runtime_error(file + ": bad snapshot row");
    cur.times.push_back(t);
    if (!has_origin) {
      cur.origin = {x, y};
      has_origin = true;
    }
    if (!trim(cols[2]).empty()) {
      double theta = 0.0, nu = 0.0;
      if (!parse_full_double(cols[3], theta) || !parse_full_double(cols[4], nu))
        throw std::runtime_error(file + ": bad snapshot row");
      cur.behaviour.push_back(static_cast<int>(std::stoll(cols[2])) - 1);
      cur.bearings.push_back(theta);
      cur.steps.push_back(nu);
    }
  }
  flush();
  return out;
}

namespace {

void write_manifest(const std::string& file, const Config& cfg,
                    const std::vector<std::string>& keys) {
  std::string out;
  out += "# ctmove run manifest (rerunnable as a fit config)\n";
  out += "ctmove_version = ";
  out += kVersion;
  out += '\n';
  for (const std::string& k : keys) {
    if (!cfg.has(k)) continue;
    out += k;
    out += " = ";
    out += cfg.get_str(k);
    out += '\n';
  }
  open_out(file) << out;
}

}  // namespace

int cmd_simulate(const Config& cfg) {
  const fs::path out_dir = cfg.get_str("out_dir", "out");
  fs::create_directories(out_dir);

  const Parameters params = parameters_from(cfg);
  const double duration = cfg.get_double("sim_duration");
  const double obs_interval = cfg.get_double("sim_obs_interval");
  const double delta_t = cfg.get_double("delta_t", 2.0);
  if (!(duration > 0.0)) throw std::runtime_error("sim_duration must be positive");
  if (!(obs_interval > 0.0) || obs_interval > duration)
    throw std::runtime_error("observation schedule extends beyond the simulated horizon");

  const int s0 = static_cast<int>(cfg.get_int("initial_state", 1)) - 1;
  if (s0 < 0 || s0 >= params.behaviour.n_states())
    throw std::runtime_error("initial_state out of range");
  const double theta0 = cfg.get_double("initial_theta", 0.0);
  const double psi0 =
      cfg.get_double("initial_psi", params.movement[static_cast<std::size_t>(s0)].mu);
  Rng rng(cfg.get_uint("seed", 1));

  // Observation times are forced onto the refined grid so the emitted
  // observations are exact path locations.
  std::vector<double> obs_times;
  for (double t = obs_interval; t <= duration + 1e-9; t += obs_interval)
    obs_times.push_back(std::min(t, duration));
  const BehaviourTrajectory traj =
      simulate_behaviour(params.behaviour, 0.0, duration, s0, rng);
  RefinedPath path;
  path.times = build_refined_times(traj, delta_t, obs_times);
  const std::size_t n = path.times.size() - 1;
  path.behaviour.resize(n);
  path.bearings.resize(n);
  path.steps.resize(n);
  double theta = theta0, psi = psi0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = path.dt(i);
    path.behaviour[i] = traj.state_at(path.times[i]);
    path.bearings[i] = theta;
    path.steps[i] = psi * dt;
    std::tie(theta, psi) =
        simulate_movement_increment(theta, psi, path.behaviour[i], dt, params, rng);
  }

  write_path_csv((out_dir / "path.csv").string(), path);

  const std::vector<Vec2> locs = path_locations(path);
  std::string out = "time,x,y\n";
  std::size_t gi = 0;
  out += "0,";
  write_double(out, locs[0].x);
  out += ',';
  write_double(out, locs[0].y);
  out += '\n';
  for (const double t : obs_times) {
    while (gi < path.times.size() && path.times[gi] < t - 1e-9) ++gi;
    out.append([&] {
      std::string row;
      write_double(row, path.times[gi]);
      row += ',';
      write_double(row, locs[gi].x);
      row += ',';
      write_double(row, locs[gi].y);
      row += '\n';
      return row;
    }());
  }
  open_out((out_dir / "observations.csv").string()) << out;
  return 0;
}

int cmd_fit(const Config& cfg) {
  const fs::path out_dir = cfg.get_str("out_dir", "out");
  fs::create_directories(out_dir);

  if (cfg.has("kernel_backend") && !kernels::set_backend_by_name(cfg.get_str("kernel_backend")))
    throw std::runtime_error("unsupported kernel_backend: " + cfg.get_str("kernel_backend"));

  const std::string obs_file = cfg.get_str("obs_file");
  const ObservationSeries obs =
      load_observations(obs_file, parse_time_unit(cfg.get_str("time_unit", "hours")),
                        parse_distance_unit(cfg.get_str("distance_unit", "metres")));

  const int n_states = static_cast<int>(cfg.get_int("n_states", 2));
  const SamplerConfig sc = sampler_config_from(cfg);
  const PriorSpec priors = prior_spec_from(cfg, n_states);

  Rng rng(sc.seed);
  const PosteriorSamples samples = run_sampler(obs, sc, priors, rng);

  write_draws_csv((out_dir / "draws.csv").string(), samples);
  write_snapshots_csv((out_dir / "path_snapshots.csv").string(), samples);

  {
    std::string out = "update_type,accepted,attempted,rate\n";
    auto row = [&](const char* name, const AcceptanceCounter& c) {
      out += name;
      out += ',';
      out += std::to_string(c.accepted);
      out += ',';
      out += std::to_string(c.attempted);
      out += ',';
      write_double(out, c.rate());
      out += '\n';
    };
    row("movement", samples.movement_acc);
    row("path_section", samples.path_acc);
    open_out((out_dir / "acceptance.csv").string()) << out;
  }

  {
    Config echo = cfg;
    echo.set("command", "fit");
    echo.set("obs_file", fs::absolute(obs_file).string());
    echo.set("n_states", std::to_string(n_states));
    echo.set("seed", std::to_string(sc.seed));
    echo.set("kernel_backend", std::string(kernels::backend_name(kernels::active_backend())));
    echo.set("obs_span_hours", [&] {
      std::string s;
      write_double(s, obs.times.back() - obs.times.front());
      return s;
    }());
    std::vector<std::string> keys;
    for (const auto& [k, v] : echo.entries()) keys.push_back(k);
    write_manifest((out_dir / "manifest.cfg").string(), echo, keys);
  }
  return 0;
}

int cmd_summarize(const Config& cfg) {
  const fs::path fit_dir = cfg.get_str("fit_dir", cfg.get_str("out_dir", "out"));
  const fs::path out_dir = cfg.get_str("out_dir", fit_dir.string());
  fs::create_directories(out_dir);

  const Config manifest = Config::from_file((fit_dir / "manifest.cfg").string());
  const int n_states = static_cast<int>(manifest.get_int("n_states", 2));
  const double delta_t = manifest.get_double("delta_t", 2.0);

  const DrawTable draws = read_draws_csv((fit_dir / "draws.csv").string());
  if (draws.values.rows() < 2) throw std::runtime_error("summarize: too few draws");

  auto column = [&](const std::string& name) -> Eigen::VectorXd {
    const auto it = std::find(draws.names.begin(), draws.names.end(), name);
    if (it == draws.names.end())
      throw std::runtime_error("summarize: missing draw column " + name);
    return draws.values.col(it - draws.names.begin());
  };

  // Table-style summary: per state lambda, movement parameters, and the
  // derived long-term speed variance (computed per draw, then quantiled).
  std::string out = "state,parameter,q05,q50,q95\n";
  std::string diag = "parameter,ess,hw_stationary,hw_trim,hw_usable_fraction\n";
  const double hw_alpha = cfg.get_double("hw_alpha", 0.05);

  auto add_summary = [&](int state, const std::string& param, const Eigen::VectorXd& v) {
    const std::vector<double> samples(v.begin(), v.end());
    const SummaryRow row = quantile_summary(samples, param);
    out += std::to_string(state);
    out += ',';
    out += param;
    out += ',';
    write_double(out, row.q05);
    out += ',';
    write_double(out, row.q50);
    out += ',';
    write_double(out, row.q95);
    out += '\n';
  };
  auto add_diag = [&](const std::string& name, const Eigen::VectorXd& v) {
    const std::vector<double> chain(v.begin(), v.end());
    diag += name;
    diag += ',';
    if (chain.size() >= 10) {
      write_double(diag, effective_sample_size(chain));
    } else {
      diag += "nan";
    }
    if (chain.size() >= 100) {
      const HeidelbergerWelch hw = heidelberger_welch(chain, hw_alpha);
      diag += ',';
      diag += hw.stationary ? "1" : "0";
      diag += ',';
      write_double(diag, hw.trim);
      diag += ',';
      write_double(diag, hw.usable_fraction);
    } else {
      diag += ",nan,nan,nan";
    }
    diag += '\n';
  };

  for (int s = 1; s <= n_states; ++s) {
    const std::string suffix = "_" + std::to_string(s);
    const Eigen::VectorXd lambda = column("lambda" + suffix);
    add_summary(s, "lambda", lambda);
    add_diag("lambda" + suffix, lambda);
    for (const char* kind : {"sigma_theta_sq", "mu", "beta", "sigma_psi_sq"}) {
      const Eigen::VectorXd v = column(std::string(kind) + suffix);
      add_summary(s, kind, v);
      add_diag(std::string(kind) + suffix, v);
    }
    const Eigen::VectorXd beta = column("beta" + suffix);
    const Eigen::VectorXd spsq = column("sigma_psi_sq" + suffix);
    const Eigen::VectorXd ltv = spsq.array() / (2.0 * beta.array());
    add_summary(s, "long_term_speed_var", ltv);
    if (n_states > 2) {
      for (int j = 1; j <= n_states; ++j) {
        if (j == s) continue;
        const std::string qn = "q_" + std::to_string(s) + "_" + std::to_string(j);
        add_summary(s, qn, column(qn));
      }
    }
  }
  open_out((out_dir / "summary.csv").string()) << out;
  open_out((out_dir / "diagnostics.csv").string()) << diag;

  const std::vector<RefinedPath> snapshots =
      read_snapshots_csv((fit_dir / "path_snapshots.csv").string());
  if (!snapshots.empty()) {
    const double t0 = snapshots.front().times.front();
    const double t1 = snapshots.front().times.back();
    std::vector<double> grid;
    for (double t = t0; t < t1 + 1e-9; t += delta_t) grid.push_back(std::min(t, t1));
    const StateProbabilitySeries series = state_probability_series(snapshots, grid, n_states);
    std::string ps = "t";
    for (int s = 1; s <= n_states; ++s) ps += ",p_state_" + std::to_string(s);
    ps += '\n';
    for (std::size_t g = 0; g < series.times.size(); ++g) {
      write_double(ps, series.times[g]);
      for (int s = 0; s < n_states; ++s) {
        ps += ',';
        write_double(ps, series.probs(static_cast<Eigen::Index>(g), s));
      }
      ps += '\n';
    }
    open_out((out_dir / "state_probabilities.csv").string()) << ps;
  }
  return 0;
}

}  // namespace ctmove
