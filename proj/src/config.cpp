#include "spherekick/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace spherekick {

using nlohmann::json;

bool is_experiment(const std::string& name) {
  return std::any_of(std::begin(experiment_names), std::end(experiment_names),
                     [&](const char* e) { return name == e; });
}

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += '\n';
    out += s;
  }
  return out;
}

/// Reads fields of one JSON object, recording type errors and unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) fail("", "must be an object");
  }
  ~ObjectReader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) errors_.push_back(name(key) + ": unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.is_object() && obj_.contains(key);
  }

  const json* child(const std::string& key) { return has(key) ? &obj_.at(key) : nullptr; }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) return fail(key, "must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "must be finite");
  }
  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) return fail(key, "must be an integer");
    out = v.get<int>();
  }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      return fail(key, "must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) return fail(key, "must be true or false");
    out = v.get<bool>();
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) return fail(key, "must be a string");
    out = v.get<std::string>();
  }
  template <class T>
  void list(const std::string& key, std::vector<T>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) return fail(key, "must be a list");
    out.clear();
    for (const auto& e : v) {
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) return fail(key, "must contain integers");
      } else {
        if (!e.is_number()) return fail(key, "must contain numbers");
      }
      out.push_back(e.get<T>());
    }
  }

  void fail(const std::string& key, const std::string& msg) { errors_.push_back(name(key) + ": " + msg); }
  std::string name(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

Profile profile_from_string(const std::string& s, bool& ok) {
  ok = true;
  if (s == "constant") return Profile::constant;
  if (s == "cosine") return Profile::cosine;
  if (s == "sine") return Profile::sine;
  ok = false;
  return Profile::constant;
}

const char* to_string(Profile p) {
  switch (p) {
    case Profile::constant: return "constant";
    case Profile::cosine: return "cosine";
    case Profile::sine: return "sine";
  }
  return "constant";
}

ForcingSpec parse_forcing(const json& v, const std::string& path, std::vector<std::string>& errors) {
  ForcingSpec f;
  if (!v.is_array()) {
    errors.push_back(path + ": must be a list of terms");
    return f;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    ObjectReader r(v[i], path + "[" + std::to_string(i) + "]", errors);
    ForcingTerm t;
    std::string profile = "constant";
    r.integer("mode", t.mode);
    r.number("amplitude", t.amplitude);
    r.string("profile", profile);
    r.integer("q", t.q);
    r.number("phase", t.phase);
    bool ok = true;
    t.profile = profile_from_string(profile, ok);
    if (!ok) r.fail("profile", "must be one of constant, cosine, sine");
    if (t.mode < 1) r.fail("mode", "must be >= 1");
    if (t.q < 1) r.fail("q", "must be >= 1");
    f.terms.push_back(t);
  }
  return f;
}

InitialSpec parse_initial(const json& v, const std::string& path, std::vector<std::string>& errors) {
  InitialSpec s;
  ObjectReader r(v, path, errors);
  if (const json* modes = r.child("modes")) {
    if (!modes->is_array()) {
      r.fail("modes", "must be a list");
    } else {
      for (std::size_t i = 0; i < modes->size(); ++i) {
        ObjectReader m((*modes)[i], path + ".modes[" + std::to_string(i) + "]", errors);
        ModeAmplitude ma;
        m.integer("mode", ma.mode);
        m.number("amplitude", ma.amplitude);
        if (ma.mode < 1) m.fail("mode", "must be >= 1");
        s.modes.push_back(ma);
      }
    }
  }
  r.number("random_norm", s.random_norm);
  r.unsigned64("random_stream", s.random_stream);
  if (s.random_norm < 0.0) r.fail("random_norm", "must be >= 0");
  return s;
}

json forcing_json(const ForcingSpec& f) {
  json a = json::array();
  for (const auto& t : f.terms) {
    a.push_back({{"mode", t.mode}, {"amplitude", t.amplitude}, {"profile", to_string(t.profile)}, {"q", t.q},
                 {"phase", t.phase}});
  }
  return a;
}

json initial_json(const InitialSpec& s) {
  json modes = json::array();
  for (const auto& m : s.modes) modes.push_back({{"mode", m.mode}, {"amplitude", m.amplitude}});
  return {{"modes", modes}, {"random_norm", s.random_norm}, {"random_stream", s.random_stream}};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(Errc::config, join_lines(violations)), violations_(std::move(violations)) {}

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  {
    ObjectReader top(doc, "", errors);
    top.string("experiment", cfg.experiment);
    if (!cfg.experiment.empty() && !is_experiment(cfg.experiment)) {
      top.fail("experiment", "unknown experiment '" + cfg.experiment + "'");
    }
    top.unsigned64("seed", cfg.seed);
    top.string("output_dir", cfg.output_dir);

    if (const json* s = top.child("solver")) {
      ObjectReader r(*s, "solver", errors);
      r.number("nu", cfg.solver.nu);
      r.number("omega", cfg.solver.omega);
      r.integer("N", cfg.solver.truncation);
      r.integer("steps_per_period", cfg.solver.steps_per_period);
      r.number("oversample", cfg.solver.oversample);
      r.boolean("nonlinear", cfg.solver.nonlinear);
      if (!(cfg.solver.nu > 0.0)) r.fail("nu", "nu must be > 0");
      if (cfg.solver.omega < 0.0) r.fail("omega", "must be >= 0");
      if (cfg.solver.truncation < 1) r.fail("N", "must be >= 1");
      if (cfg.solver.steps_per_period < 1) r.fail("steps_per_period", "must be >= 1");
      if (!(cfg.solver.oversample >= 1.0)) r.fail("oversample", "must be >= 1");
    }

    const int N = std::max(1, cfg.solver.truncation);
    const int J = mode_count(N);
    auto check_modes = [&](const ForcingSpec& f, const std::string& path) {
      for (std::size_t i = 0; i < f.terms.size(); ++i) {
        if (f.terms[i].mode > J) {
          errors.push_back(path + "[" + std::to_string(i) + "].mode: must be <= J = " + std::to_string(J));
        }
      }
    };
    if (const json* f = top.child("forcing")) {
      cfg.forcing = parse_forcing(*f, "forcing", errors);
      check_modes(cfg.forcing, "forcing");
    }
    if (const json* f = top.child("zonal_forcing")) {
      cfg.zonal_forcing = parse_forcing(*f, "zonal_forcing", errors);
      check_modes(cfg.zonal_forcing, "zonal_forcing");
      if (!cfg.zonal_forcing.zonal()) errors.push_back("zonal_forcing: every term must act on an m = 0 mode");
    }

    if (const json* k = top.child("kicks")) {
      ObjectReader r(*k, "kicks", errors);
      std::string law = "uniform";
      r.string("law", law);
      try {
        cfg.law = noise_law_from_string(law);
      } catch (const Error&) {
        r.fail("law", "must be one of uniform, triangular, beta");
      }
      const bool has_b = r.has("b");
      const bool has_rule = r.has("rule");
      if (has_b && has_rule) r.fail("", "give either b or rule, not both");
      r.list("b", cfg.kick_b);
      for (std::size_t i = 0; i < cfg.kick_b.size(); ++i) {
        if (!(cfg.kick_b[i] >= 0.0)) r.fail("b[" + std::to_string(i) + "]", "must be >= 0");
      }
      if (int(cfg.kick_b.size()) > J) r.fail("b", "has more than J = " + std::to_string(J) + " entries");
      if (const json* rule = r.child("rule")) {
        ObjectReader rr(*rule, "kicks.rule", errors);
        KickRule kr;
        double d = 0.0, amp = 0.0;
        if (rr.has("D")) {
          rr.number("D", d);
          kr.d = d;
          if (!(d > 0.0)) rr.fail("D", "must be > 0");
        }
        rr.integer("M", kr.m);
        rr.integer("N_pos", kr.n_pos);
        if (rr.has("amplitude_above_M")) {
          rr.number("amplitude_above_M", amp);
          kr.amplitude_above_m = amp;
          if (!(amp > 0.0)) rr.fail("amplitude_above_M", "must be > 0");
        }
        if (kr.m < 1) rr.fail("M", "must be >= 1");
        if (kr.m > kr.n_pos) rr.fail("M", "must be <= N_pos (big kick rule)");
        if (kr.n_pos > J) rr.fail("N_pos", "must be <= J = " + std::to_string(J));
        cfg.kick_rule = kr;
      }
    }

    if (const json* v = top.child("initial")) cfg.initial = parse_initial(*v, "initial", errors);
    if (const json* v = top.child("initial_v")) cfg.initial_v = parse_initial(*v, "initial_v", errors);
    for (const auto* init : {&cfg.initial, &cfg.initial_v}) {
      for (const auto& m : init->modes) {
        if (m.mode > J) errors.push_back("initial mode " + std::to_string(m.mode) + " exceeds J = " + std::to_string(J));
      }
    }

    if (const json* p = top.child("params")) {
      ObjectReader r(*p, "params", errors);
      ExperimentParams& q = cfg.params;
      r.integer("K", q.K);
      r.integer("n_chains", q.n_chains);
      r.integer("chain", q.chain);
      r.integer("periods", q.periods);
      r.integer("record_every", q.record_every);
      r.number("R", q.R);
      r.number("r", q.r);
      r.list("cutoffs", q.cutoffs);
      r.integer("n_pairs", q.n_pairs);
      r.integer("n_samples", q.n_samples);
      r.number("tol", q.tol);
      r.integer("j_max", q.j_max);
      r.integer("M", q.M);
      r.number("delta", q.delta);
      r.integer("horizon", q.horizon);
      r.number("threshold", q.threshold);
      r.list("scales", q.scales);
      r.number("perturbation_norm", q.perturbation_norm);
      r.string("ball_mode", q.ball_mode);
      r.string("observable", q.observable);
      r.integer("observable_mode", q.observable_mode);
      r.number("observable_scale", q.observable_scale);
      r.boolean("common_streams", q.common_streams);
      r.boolean("shared", q.shared);
      r.integer("checkpoint_every", q.checkpoint_every);
      r.string("resume", q.resume);

      if (q.K < 0) r.fail("K", "must be >= 0");
      if (q.n_chains < 1) r.fail("n_chains", "must be >= 1");
      if (q.chain < 0) r.fail("chain", "must be >= 0");
      if (q.periods < 1) r.fail("periods", "must be >= 1");
      if (q.record_every < 0) r.fail("record_every", "must be >= 0");
      if (!(q.R > q.r && q.r > 0.0)) r.fail("R", "need R > r > 0");
      for (std::size_t i = 0; i < q.cutoffs.size(); ++i) {
        if (q.cutoffs[i] < 0 || q.cutoffs[i] > J) {
          r.fail("cutoffs[" + std::to_string(i) + "]", "must lie in [0, J = " + std::to_string(J) + "]");
        }
        if (i > 0 && q.cutoffs[i] <= q.cutoffs[i - 1]) r.fail("cutoffs", "must be ascending");
      }
      if (q.n_pairs < 1) r.fail("n_pairs", "must be >= 1");
      if (q.n_samples < 1) r.fail("n_samples", "must be >= 1");
      if (!(q.tol > 0.0)) r.fail("tol", "must be > 0");
      if (q.j_max < 1) r.fail("j_max", "must be >= 1");
      if (q.M < 1 || q.M > J) r.fail("M", "must lie in [1, J]");
      if (!(q.delta >= 0.0)) r.fail("delta", "must be >= 0");
      if (q.horizon < 1) r.fail("horizon", "must be >= 1");
      if (!(q.threshold > 0.0)) r.fail("threshold", "must be > 0");
      if (!(q.perturbation_norm >= 0.0)) r.fail("perturbation_norm", "must be >= 0");
      if (q.ball_mode != "origin" && q.ball_mode != "attractor") r.fail("ball_mode", "must be origin or attractor");
      if (q.observable != "rational" && q.observable != "clipnorm" && q.observable != "coordinate") {
        r.fail("observable", "must be rational, clipnorm or coordinate");
      }
      if (q.observable_mode < 1 || q.observable_mode > J) r.fail("observable_mode", "must lie in [1, J]");
      if (!(q.observable_scale > 0.0)) r.fail("observable_scale", "must be > 0");
      if (q.checkpoint_every < 0) r.fail("checkpoint_every", "must be >= 0");
    }
  }
  if (cfg.experiment == "zonal" && !cfg.forcing.zonal()) {
    errors.push_back("forcing: zonal experiment needs m = 0 modes only");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"config: not valid JSON (" + std::string(e.what()) + ")"});
  }
  return parse_config(doc);
}

KickSpec ExperimentConfig::kick_spec() const {
  if (kick_rule) {
    double d = kick_rule->d.value_or(0.0);
    if (!kick_rule->d) {
      d = absorbing_radius(forcing.empty() ? 0.0 : forcing_sup_norm(forcing), solver.nu);
    }
    const double amp = kick_rule->amplitude_above_m.value_or(0.01 * d);
    return big_kick_spec(d, kick_rule->m, kick_rule->n_pos, amp, law, seed);
  }
  KickSpec k;
  k.b = kick_b;
  k.law = law;
  k.seed = seed;
  return k;
}

FlowState ExperimentConfig::initial_state(const InitialSpec& spec) const {
  const int N = solver.truncation;
  SpectralScalar psi(N);
  for (const auto& m : spec.modes) {
    const HarmonicIndex h = ModeOrdering::decode(m.mode);
    add_real_component(psi, h, m.amplitude / std::sqrt(h.eigenvalue()));
  }
  if (spec.random_norm > 0.0) {
    RngStream rng(seed, sampler_stream_base + 1000 + spec.random_stream);
    psi += sample_smooth_field(N, spec.random_norm, rng);
  }
  return FlowState::from_streamfunction(psi);
}

json to_json(const ExperimentConfig& cfg) {
  json kicks = {{"law", to_string(cfg.law)}};
  if (cfg.kick_rule) {
    json rule = {{"M", cfg.kick_rule->m}, {"N_pos", cfg.kick_rule->n_pos}};
    rule["D"] = cfg.kick_rule->d ? json(*cfg.kick_rule->d) : json(nullptr);
    rule["amplitude_above_M"] = cfg.kick_rule->amplitude_above_m ? json(*cfg.kick_rule->amplitude_above_m) : json(nullptr);
    kicks["rule"] = rule;
  } else {
    kicks["b"] = cfg.kick_b;
  }
  const ExperimentParams& q = cfg.params;
  return {
      {"experiment", cfg.experiment},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"solver",
       {{"nu", cfg.solver.nu},
        {"omega", cfg.solver.omega},
        {"N", cfg.solver.truncation},
        {"steps_per_period", cfg.solver.steps_per_period},
        {"oversample", cfg.solver.oversample},
        {"nonlinear", cfg.solver.nonlinear}}},
      {"forcing", forcing_json(cfg.forcing)},
      {"zonal_forcing", forcing_json(cfg.zonal_forcing)},
      {"kicks", kicks},
      {"initial", initial_json(cfg.initial)},
      {"initial_v", initial_json(cfg.initial_v)},
      {"params",
       {{"K", q.K},
        {"n_chains", q.n_chains},
        {"chain", q.chain},
        {"periods", q.periods},
        {"record_every", q.record_every},
        {"R", q.R},
        {"r", q.r},
        {"cutoffs", q.cutoffs},
        {"n_pairs", q.n_pairs},
        {"n_samples", q.n_samples},
        {"tol", q.tol},
        {"j_max", q.j_max},
        {"M", q.M},
        {"delta", q.delta},
        {"horizon", q.horizon},
        {"threshold", q.threshold},
        {"scales", q.scales},
        {"perturbation_norm", q.perturbation_norm},
        {"ball_mode", q.ball_mode},
        {"observable", q.observable},
        {"observable_mode", q.observable_mode},
        {"observable_scale", q.observable_scale},
        {"common_streams", q.common_streams},
        {"shared", q.shared},
        {"checkpoint_every", q.checkpoint_every},
        {"resume", q.resume}}},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace spherekick
