// Sectioned key = value run configuration.
//
//   [system]  preset = three_level | spin_boson | qubit_decay, with omega /
//             tunneling / bias; or dim, hamiltonian, lindblad, initial_state
//             as flattened row-major complex lists, plus observable.<name>.
//   [bath]    Gamma, gamma for OU noise, or repeated term = Re c, Im c, Re nu, Im nu.
//   [run]     mode, order, truncation, closure, dt, horizon, trajectories,
//             seed, workers, sample_every, out_dir, compare_a, compare_b.
//
// '#' starts a comment. Keys are case-sensitive; unknown keys are errors.
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hfd/model.hpp"
#include "hfd/noise.hpp"
#include "hfd/types.hpp"

namespace hfd {

struct ConfigIssue {
  int line;  // 0 when not tied to a line
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(describe(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string describe(const std::vector<ConfigIssue>& issues) {
    std::string s;
    for (const auto& i : issues) {
      if (!s.empty()) s += "\n";
      s += i.line > 0 ? "line " + std::to_string(i.line) + ": " + i.message : i.message;
    }
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

struct SystemConfig {
  std::string preset;  // empty: explicit matrices
  double omega = 1.0;
  double tunneling = 1.0;
  double bias = 0.0;
  int dim = 0;
  std::vector<Complex> hamiltonian;
  std::vector<Complex> lindblad;
  std::vector<Complex> initial_state;
  std::vector<std::pair<std::string, std::vector<Complex>>> observables;

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

struct BathConfig {
  std::optional<double> big_gamma;  // key "Gamma"
  std::optional<double> gamma;
  std::vector<KernelTerm> terms;
  int j_max = CorrelationKernel::kDefaultDerivativeOrder;

  friend bool operator==(const BathConfig&, const BathConfig&) = default;
};

struct RunSection {
  std::string mode = "ou-hfd";
  int order = 10;
  std::string truncation = "zero";        // zero | commutator
  std::string closure = "truncate-zero";  // truncate-zero | geometric
  std::optional<int> closure_j_max;
  std::optional<Complex> closure_ratio;
  double dt = 0.01;
  double horizon = 10.0;
  std::size_t trajectories = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::size_t sample_every = 1;
  std::string out_dir = "results";
  std::string compare_a = "ou-hfd";
  std::string compare_b = "exact3";

  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct RunConfig {
  SystemConfig system;
  BathConfig bath;
  RunSection run;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline const std::vector<std::string>& run_modes() {
  static const std::vector<std::string> modes{"ou-hfd", "general-hfd", "sde-oracle", "hops-check",
                                              "exact3", "lindblad",    "compare",    "counts"};
  return modes;
}

/// Parses `1`, `-2.5`, `2i`, `-i`, `1-2i`, `3e-2+1e-3i`.
inline std::optional<Complex> parse_complex(std::string_view s) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  auto number = [](std::string_view v, double unit_default) -> std::optional<double> {
    if (v.empty()) return unit_default;
    if (v == "+") return 1.0;
    if (v == "-") return -1.0;
    if (v.front() == '+') v.remove_prefix(1);
    double x = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
    return x;
  };
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.back() != 'i') {
    if (s == "+" || s == "-") return std::nullopt;
    auto re = number(s, 0.0);
    if (!re) return std::nullopt;
    return Complex(*re, 0.0);
  }
  s.remove_suffix(1);
  std::size_t split = std::string_view::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string_view::npos) {
    auto im = number(s, 1.0);
    if (!im) return std::nullopt;
    return Complex(0.0, *im);
  }
  const auto re_part = s.substr(0, split);
  if (re_part.empty() || re_part == "+" || re_part == "-") return std::nullopt;
  auto re = number(re_part, 0.0);
  auto im = number(s.substr(split), 1.0);
  if (!re || !im) return std::nullopt;
  return Complex(*re, *im);
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_complex(Complex c) {
  if (c.imag() == 0.0 && !std::signbit(c.imag())) return format_double(c.real());
  std::string im = format_double(c.imag());
  if (im.front() != '-') im = "+" + im;
  return format_double(c.real()) + im + "i";
}

namespace detail {

inline std::string trim_copy(std::string_view v) {
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
  return std::string(v);
}

class Parser {
 public:
  void error(int line, std::string msg) { issues_.push_back({line, std::move(msg)}); }
  std::vector<ConfigIssue>& issues() { return issues_; }

  std::optional<double> real(int line, const std::string& key, const std::string& v) {
    double x = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) {
      error(line, "'" + key + "': malformed number '" + v + "'");
      return std::nullopt;
    }
    return x;
  }

  template <class Int>
  std::optional<Int> integer(int line, const std::string& key, const std::string& v) {
    Int x{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) {
      error(line, "'" + key + "': malformed integer '" + v + "'");
      return std::nullopt;
    }
    return x;
  }

  std::optional<Complex> complex(int line, const std::string& key, const std::string& v) {
    auto c = parse_complex(v);
    if (!c || !std::isfinite(c->real()) || !std::isfinite(c->imag())) {
      error(line, "'" + key + "': malformed complex number '" + v + "'");
      return std::nullopt;
    }
    return c;
  }

  std::vector<Complex> list(int line, const std::string& key, const std::string& v) {
    std::vector<Complex> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto c = complex(line, key, trim_copy(item));
      if (!c) return {};
      out.push_back(*c);
    }
    if (out.empty()) error(line, "'" + key + "': empty list");
    return out;
  }

 private:
  std::vector<ConfigIssue> issues_;
};

}  // namespace detail

/// Builds the system a config describes (presets expanded to matrices).
inline SystemSpec build_system(const SystemConfig& c) {
  if (c.preset == "three_level") return presets::three_level(c.omega);
  if (c.preset == "spin_boson") return presets::spin_boson(c.tunneling, c.bias);
  if (c.preset == "qubit_decay") return presets::qubit_decay(c.omega);
  if (!c.preset.empty()) throw InvalidArgument("unknown preset '" + c.preset + "'");
  if (c.dim < 1) throw InvalidArgument("system: dim is required for explicit matrices");
  const auto d = static_cast<std::size_t>(c.dim);
  auto matrix = [&](const std::vector<Complex>& v, const std::string& name) {
    if (v.size() != d * d)
      throw InvalidArgument("system: " + name + " needs " + std::to_string(d * d) + " entries, got " +
                            std::to_string(v.size()));
    MatX m(c.dim, c.dim);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) m(a, b) = v[a * d + b];
    return m;
  };
  SystemSpec s;
  s.dim = c.dim;
  s.hamiltonian = matrix(c.hamiltonian, "hamiltonian");
  s.lindblad = matrix(c.lindblad, "lindblad");
  if (c.initial_state.size() != d) throw InvalidArgument("system: initial_state needs " + std::to_string(d) + " entries");
  s.initial_state = Eigen::Map<const VecX>(c.initial_state.data(), c.dim);
  for (const auto& [name, v] : c.observables) s.observables.push_back({name, matrix(v, "observable." + name)});
  return s;
}

inline SystemSpec build_system_with_observables(const SystemConfig& c) {
  SystemSpec s = build_system(c);
  if (!c.preset.empty()) {
    for (const auto& [name, v] : c.observables) {
      if (v.size() != static_cast<std::size_t>(s.dim * s.dim))
        throw InvalidArgument("system: observable." + name + " has the wrong number of entries");
      MatX m(s.dim, s.dim);
      for (Eigen::Index a = 0; a < s.dim; ++a)
        for (Eigen::Index b = 0; b < s.dim; ++b) m(a, b) = v[static_cast<std::size_t>(a * s.dim + b)];
      s.observables.push_back({name, m});
    }
  }
  return s;
}

inline CorrelationKernel build_kernel(const BathConfig& b) {
  const bool ou = b.big_gamma.has_value() || b.gamma.has_value();
  if (ou && !b.terms.empty()) throw InvalidArgument("bath: give either Gamma/gamma or term lines, not both");
  if (ou) {
    if (!b.big_gamma || !b.gamma) throw InvalidArgument("bath: OU noise needs both Gamma and gamma");
    if (*b.big_gamma < 0.0) throw InvalidArgument("bath: Gamma must be >= 0");
    return CorrelationKernel::ornstein_uhlenbeck(*b.big_gamma, *b.gamma, b.j_max);
  }
  if (b.terms.empty()) throw InvalidArgument("kernel required");
  return CorrelationKernel(b.terms, b.j_max);
}

/// Markov-limit rate: the integral of alpha over the whole real line.
inline double markov_rate(const CorrelationKernel& k) {
  Complex s = 0.0;
  for (const auto& t : k.terms()) s += t.weight / t.rate;
  return 2.0 * s.real();
}

inline bool mode_needs_bath(const std::string& mode) { return mode != "counts"; }

/// Throws ConfigError listing every problem with its line number.
inline RunConfig parse_config(std::string_view text) {
  detail::Parser p;
  RunConfig cfg;
  std::string section;
  int bath_line = 0;
  bool any_bath_key = false;
  bool explicit_system = false;

  std::stringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string s = detail::trim_copy(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        p.error(line, "malformed section header '" + s + "'");
        continue;
      }
      section = detail::trim_copy(std::string_view(s).substr(1, s.size() - 2));
      if (section != "system" && section != "bath" && section != "run") p.error(line, "unknown section [" + section + "]");
      if (section == "bath") bath_line = line;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      p.error(line, "expected key = value");
      continue;
    }
    const std::string key = detail::trim_copy(std::string_view(s).substr(0, eq));
    const std::string val = detail::trim_copy(std::string_view(s).substr(eq + 1));
    if (val.empty()) {
      p.error(line, "'" + key + "': missing value");
      continue;
    }
    auto unknown = [&] { p.error(line, "unknown key '" + key + "' in [" + section + "]"); };

    if (section == "system") {
      auto& c = cfg.system;
      if (key == "preset") {
        c.preset = val;
        if (val != "three_level" && val != "spin_boson" && val != "qubit_decay")
          p.error(line, "unknown preset '" + val + "'");
      } else if (key == "omega") {
        if (auto x = p.real(line, key, val)) c.omega = *x;
      } else if (key == "tunneling") {
        if (auto x = p.real(line, key, val)) c.tunneling = *x;
      } else if (key == "bias") {
        if (auto x = p.real(line, key, val)) c.bias = *x;
      } else if (key == "dim") {
        if (auto x = p.integer<int>(line, key, val)) c.dim = *x;
        explicit_system = true;
      } else if (key == "hamiltonian") {
        c.hamiltonian = p.list(line, key, val);
        explicit_system = true;
      } else if (key == "lindblad") {
        c.lindblad = p.list(line, key, val);
        explicit_system = true;
      } else if (key == "initial_state") {
        c.initial_state = p.list(line, key, val);
        explicit_system = true;
      } else if (key.rfind("observable.", 0) == 0 && key.size() > 11) {
        c.observables.emplace_back(key.substr(11), p.list(line, key, val));
      } else {
        unknown();
      }
    } else if (section == "bath") {
      auto& b = cfg.bath;
      any_bath_key = true;
      if (key == "Gamma") {
        b.big_gamma = p.real(line, key, val);
      } else if (key == "gamma") {
        b.gamma = p.real(line, key, val);
      } else if (key == "term") {
        auto v = p.list(line, key, val);
        if (v.size() == 4 && v[0].imag() == 0.0 && v[1].imag() == 0.0 && v[2].imag() == 0.0 && v[3].imag() == 0.0) {
          b.terms.push_back({Complex(v[0].real(), v[1].real()), Complex(v[2].real(), v[3].real())});
        } else if (!v.empty()) {
          p.error(line, "'term' needs four real numbers: Re c, Im c, Re nu, Im nu");
        }
      } else if (key == "j_max") {
        if (auto x = p.integer<int>(line, key, val)) b.j_max = *x;
      } else {
        unknown();
      }
    } else if (section == "run") {
      auto& r = cfg.run;
      if (key == "mode") {
        r.mode = val;
        const auto& m = run_modes();
        if (std::find(m.begin(), m.end(), val) == m.end()) p.error(line, "unknown mode '" + val + "'");
      } else if (key == "order") {
        if (auto x = p.integer<int>(line, key, val)) r.order = *x;
      } else if (key == "truncation") {
        r.truncation = val;
        if (val != "zero" && val != "commutator") p.error(line, "truncation must be zero or commutator");
      } else if (key == "closure") {
        r.closure = val;
        if (val != "truncate-zero" && val != "geometric") p.error(line, "closure must be truncate-zero or geometric");
      } else if (key == "closure_j_max") {
        r.closure_j_max = p.integer<int>(line, key, val);
      } else if (key == "closure_ratio") {
        r.closure_ratio = p.complex(line, key, val);
      } else if (key == "dt") {
        if (auto x = p.real(line, key, val)) r.dt = *x;
      } else if (key == "horizon") {
        if (auto x = p.real(line, key, val)) r.horizon = *x;
      } else if (key == "trajectories") {
        if (auto x = p.integer<std::size_t>(line, key, val)) r.trajectories = *x;
      } else if (key == "seed") {
        if (auto x = p.integer<std::uint64_t>(line, key, val)) r.seed = *x;
      } else if (key == "workers") {
        if (auto x = p.integer<unsigned>(line, key, val)) r.workers = *x;
      } else if (key == "sample_every") {
        if (auto x = p.integer<std::size_t>(line, key, val)) r.sample_every = *x;
      } else if (key == "out_dir") {
        r.out_dir = val;
      } else if (key == "compare_a" || key == "compare_b") {
        if (val != "ou-hfd" && val != "general-hfd" && val != "sde-oracle" && val != "exact3")
          p.error(line, "'" + key + "' must name an engine: ou-hfd, general-hfd, sde-oracle or exact3");
        (key == "compare_a" ? r.compare_a : r.compare_b) = val;
      } else {
        unknown();
      }
    } else {
      p.error(line, "key '" + key + "' outside a section");
    }
  }

  if (!p.issues().empty()) throw ConfigError(std::move(p.issues()));

  // Semantic checks once everything is read.
  if (explicit_system && !cfg.system.preset.empty())
    p.error(0, "system: preset and explicit matrices are mutually exclusive");
  const bool needs_model = mode_needs_bath(cfg.run.mode);
  if (needs_model && cfg.system.preset.empty() && !explicit_system)
    p.error(0, "system: preset or explicit matrices required");
  if (p.issues().empty() && (needs_model || explicit_system || !cfg.system.preset.empty())) {
    try {
      const SystemSpec spec = build_system_with_observables(cfg.system);
      const auto report = validate_system(spec);
      if (!report.ok()) p.error(0, "system: " + report.summary());
    } catch (const InvalidArgument& e) {
      p.error(0, e.what());
    }
  }
  if (mode_needs_bath(cfg.run.mode)) {
    if (!any_bath_key) {
      p.error(bath_line, "kernel required");
    } else {
      try {
        (void)build_kernel(cfg.bath);
      } catch (const InvalidArgument& e) {
        p.error(bath_line, e.what());
      }
    }
  }
  const auto& r = cfg.run;
  if (r.order < 0) p.error(0, "run: order must be >= 0");
  if (!(r.dt > 0.0)) p.error(0, "run: dt must be positive");
  if (!(r.horizon > 0.0)) p.error(0, "run: horizon must be positive");
  if (r.trajectories < 1) p.error(0, "run: trajectories must be >= 1");
  if (r.sample_every < 1) p.error(0, "run: sample_every must be >= 1");
  if (r.closure_j_max && *r.closure_j_max < 0) p.error(0, "run: closure_j_max must be >= 0");
  if (!p.issues().empty()) throw ConfigError(std::move(p.issues()));
  return cfg;
}

/// Text that parse_config maps back to an equal RunConfig.
inline std::string emit_config(const RunConfig& cfg) {
  std::ostringstream o;
  auto list = [](const std::vector<Complex>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_complex(v[i]);
    return s;
  };
  const auto& s = cfg.system;
  o << "[system]\n";
  if (!s.preset.empty()) {
    o << "preset = " << s.preset << "\n";
  } else if (s.dim > 0) {
    o << "dim = " << s.dim << "\n";
    o << "hamiltonian = " << list(s.hamiltonian) << "\n";
    o << "lindblad = " << list(s.lindblad) << "\n";
    o << "initial_state = " << list(s.initial_state) << "\n";
  }
  o << "omega = " << format_double(s.omega) << "\n";
  o << "tunneling = " << format_double(s.tunneling) << "\n";
  o << "bias = " << format_double(s.bias) << "\n";
  for (const auto& [name, v] : s.observables) o << "observable." << name << " = " << list(v) << "\n";

  const auto& b = cfg.bath;
  o << "\n[bath]\n";
  if (b.big_gamma) o << "Gamma = " << format_double(*b.big_gamma) << "\n";
  if (b.gamma) o << "gamma = " << format_double(*b.gamma) << "\n";
  for (const auto& t : b.terms)
    o << "term = " << format_double(t.weight.real()) << ", " << format_double(t.weight.imag()) << ", "
      << format_double(t.rate.real()) << ", " << format_double(t.rate.imag()) << "\n";
  o << "j_max = " << b.j_max << "\n";

  const auto& r = cfg.run;
  o << "\n[run]\n";
  o << "mode = " << r.mode << "\n";
  o << "order = " << r.order << "\n";
  o << "truncation = " << r.truncation << "\n";
  o << "closure = " << r.closure << "\n";
  if (r.closure_j_max) o << "closure_j_max = " << *r.closure_j_max << "\n";
  if (r.closure_ratio) o << "closure_ratio = " << format_complex(*r.closure_ratio) << "\n";
  o << "dt = " << format_double(r.dt) << "\n";
  o << "horizon = " << format_double(r.horizon) << "\n";
  o << "trajectories = " << r.trajectories << "\n";
  o << "seed = " << r.seed << "\n";
  o << "workers = " << r.workers << "\n";
  o << "sample_every = " << r.sample_every << "\n";
  o << "out_dir = " << r.out_dir << "\n";
  o << "compare_a = " << r.compare_a << "\n";
  o << "compare_b = " << r.compare_b << "\n";
  return o.str();
}

}  // namespace hfd
