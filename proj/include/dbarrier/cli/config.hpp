#pragma once

// Contract files are INI-style: `[section]` headers, `key = value` lines,
// `#` or `;` comments. Every error names the file, line and field.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dbarrier/analytic_pricer.hpp"
#include "dbarrier/core_model.hpp"
#include "dbarrier/defaults.hpp"
#include "dbarrier/error.hpp"
#include "dbarrier/mc_oracle.hpp"

namespace dbarrier::cli {

enum class Command { price_digital, price_floor, price_corridor, verify };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::price_digital: return "price-digital";
    case Command::price_floor: return "price-floor";
    case Command::price_corridor: return "price-corridor";
    case Command::verify: return "verify";
  }
  return "unknown";
}

inline Command parse_command(const std::string& s) {
  for (Command c : {Command::price_digital, Command::price_floor, Command::price_corridor,
                    Command::verify})
    if (s == to_string(c)) return c;
  throw ConfigError("unknown command '" + s +
                    "' (expected price-digital, price-floor, price-corridor or verify)");
}

namespace detail {

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  static IniDocument parse(std::istream& in, std::string source = "<config>") {
    IniDocument doc;
    doc.source_ = std::move(source);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto hash = raw.find_first_of("#;");
      const std::string text = detail::trim(std::string_view(raw).substr(0, hash));
      if (text.empty()) continue;
      if (text.front() == '[') {
        if (text.back() != ']' || text.size() < 3)
          throw ConfigError(doc.where(line) + ": malformed section header '" + text + "'");
        section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
        if (doc.sections_.count(section))
          throw ConfigError(doc.where(line) + ": duplicate section [" + section + "]");
        doc.sections_[section];
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError(doc.where(line) + ": expected 'key = value', got '" + text + "'");
      if (section.empty())
        throw ConfigError(doc.where(line) + ": key outside of any [section]");
      const std::string key = detail::trim(std::string_view(text).substr(0, eq));
      const std::string value = detail::trim(std::string_view(text).substr(eq + 1));
      if (key.empty()) throw ConfigError(doc.where(line) + ": empty key");
      auto& keys = doc.sections_[section];
      if (keys.count(key))
        throw ConfigError(doc.where(line) + ": duplicate key [" + section + "] " + key);
      keys[key] = Entry{value, line};
    }
    return doc;
  }

  static IniDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  std::string field(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    return e ? where(e->line) + ": [" + section + "] " + key : source_ + ": [" + section + "] " + key;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& message) const {
    throw ConfigError(field(section, key) + ": " + message);
  }

  std::optional<std::string> get_string(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<double> get_double(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    return to_double(section, key, e->value);
  }

  template <class Int>
  std::optional<Int> get_integer(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    Int v{};
    const auto* end = e->value.data() + e->value.size();
    auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
    if (ec != std::errc() || ptr != end || e->value.empty())
      fail(section, key, "expected an integer, got '" + e->value + "'");
    return v;
  }

  std::optional<bool> get_bool(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    std::string v = e->value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    fail(section, key, "expected true or false, got '" + e->value + "'");
  }

  std::optional<std::vector<double>> get_list(const std::string& section,
                                              const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : detail::split(e->value, ',')) out.push_back(to_double(section, key, item));
    return out;
  }

  double require_double(const std::string& section, const std::string& key) const {
    auto v = get_double(section, key);
    if (!v) throw ConfigError(source_ + ": missing required field [" + section + "] " + key);
    return *v;
  }

  /// Rejects keys that no reader asked for (typos would otherwise be ignored).
  void check_all_used() const {
    for (const auto& [section, keys] : sections_)
      for (const auto& [key, entry] : keys)
        if (!entry.used)
          throw ConfigError(where(entry.line) + ": unknown field [" + section + "] " + key);
  }

  void check_sections(const std::vector<std::string>& known) const {
    for (const auto& [section, keys] : sections_)
      if (std::find(known.begin(), known.end(), section) == known.end()) {
        const int line = keys.empty() ? 0 : keys.begin()->second.line;
        throw ConfigError(where(line) + ": unknown section [" + section + "]");
      }
  }

  const std::string& source() const noexcept { return source_; }

 private:
  std::string where(int line) const { return source_ + ":" + std::to_string(line); }

  double to_double(const std::string& section, const std::string& key,
                   const std::string& text) const {
    // strtod accepts forms from_chars for double may not on older toolchains
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      fail(section, key, "expected a number, got '" + text + "'");
    if (!std::isfinite(v)) fail(section, key, "value must be finite");
    return v;
  }

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct PricingJob {
  Command command = Command::price_digital;
  MarketParams market{100.0, 0.03, 0.2};
  BarrierSpec barriers{50.0, 200.0};
  BarrierSchedule schedule;
  std::optional<double> floor;
  double valuation_time = 0.0;
  double spot_at_t = 100.0;
  PricingParams pricing;
  McConfig mc;
  int mc_levels = defaults::kMcLevels;
  std::optional<double> corridor_horizon;  ///< defaults to the schedule end
  std::optional<int> corridor_coupons;     ///< defaults to the window count
  bool verify = false;

  double horizon() const { return corridor_horizon.value_or(schedule.end_time()); }
  int coupons() const {
    return corridor_coupons.value_or(static_cast<int>(schedule.size()));
  }
};

/// Command-line and environment overrides, applied after the file.
struct Overrides {
  std::optional<std::string> command;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> paths;
  std::optional<std::uint32_t> steps;
  std::optional<int> k_max;
  std::optional<int> nodes;
  bool verify = false;
};

namespace detail {

template <class F>
auto with_field(const IniDocument& doc, const std::string& section, const std::string& key, F&& f)
    -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    doc.fail(section, key, e.what());
  }
}

inline BarrierSchedule read_schedule(const IniDocument& doc) {
  const auto windows = doc.get_string("schedule", "windows");
  const auto tenors = doc.get_list("schedule", "tenors");
  const auto start = doc.get_double("schedule", "start");
  const auto count = doc.get_integer<int>("schedule", "count");
  const auto period = doc.get_double("schedule", "period");
  const int forms = (windows ? 1 : 0) + (tenors ? 1 : 0) + (start || count ? 1 : 0);
  if (forms != 1)
    throw ConfigError(doc.source() +
                      ": [schedule] needs exactly one of 'windows', 'tenors' + 'period', "
                      "or 'start' + 'period' + 'count'");
  if (windows) {
    std::vector<Window> w;
    for (const auto& item : split(*windows, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2)
        doc.fail("schedule", "windows", "expected 'start:length' items, got '" + item + "'");
      char* e1 = nullptr;
      char* e2 = nullptr;
      const double s = std::strtod(parts[0].c_str(), &e1);
      const double l = std::strtod(parts[1].c_str(), &e2);
      if (parts[0].empty() || parts[1].empty() || *e1 != '\0' || *e2 != '\0')
        doc.fail("schedule", "windows", "expected 'start:length' items, got '" + item + "'");
      w.push_back({s, l});
    }
    if (period) doc.fail("schedule", "period", "not used together with 'windows'");
    return with_field(doc, "schedule", "windows", [&] { return BarrierSchedule(std::move(w)); });
  }
  if (!period) throw ConfigError(doc.source() + ": missing required field [schedule] period");
  if (tenors)
    return with_field(doc, "schedule", "tenors",
                      [&] { return BarrierSchedule::from_tenors(*tenors, *period); });
  if (!start || !count)
    throw ConfigError(doc.source() + ": [schedule] 'start' and 'count' go together");
  if (*count < 1) doc.fail("schedule", "count", "must be >= 1");
  return with_field(doc, "schedule", "count", [&] {
    return BarrierSchedule::coupons(*start, *period, static_cast<std::size_t>(*count));
  });
}

}  // namespace detail

inline PricingJob job_from_document(const IniDocument& doc) {
  doc.check_sections({"market", "barriers", "schedule", "valuation", "floor", "corridor",
                      "numerics", "monte_carlo"});
  PricingJob job;
  const double spot = doc.require_double("market", "spot");
  const double rate = doc.require_double("market", "rate");
  const double vol = doc.require_double("market", "vol");
  job.market = detail::with_field(doc, "market", "vol", [&] {
    return MarketParams(spot, rate, vol);
  });
  const double low = doc.require_double("barriers", "low");
  const double up = doc.require_double("barriers", "up");
  if (!(low < up)) doc.fail("barriers", "low", "lower barrier must be below the upper barrier");
  job.barriers = detail::with_field(doc, "barriers", "low", [&] { return BarrierSpec(low, up); });
  job.schedule = detail::read_schedule(doc);

  if (auto c = doc.get_string("valuation", "command"))
    job.command = detail::with_field(doc, "valuation", "command", [&] { return parse_command(*c); });
  job.valuation_time = doc.get_double("valuation", "time").value_or(0.0);
  if (job.valuation_time < 0.0) doc.fail("valuation", "time", "must be >= 0");
  if (job.valuation_time > job.schedule.end_time())
    doc.fail("valuation", "time", "is after the last window");
  job.spot_at_t = doc.get_double("valuation", "spot").value_or(spot);
  if (!(job.spot_at_t > 0.0)) doc.fail("valuation", "spot", "must be positive");
  job.verify = doc.get_bool("valuation", "verify").value_or(false);

  job.floor = doc.get_double("floor", "level");
  if (job.floor && *job.floor < 0.0) doc.fail("floor", "level", "must be >= 0");

  job.corridor_horizon = doc.get_double("corridor", "horizon");
  if (job.corridor_horizon && !(*job.corridor_horizon > 0.0))
    doc.fail("corridor", "horizon", "must be positive");
  job.corridor_coupons = doc.get_integer<int>("corridor", "coupons");
  if (job.corridor_coupons && *job.corridor_coupons < 1)
    doc.fail("corridor", "coupons", "must be >= 1");

  if (auto v = doc.get_integer<int>("numerics", "k_max")) job.pricing.k_max = *v;
  if (auto v = doc.get_integer<int>("numerics", "quad_nodes")) job.pricing.quad_nodes = *v;
  if (auto v = doc.get_integer<int>("numerics", "k_cap")) job.pricing.k_cap = *v;
  if (auto v = doc.get_bool("numerics", "adaptive")) job.pricing.adaptive = *v;
  detail::with_field(doc, "numerics", "k_max", [&] { job.pricing.validate(); });

  if (auto v = doc.get_integer<std::uint64_t>("monte_carlo", "paths")) job.mc.n_paths = *v;
  if (auto v = doc.get_integer<std::uint32_t>("monte_carlo", "steps_per_window"))
    job.mc.steps_per_window = *v;
  if (auto v = doc.get_integer<std::uint64_t>("monte_carlo", "seed")) job.mc.seed = *v;
  if (auto v = doc.get_bool("monte_carlo", "antithetic")) job.mc.antithetic = *v;
  if (auto v = doc.get_integer<int>("monte_carlo", "levels")) job.mc_levels = *v;
  if (job.mc_levels < 1 || job.mc_levels > 6) doc.fail("monte_carlo", "levels", "must be in 1..6");
  detail::with_field(doc, "monte_carlo", "paths", [&] { job.mc.validate(); });

  doc.check_all_used();
  return job;
}

inline PricingJob load_job(const std::string& path) {
  return job_from_document(IniDocument::load(path));
}

inline PricingJob parse_job(const std::string& text, const std::string& source = "<config>") {
  std::istringstream in(text);
  return job_from_document(IniDocument::parse(in, source));
}

inline void apply_overrides(PricingJob& job, const Overrides& o) {
  if (o.command) job.command = parse_command(*o.command);
  if (o.seed) job.mc.seed = *o.seed;
  if (o.paths) job.mc.n_paths = *o.paths;
  if (o.steps) job.mc.steps_per_window = *o.steps;
  if (o.k_max) job.pricing.k_max = *o.k_max;
  if (o.nodes) job.pricing.quad_nodes = *o.nodes;
  if (o.verify) job.verify = true;
  try {
    job.pricing.validate();
    job.mc.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("command-line override: ") + e.what());
  }
}

}  // namespace dbarrier::cli
