#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dbarrier::cli {

inline constexpr int kSchemaVersion = 1;

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  std::string detail;

  friend bool operator==(const Check&, const Check&) = default;
};

struct McSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_paths = 0;
  std::uint32_t steps_per_window = 0;
  int levels = 1;
  std::uint64_t seed = 0;
  bool antithetic = false;
  std::string bias_note;

  friend bool operator==(const McSummary&, const McSummary&) = default;
};

struct PmfRow {
  int count = 0;
  double analytic = 0.0;
  std::optional<double> mc;
  std::optional<double> mc_std_error;
  std::optional<double> z;

  friend bool operator==(const PmfRow&, const PmfRow&) = default;
};

struct ContractEcho {
  double spot = 0.0;
  double rate = 0.0;
  double vol = 0.0;
  double b_low = 0.0;
  double b_up = 0.0;
  std::vector<std::pair<double, double>> windows;  ///< (start, length)
  double valuation_time = 0.0;
  double spot_at_t = 0.0;
  std::optional<double> floor;
  std::optional<double> horizon;
  std::optional<int> coupons;

  friend bool operator==(const ContractEcho&, const ContractEcho&) = default;
};

struct Report {
  int schema_version = kSchemaVersion;
  std::string command;
  std::string status = "priced";
  double price = 0.0;
  double truncation_bound = 0.0;
  double quadrature_error = 0.0;
  double discount_factor = 1.0;
  int modes = 0;
  int nodes = 0;
  ContractEcho contract;
  std::optional<McSummary> mc;
  std::string moment_basis;
  std::vector<double> moments;
  std::vector<PmfRow> pmf;
  std::vector<Check> checks;

  bool verified() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  friend bool operator==(const Report&, const Report&) = default;
};

namespace detail {

template <class T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
void get_optional(const nlohmann::json& j, const char* key, std::optional<T>& v) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null())
    v.reset();
  else
    v = it->template get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const Check& c) {
  j = {{"name", c.name},           {"passed", c.passed},       {"value", c.value},
       {"reference", c.reference}, {"tolerance", c.tolerance}, {"detail", c.detail}};
}

inline void from_json(const nlohmann::json& j, Check& c) {
  j.at("name").get_to(c.name);
  j.at("passed").get_to(c.passed);
  j.at("value").get_to(c.value);
  j.at("reference").get_to(c.reference);
  j.at("tolerance").get_to(c.tolerance);
  j.at("detail").get_to(c.detail);
}

inline void to_json(nlohmann::json& j, const McSummary& m) {
  j = {{"mean", m.mean},
       {"std_error", m.std_error},
       {"n_paths", m.n_paths},
       {"steps_per_window", m.steps_per_window},
       {"levels", m.levels},
       {"seed", m.seed},
       {"antithetic", m.antithetic},
       {"bias_note", m.bias_note}};
}

inline void from_json(const nlohmann::json& j, McSummary& m) {
  j.at("mean").get_to(m.mean);
  j.at("std_error").get_to(m.std_error);
  j.at("n_paths").get_to(m.n_paths);
  j.at("steps_per_window").get_to(m.steps_per_window);
  j.at("levels").get_to(m.levels);
  j.at("seed").get_to(m.seed);
  j.at("antithetic").get_to(m.antithetic);
  j.at("bias_note").get_to(m.bias_note);
}

inline void to_json(nlohmann::json& j, const PmfRow& r) {
  j = {{"count", r.count}, {"analytic", r.analytic}};
  detail::put_optional(j, "mc", r.mc);
  detail::put_optional(j, "mc_std_error", r.mc_std_error);
  detail::put_optional(j, "z", r.z);
}

inline void from_json(const nlohmann::json& j, PmfRow& r) {
  j.at("count").get_to(r.count);
  j.at("analytic").get_to(r.analytic);
  detail::get_optional(j, "mc", r.mc);
  detail::get_optional(j, "mc_std_error", r.mc_std_error);
  detail::get_optional(j, "z", r.z);
}

inline void to_json(nlohmann::json& j, const ContractEcho& c) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& [s, l] : c.windows) windows.push_back({{"start", s}, {"length", l}});
  j = {{"spot", c.spot},
       {"rate", c.rate},
       {"vol", c.vol},
       {"b_low", c.b_low},
       {"b_up", c.b_up},
       {"windows", windows},
       {"valuation_time", c.valuation_time},
       {"spot_at_t", c.spot_at_t}};
  detail::put_optional(j, "floor", c.floor);
  detail::put_optional(j, "horizon", c.horizon);
  detail::put_optional(j, "coupons", c.coupons);
}

inline void from_json(const nlohmann::json& j, ContractEcho& c) {
  j.at("spot").get_to(c.spot);
  j.at("rate").get_to(c.rate);
  j.at("vol").get_to(c.vol);
  j.at("b_low").get_to(c.b_low);
  j.at("b_up").get_to(c.b_up);
  c.windows.clear();
  for (const auto& w : j.at("windows"))
    c.windows.emplace_back(w.at("start").get<double>(), w.at("length").get<double>());
  j.at("valuation_time").get_to(c.valuation_time);
  j.at("spot_at_t").get_to(c.spot_at_t);
  detail::get_optional(j, "floor", c.floor);
  detail::get_optional(j, "horizon", c.horizon);
  detail::get_optional(j, "coupons", c.coupons);
}

inline void to_json(nlohmann::json& j, const Report& r) {
  j = {{"schema_version", r.schema_version},
       {"command", r.command},
       {"status", r.status},
       {"price", r.price},
       {"truncation_bound", r.truncation_bound},
       {"quadrature_error", r.quadrature_error},
       {"discount_factor", r.discount_factor},
       {"modes", r.modes},
       {"nodes", r.nodes},
       {"contract", r.contract},
       {"moment_basis", r.moment_basis},
       {"moments", r.moments},
       {"pmf", r.pmf},
       {"checks", r.checks},
       {"verified", r.verified()}};
  detail::put_optional(j, "mc", r.mc);
}

inline void from_json(const nlohmann::json& j, Report& r) {
  j.at("schema_version").get_to(r.schema_version);
  if (r.schema_version != kSchemaVersion)
    throw nlohmann::json::other_error::create(
        501, "unsupported schema_version " + std::to_string(r.schema_version), &j);
  j.at("command").get_to(r.command);
  j.at("status").get_to(r.status);
  j.at("price").get_to(r.price);
  j.at("truncation_bound").get_to(r.truncation_bound);
  j.at("quadrature_error").get_to(r.quadrature_error);
  j.at("discount_factor").get_to(r.discount_factor);
  j.at("modes").get_to(r.modes);
  j.at("nodes").get_to(r.nodes);
  j.at("contract").get_to(r.contract);
  j.at("moment_basis").get_to(r.moment_basis);
  j.at("moments").get_to(r.moments);
  j.at("pmf").get_to(r.pmf);
  j.at("checks").get_to(r.checks);
  detail::get_optional(j, "mc", r.mc);
}

inline std::string to_json_text(const Report& r) { return nlohmann::json(r).dump(2); }

inline Report report_from_json_text(const std::string& text) {
  return nlohmann::json::parse(text).get<Report>();
}

inline void print_table(std::ostream& os, const Report& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  auto row = [&](const std::string& k, const auto& v) {
    out << "  " << std::left << std::setw(20) << k << v << '\n';
  };
  out << r.command << " (" << r.status << ")\n";
  row("price", r.price);
  row("discount factor", r.discount_factor);
  row("truncation bound", r.truncation_bound);
  row("quadrature error", r.quadrature_error);
  if (r.modes > 0) row("modes / nodes", std::to_string(r.modes) + " / " + std::to_string(r.nodes));
  if (!r.moment_basis.empty()) row("moment basis", r.moment_basis);
  if (r.mc) {
    std::ostringstream mc;
    mc << std::setprecision(8) << r.mc->mean << " +/- " << r.mc->std_error << "  (" << r.mc->n_paths
       << " paths, " << r.mc->steps_per_window << " steps, " << r.mc->levels << " level(s))";
    row("monte carlo", mc.str());
  }
  if (!r.moments.empty()) {
    out << "  moments E[A^v]\n";
    for (std::size_t v = 0; v < r.moments.size(); ++v)
      out << "    v=" << v << "  " << r.moments[v] << '\n';
  }
  if (!r.pmf.empty()) {
    bool any_mc = false;
    for (const auto& p : r.pmf) any_mc = any_mc || p.mc.has_value();
    out << "  " << std::setw(6) << "A" << std::setw(16) << "analytic";
    if (any_mc) out << std::setw(16) << "mc" << std::setw(14) << "mc se" << std::setw(9) << "z";
    out << '\n';
    out << std::setprecision(6);
    for (const auto& p : r.pmf) {
      out << "  " << std::setw(6) << p.count << std::setw(16) << p.analytic;
      if (p.mc) out << std::setw(16) << *p.mc << std::setw(14) << *p.mc_std_error << std::setw(9)
                    << std::setprecision(3) << *p.z << std::setprecision(6);
      out << '\n';
    }
  }
  for (const auto& c : r.checks)
    out << "  [" << (c.passed ? "PASS" : "FAIL") << "] " << c.name << ": " << c.detail << '\n';
  os << out.str();
}

}  // namespace dbarrier::cli
