#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "riesz/cli/config.hpp"
#include "riesz/verify.hpp"

namespace riesz::cli {

using nlohmann::json;

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json kkt_json(const KKTReport& k) {
  return {{"multipliers", k.multipliers},
          {"b1_violation", k.b1_violation},
          {"b2_violation", k.b2_violation},
          {"scale", k.scale},
          {"tolerance", k.tolerance},
          {"max_relative_violation", k.max_violation() / k.scale},
          {"variational_min", number(k.variational_min)},
          {"pass", k.pass}};
}

inline json solve_json(const Condenser& cond, const ProblemSpec& spec, const SolveReport& r, const KKTReport& k,
                       double seconds) {
  json plates = json::array();
  for (std::size_t i = 0; i < cond.plate_count(); ++i)
    plates.push_back({{"sign", cond.plate(i).sign},
                      {"nodes", cond.plate(i).size()},
                      {"mass", spec.mass[i]},
                      {"capped", spec.caps[i].has_value()},
                      {"carried", spec.gauge[i].dot(r.minimizer.components[i])}});
  return {{"schema_version", kSchemaVersion},
          {"energy", r.energy},
          {"multipliers", r.multipliers},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"solver_residual", r.kkt_max_violation},
          {"solver_tolerance", r.tolerance},
          {"min_cross_sign_distance", number(r.min_cross_sign_distance)},
          {"kkt", kkt_json(k)},
          {"plates", plates},
          {"timing_seconds", seconds}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace riesz::cli
