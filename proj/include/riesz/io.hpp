#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "riesz/geometry.hpp"
#include "riesz/measures.hpp"

namespace riesz {

// Shortest text that reads back to the same double.
inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Header plate,node_index,x1..xn,weight,cap; cap is "inf" when unbounded.
inline void write_weights_table(const std::filesystem::path& path, const Condenser& cond, const ProblemSpec& spec,
                                const DiscreteVectorMeasure& mu) {
  mu.check(cond);
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "plate,node_index";
  for (int c = 0; c < cond.dim(); ++c) out << ",x" << c + 1;
  out << ",weight,cap\n";
  for (std::size_t i = 0; i < cond.plate_count(); ++i) {
    const auto& pts = cond.plate(i).nodes.points;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      out << i << ',' << j;
      for (int c = 0; c < cond.dim(); ++c) out << ',' << format_real(pts(c, j));
      out << ',' << format_real(mu.components[i](j)) << ','
          << (spec.caps[i] ? format_real((*spec.caps[i])(j)) : std::string("inf")) << '\n';
    }
  }
}

// Reads a weights table written for the same condenser; node coordinates must match.
inline DiscreteVectorMeasure read_weights_table(const std::filesystem::path& path, const Condenser& cond) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  DiscreteVectorMeasure mu;
  std::vector<std::vector<bool>> seen;
  for (const auto& p : cond.plates()) {
    mu.components.push_back(Eigen::VectorXd::Zero(p.size()));
    seen.emplace_back(static_cast<std::size_t>(p.size()), false);
  }
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    const std::size_t want = static_cast<std::size_t>(cond.dim()) + 4;
    if (cells.size() != want) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    const std::size_t plate = std::stoul(cells[0]);
    const Eigen::Index node = std::stol(cells[1]);
    if (plate >= cond.plate_count() || node < 0 || node >= cond.plate(plate).size())
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": node out of range");
    const auto x = cond.plate(plate).nodes.point(node);
    for (int c = 0; c < cond.dim(); ++c)
      if (std::abs(std::stod(cells[2 + c]) - x(c)) > 1e-12 * (1.0 + std::abs(x(c))))
        throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": node coordinates do not match");
    mu.components[plate](node) = std::stod(cells[2 + cond.dim()]);
    seen[plate][static_cast<std::size_t>(node)] = true;
  }
  for (const auto& s : seen)
    for (bool b : s)
      if (!b) throw InvalidArgument(path.string() + ": table misses nodes");
  return mu;
}

// Measure file: one node per line, coordinates then weight.
inline SignedDiscreteMeasure read_measure(const std::filesystem::path& path) {
  PointSet rows = read_point_cloud(path);
  if (rows.rows() < 2) throw InvalidArgument("measure file needs coordinates and a weight per line");
  const Eigen::Index dim = rows.rows() - 1;
  return SignedDiscreteMeasure(rows.topRows(dim), rows.row(dim).transpose());
}

template <bool S>
void write_measure(const std::filesystem::path& path, const BasicMeasure<S>& mu) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "# x1..x" << mu.dim() << " weight\n";
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    for (int c = 0; c < mu.dim(); ++c) out << format_real(mu.points(c, j)) << ' ';
    out << format_real(mu.weights(j)) << '\n';
  }
}

// One value per line ('#' comments allowed).
inline Eigen::VectorXd read_column(const std::filesystem::path& path) {
  PointSet rows = read_point_cloud(path);
  if (rows.rows() != 1) throw InvalidArgument(path.string() + ": expected one value per line");
  return rows.row(0).transpose();
}

// Whitespace separated table with a commented header.
inline void write_xy_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << '#';
  for (const auto& h : header) out << ' ' << h;
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? " " : "") << format_real(r[c]);
    out << '\n';
  }
}

}  // namespace riesz
