#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "csv_util.hpp"
#include "idmgym/errors.hpp"
#include "idmgym/model.hpp"

namespace idmgym {

namespace {
constexpr std::string_view kHeader = "t,v_ego,v_leader,gap,a_obs";
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << kHeader << '\n';
  // Shortest round-trip formatting keeps written files exactly re-readable.
  for (const auto& s : traj.samples) {
    fmt::print(out, "{},{},{},{},{}\n", s.t, s.v_ego, s.v_leader, s.gap, s.a_obs);
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  write_trajectory_csv(out, traj);
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

Trajectory read_trajectory_csv(std::istream& in, std::string_view source_name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(fmt::format("{}: empty file", source_name));
  }
  if (detail::strip_cr(line) != kHeader) {
    throw ParseError(fmt::format("{} row 1: expected header '{}'", source_name, kHeader));
  }
  Trajectory traj;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto text = detail::strip_cr(line);
    if (text.empty()) continue;
    const auto fields = detail::split_fields(text);
    const auto where = fmt::format("{} row {}", source_name, row);
    if (fields.size() != 5) {
      throw ParseError(fmt::format("{}: expected 5 fields, got {}", where, fields.size()));
    }
    TrajectorySample s;
    s.t = detail::parse_double(fields[0], where);
    s.v_ego = detail::parse_double(fields[1], where);
    s.v_leader = detail::parse_double(fields[2], where);
    s.gap = detail::parse_double(fields[3], where);
    s.a_obs = detail::parse_double(fields[4], where);
    if (s.gap <= 0.0) throw ParseError(fmt::format("{}: gap {} <= 0", where, s.gap));
    if (s.v_ego < 0.0) throw ParseError(fmt::format("{}: negative ego speed", where));
    traj.samples.push_back(s);
  }
  if (traj.samples.empty()) {
    throw ParseError(fmt::format("{}: no data rows", source_name));
  }
  traj.dt = traj.samples.size() >= 2 ? traj.samples[1].t - traj.samples[0].t : 0.1;
  try {
    traj.validate();
  } catch (const InputDomainError& e) {
    // Per-row checks above already ran; what remains is timestamp spacing.
    throw ParseError(fmt::format("{}: {} (row = sample + 2)", source_name, e.what()));
  }
  return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return read_trajectory_csv(in, path.string());
}

}  // namespace idmgym
