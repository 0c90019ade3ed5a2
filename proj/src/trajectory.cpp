#include "ncgp/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "ncgp/errors.hpp"
#include "ncgp/format.hpp"

namespace ncgp {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                   : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("invalid number '" + std::string(s) + "'", line);
  }
  return v;
}

int parse_int(std::string_view s, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("invalid step '" + std::string(s) + "'", line);
  }
  return v;
}

Trajectory finish_trajectory(std::string id, const std::vector<std::vector<double>>& rows,
                             Eigen::Index d) {
  Trajectory t{std::move(id), Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), d)};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      t.points(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
  }
  return t;
}

}  // namespace

TrajectorySet read_trajectories_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "traj_id" || header[1] != "step") {
    throw ParseError("header must be traj_id,step,dim0,...", line_no);
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 2);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (header[static_cast<std::size_t>(k) + 2] != "dim" + std::to_string(k)) {
      throw ParseError("expected column dim" + std::to_string(k), line_no);
    }
  }

  TrajectorySet out;
  std::unordered_set<std::string> seen;
  std::string current;
  std::vector<std::vector<double>> rows;
  int expected_len = -1;
  auto flush = [&](std::size_t at_line) {
    if (rows.empty()) return;
    if (expected_len < 0) expected_len = static_cast<int>(rows.size());
    if (static_cast<int>(rows.size()) != expected_len) {
      throw ParseError("trajectory '" + current + "' has " + std::to_string(rows.size()) +
                           " steps, expected " + std::to_string(expected_len),
                       at_line);
    }
    out.push_back(finish_trajectory(current, rows, d));
    rows.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const std::string id(fields[0]);
    if (id.empty()) throw ParseError("empty traj_id", line_no);
    const int step = parse_int(fields[1], line_no);
    if (id != current || rows.empty()) {
      flush(line_no);
      if (!seen.insert(id).second) {
        throw ParseError("rows of trajectory '" + id + "' are not contiguous", line_no);
      }
      current = id;
    }
    if (step != static_cast<int>(rows.size())) {
      throw ParseError("trajectory '" + id + "': expected step " + std::to_string(rows.size()) +
                           ", got " + std::to_string(step),
                       line_no);
    }
    std::vector<double> row(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) {
      row[static_cast<std::size_t>(k)] = parse_double(fields[static_cast<std::size_t>(k) + 2], line_no);
    }
    rows.push_back(std::move(row));
  }
  flush(line_no);
  if (out.empty()) throw ParseError("no trajectories in file", line_no);
  return out;
}

TrajectorySet load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file '" + path + "'");
  return read_trajectories_csv(in);
}

void write_trajectories_csv(std::ostream& out, const TrajectorySet& data) {
  const Eigen::Index d = data.empty() ? 1 : data.front().dim();
  out << "traj_id,step";
  for (Eigen::Index k = 0; k < d; ++k) out << ",dim" << k;
  out << '\n';
  for (const auto& t : data) {
    for (int j = 0; j < t.length(); ++j) {
      out << t.id << ',' << j;
      for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_double(t.points(j, k));
      out << '\n';
    }
  }
}

void save_trajectories(const TrajectorySet& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory file '" + path + "'");
  write_trajectories_csv(out, data);
  if (!out) throw IoError("failed writing trajectory file '" + path + "'");
}

void check_dataset(const TrajectorySet& data) {
  if (data.empty()) throw InvalidCount("empty trajectory set");
  const int n = data.front().length();
  const Eigen::Index d = data.front().dim();
  for (const auto& t : data) {
    if (t.length() != n || t.dim() != d) {
      throw InvalidArgument("trajectory '" + t.id + "' differs in length or dimension");
    }
    if (!t.points.allFinite()) throw InvalidArgument("trajectory '" + t.id + "' is not finite");
  }
}

}  // namespace ncgp
