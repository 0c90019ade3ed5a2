#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ncgp {

/// Equally spaced sequence of d-dimensional points; row j is step j.
struct Trajectory {
  std::string id;
  Eigen::MatrixXd points;

  int length() const { return static_cast<int>(points.rows()); }
  Eigen::Index dim() const { return points.cols(); }
  Eigen::VectorXd point(int step) const { return points.row(step).transpose(); }
};

using TrajectorySet = std::vector<Trajectory>;

/**
 * Reads the `traj_id,step,dim0,...,dim{d-1}` CSV format.
 *
 * Rows of one trajectory are contiguous with steps 0, 1, ..., N-1 in order,
 * and every trajectory has the same N. Violations raise ParseError carrying
 * the 1-based line number.
 */
TrajectorySet read_trajectories_csv(std::istream& in);
TrajectorySet load_trajectories(const std::string& path);

void write_trajectories_csv(std::ostream& out, const TrajectorySet& data);
void save_trajectories(const TrajectorySet& data, const std::string& path);

/// Throws InvalidArgument unless all trajectories share length and dimension and are finite.
void check_dataset(const TrajectorySet& data);

}  // namespace ncgp
