#include <doctest.h>

#include <random>
#include <sstream>

#include "ncgp/errors.hpp"
#include "ncgp/trajectory.hpp"

namespace {

int parse_error_line(const std::string& csv) {
  std::istringstream in(csv);
  try {
    ncgp::read_trajectories_csv(in);
  } catch (const ncgp::ParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("csv round trip is exact") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 3.0);
  ncgp::TrajectorySet data;
  for (int i = 0; i < 4; ++i) {
    Eigen::MatrixXd pts(6, 3);
    for (Eigen::Index k = 0; k < pts.size(); ++k) pts.data()[k] = z(rng);
    data.push_back({"t" + std::to_string(i), pts});
  }
  std::ostringstream out;
  ncgp::write_trajectories_csv(out, data);
  std::istringstream in(out.str());
  const auto back = ncgp::read_trajectories_csv(in);
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(back[i].points == data[i].points);
  }
  CHECK(out.str().rfind("traj_id,step,dim0,dim1,dim2\n", 0) == 0);
}

TEST_CASE("parse errors carry the line number") {
  CHECK(parse_error_line("") == 1);
  CHECK(parse_error_line("id,step,dim0\n") == 1);
  CHECK(parse_error_line("traj_id,step\n") == 1);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,1\na,2,1\n") == 3);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,1\na,1,x\n") == 3);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,1\na,1,1,5\n") == 3);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,1\na,1,2\nb,0,1\n") == 4);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,1\nb,0,1\na,1,1\n") == 4);
  CHECK(parse_error_line("traj_id,step,dim0\na,0,inf\n") == 2);
  CHECK(parse_error_line("traj_id,step,dim0\n") == 1);
}

TEST_CASE("missing file is an I/O error") {
  CHECK_THROWS_AS(ncgp::load_trajectories("/nonexistent/data.csv"), ncgp::IoError);
}

}  // TEST_SUITE
