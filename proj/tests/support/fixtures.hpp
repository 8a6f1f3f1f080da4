#pragma once

#include <cstdint>
#include <random>

#include "ofspc/control_loop.hpp"
#include "ofspc/model.hpp"
#include "ofspc/qp_solver.hpp"

namespace ofspc::testing {

/// The 4-state example: a stable mode, an integrator and a quarter-turn rotation.
SystemSpec example_spec(double u_max = 1.0);

/// Scalar plant x+ = a x + b u + w, y = c x + v.
SystemSpec scalar_spec(double a, double b, double c, double sigma_w, double sigma_v, double sigma_x0 = 1.0, int N = 1);

SimConfig example_sim_config(int paths, int steps, std::uint64_t seed);

/// Moments for cfg with the given sample count (cached per process).
const MomentSet& example_moments(std::uint64_t samples = 100000, std::uint64_t seed = 7);

MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols);
MatrixXd random_spd(std::mt19937_64& rng, int n, double floor = 0.1);
VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0);

/// QP with a known optimum: rows in a random active set (at most
/// max_active) sit on a bound with a multiplier of the right sign, the rest
/// are strictly slack, and q makes z_star stationary.
struct PlantedQp {
  QpProblem p;
  VectorXd z_star;
  int active = 0;
};
PlantedQp planted_qp(std::mt19937_64& rng, int n, int c, int max_active);

}  // namespace ofspc::testing
