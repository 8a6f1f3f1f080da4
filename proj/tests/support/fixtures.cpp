#include "fixtures.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <utility>

#include "ofspc/moments.hpp"

namespace ofspc::testing {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

SystemSpec example_spec(double u_max) {
  SystemSpec s;
  s.A = MatrixXd::Zero(4, 4);
  s.A(0, 0) = 0.9;
  s.A(1, 1) = 1.0;
  s.A(2, 3) = -1.0;
  s.A(3, 2) = 1.0;
  s.B = MatrixXd::Zero(4, 1);
  s.B(1, 0) = 1.0;
  s.B(3, 0) = 1.0;
  s.C = MatrixXd::Identity(4, 4);
  s.Sigma_x0 = MatrixXd::Identity(4, 4);
  s.Sigma_w = MatrixXd::Identity(4, 4);
  s.Sigma_v = MatrixXd::Identity(4, 4);
  s.N = 5;
  s.Q.assign(5, MatrixXd::Identity(4, 4));
  s.Q_N = MatrixXd::Identity(4, 4);
  s.R.assign(5, MatrixXd::Identity(1, 1));
  s.u_max = u_max;
  return s;
}

SystemSpec scalar_spec(double a, double b, double c, double sigma_w, double sigma_v, double sigma_x0, int N) {
  SystemSpec s;
  s.A = MatrixXd::Constant(1, 1, a);
  s.B = MatrixXd::Constant(1, 1, b);
  s.C = MatrixXd::Constant(1, 1, c);
  s.Sigma_x0 = MatrixXd::Constant(1, 1, sigma_x0);
  s.Sigma_w = MatrixXd::Constant(1, 1, sigma_w);
  s.Sigma_v = MatrixXd::Constant(1, 1, sigma_v);
  s.N = N;
  s.Q.assign(N, MatrixXd::Identity(1, 1));
  s.Q_N = MatrixXd::Identity(1, 1);
  s.R.assign(N, MatrixXd::Identity(1, 1));
  s.u_max = 1.0;
  return s;
}

SimConfig example_sim_config(int paths, int steps, std::uint64_t seed) {
  SimConfig cfg;
  cfg.spec = example_spec();
  cfg.psi = PsiSpec{PsiSpec::Kind::Sigmoid, 1.0};
  cfg.paths = paths;
  cfg.steps = steps;
  cfg.seed = seed;
  cfg.u_max_sweep = {0.1, 0.5, 1, 2, 3, 4, 5, 10, 20};
  return cfg;
}

const MomentSet& example_moments(std::uint64_t samples, std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::pair<std::uint64_t, std::uint64_t>, MomentSet> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(samples, seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const SimConfig cfg = example_sim_config(1, 1, 1);
    const auto [gains, stack] = filter_setup(cfg);
    it = cache.emplace(key, estimate_moments(cfg.spec, gains, stack, cfg.psi, samples, seed)).first;
  }
  return it->second;
}

MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = n(rng);
  return M;
}

MatrixXd random_spd(std::mt19937_64& rng, int n, double floor) {
  const MatrixXd G = random_matrix(rng, n, n);
  return G * G.transpose() / n + floor * MatrixXd::Identity(n, n);
}

VectorXd random_vector(std::mt19937_64& rng, int n, double scale) { return scale * random_matrix(rng, n, 1).col(0); }

PlantedQp planted_qp(std::mt19937_64& rng, int n, int c, int max_active) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PlantedQp out;
  QpProblem& p = out.p;
  p.P = testing::random_spd(rng, n, 0.2);
  p.A = testing::random_matrix(rng, c, n);
  out.z_star = testing::random_vector(rng, n);
  const VectorXd Az = p.A * out.z_star;
  VectorXd y = VectorXd::Zero(c);
  p.l.resize(c);
  p.u.resize(c);
  std::vector<int> order(c);
  for (int i = 0; i < c; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int k = std::min({max_active, n, c, static_cast<int>(unit(rng) * (max_active + 1))});
  for (int j = 0; j < c; ++j) {
    const int i = order[j];
    const double kind = unit(rng);
    if (j < k) {
      if (kind < 0.1) {
        p.l(i) = p.u(i) = Az(i);
        y(i) = unit(rng) - 0.5;
      } else if (kind < 0.55) {
        p.u(i) = Az(i);
        p.l(i) = kind < 0.3 ? -kInf : Az(i) - 0.5 - unit(rng);
        y(i) = 0.1 + unit(rng);
      } else {
        p.l(i) = Az(i);
        p.u(i) = kind < 0.8 ? kInf : Az(i) + 0.5 + unit(rng);
        y(i) = -0.1 - unit(rng);
      }
    } else {
      p.l(i) = kind < 0.2 ? -kInf : Az(i) - 0.1 - unit(rng);
      p.u(i) = kind > 0.8 ? kInf : Az(i) + 0.1 + unit(rng);
    }
  }
  p.q = -p.P * out.z_star - p.A.transpose() * y;
  out.active = k;
  return out;
}

}  // namespace ofspc::testing
