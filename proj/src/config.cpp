#include "ofspc/config.hpp"

#include <fstream>
#include <sstream>

#include "ofspc/errors.hpp"

namespace ofspc {
namespace {

using nlohmann::json;

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) throw ConfigError(std::string("missing field \"") + key + "\"");
  return *it;
}

MatrixXd to_matrix(const json& value, const std::string& name) {
  if (!value.is_array() || value.empty()) throw ConfigError("field \"" + name + "\" must be a non-empty nested array");
  const auto rows = static_cast<Eigen::Index>(value.size());
  if (!value.front().is_array()) throw ConfigError("field \"" + name + "\" must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(value.front().size());
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = value[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError("field \"" + name + "\": row " + std::to_string(i) + " has the wrong length");
    for (Eigen::Index j = 0; j < cols; ++j) {
      const json& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw ConfigError("field \"" + name + "\": entry (" + std::to_string(i) + "," +
                                            std::to_string(j) + ") is not a number");
      M(i, j) = v.get<double>();
    }
  }
  return M;
}

/// Either one matrix (broadcast) or a list of N matrices.
std::vector<MatrixXd> stage_matrices(const json& value, const std::string& name, int N) {
  const bool is_list = value.is_array() && !value.empty() && value.front().is_array() && !value.front().empty() &&
                       value.front().front().is_array();
  if (!is_list) return std::vector<MatrixXd>(N, to_matrix(value, name));
  if (static_cast<int>(value.size()) != N)
    throw ConfigError("field \"" + name + "\" lists " + std::to_string(value.size()) + " matrices, expected N = " +
                      std::to_string(N));
  std::vector<MatrixXd> out;
  for (std::size_t k = 0; k < value.size(); ++k) out.push_back(to_matrix(value[k], name + "[" + std::to_string(k) + "]"));
  return out;
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig cfg;
  SimConfig& sim = cfg.sim;
  SystemSpec& spec = sim.spec;

  const json& N = require(doc, "N");
  if (!N.is_number_integer() || N.get<int>() < 1) throw ConfigError("field \"N\" must be an integer >= 1");
  spec.N = N.get<int>();
  spec.A = to_matrix(require(doc, "A"), "A");
  spec.B = to_matrix(require(doc, "B"), "B");
  spec.C = to_matrix(require(doc, "C"), "C");
  spec.Sigma_x0 = to_matrix(require(doc, "Sigma_x0"), "Sigma_x0");
  spec.Sigma_w = to_matrix(require(doc, "Sigma_w"), "Sigma_w");
  spec.Sigma_v = to_matrix(require(doc, "Sigma_v"), "Sigma_v");
  spec.Q = stage_matrices(require(doc, "Q"), "Q", spec.N);
  spec.Q_N = to_matrix(require(doc, "Q_N"), "Q_N");
  spec.R = stage_matrices(require(doc, "R"), "R", spec.N);

  const json& u = require(doc, "u_max");
  if (u.is_number()) {
    sim.u_max_sweep = {u.get<double>()};
  } else if (u.is_array() && !u.empty()) {
    for (const auto& v : u) {
      if (!v.is_number()) throw ConfigError("field \"u_max\" must hold numbers");
      sim.u_max_sweep.push_back(v.get<double>());
    }
  } else {
    throw ConfigError("field \"u_max\" must be a number or a non-empty list");
  }
  for (double v : sim.u_max_sweep)
    if (!(v > 0.0)) throw ConfigError("field \"u_max\" must be positive");
  spec.u_max = sim.u_max_sweep.front();

  check_dimensions(spec);

  sim.N_r = get_or<int>(doc, "N_r", 0);
  if (sim.N_r < 0) throw ConfigError("field \"N_r\" must be positive or null");
  sim.r = get_or<double>(doc, "r", 1.0);
  sim.epsilon = get_or<double>(doc, "epsilon", 0.1);
  sim.zeta_fraction = get_or<double>(doc, "zeta_fraction", 0.9);
  const std::string psi = get_or<std::string>(doc, "psi", "sigmoid");
  if (psi == "sigmoid")
    sim.psi.kind = PsiSpec::Kind::Sigmoid;
  else if (psi == "saturation")
    sim.psi.kind = PsiSpec::Kind::Saturation;
  else
    throw ConfigError("field \"psi\" must be \"sigmoid\" or \"saturation\"");
  sim.psi.psi_max = get_or<double>(doc, "psi_max", 1.0);
  if (!(sim.psi.psi_max > 0.0)) throw ConfigError("field \"psi_max\" must be positive");
  sim.steps = get_or<int>(doc, "steps", 90);
  sim.paths = get_or<int>(doc, "paths", 100);
  sim.seed = get_or<std::uint64_t>(doc, "seed", 1);
  if (sim.steps < 1 || sim.paths < 1) throw ConfigError("fields \"steps\" and \"paths\" must be positive");
  if (!(sim.r > 0.0)) throw ConfigError("field \"r\" must be positive");
  if (sim.epsilon < 0.0) throw ConfigError("field \"epsilon\" must be non-negative");
  if (!(sim.zeta_fraction > 0.0 && sim.zeta_fraction < 1.0))
    throw ConfigError("field \"zeta_fraction\" must lie in (0, 1)");

  cfg.moment_samples = get_or<std::uint64_t>(doc, "moment_samples", 100000);
  cfg.moment_seed = get_or<std::uint64_t>(doc, "moment_seed", sim.seed);
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  try {
    cfg = parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  cfg.source = path;
  return cfg;
}

std::string version_string() { return "0.1.0"; }

nlohmann::json RunManifest::to_json() const {
  json j = {{"artifact_version", version_string()},
            {"command", command},
            {"config_path", config_path.string()},
            {"N", N},
            {"N_r", N_r},
            {"kappa", kappa},
            {"d_o", d_o},
            {"d_s", d_s},
            {"r", r},
            {"epsilon", epsilon},
            {"zeta_fraction", zeta_fraction},
            {"psi", psi_kind},
            {"psi_max", psi_max},
            {"paths", paths},
            {"steps", steps},
            {"seed", seed},
            {"moment_samples", moment_samples},
            {"moment_seed", moment_seed},
            {"moments_digest", moments_digest},
            {"ms_statistic", ms_statistic},
            {"warmup_steps", warmup_steps}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

RunManifest make_manifest(const std::string& command, const RunConfig& cfg, const Experiment* ex) {
  RunManifest m;
  m.command = command;
  m.config_path = cfg.source;
  m.N = cfg.sim.spec.N;
  m.N_r = cfg.sim.N_r;
  m.r = cfg.sim.r;
  m.epsilon = cfg.sim.epsilon;
  m.zeta_fraction = cfg.sim.zeta_fraction;
  m.psi_kind = cfg.sim.psi.kind == PsiSpec::Kind::Sigmoid ? "sigmoid" : "saturation";
  m.psi_max = cfg.sim.psi.psi_max;
  m.paths = cfg.sim.paths;
  m.steps = cfg.sim.steps;
  m.seed = cfg.sim.seed;
  m.moment_samples = cfg.moment_samples;
  m.moment_seed = cfg.moment_seed;
  m.warmup_steps = cfg.sim.warmup_steps();
  if (ex) {
    m.N_r = ex->N_r;
    m.kappa = ex->dec.kappa;
    m.d_o = ex->dec.d_o;
    m.d_s = ex->dec.d_s;
    m.moments_digest = ex->moments.spec_digest;
    m.moment_samples = ex->moments.samples;
    m.moment_seed = ex->moments.seed;
  }
  return m;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
}

}  // namespace ofspc
