#include "ofspc/moments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "ofspc/errors.hpp"
#include "ofspc/linalg.hpp"
#include "ofspc/parallel.hpp"
#include "ofspc/rng.hpp"

namespace ofspc {
namespace {

constexpr char kMagic[] = "OFSPC-MOM v1\n";
constexpr std::uint64_t kBlockSize = 1024;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_matrix(std::string& out, const MatrixXd& M) {
  put_u64(out, static_cast<std::uint64_t>(M.rows()));
  put_u64(out, static_cast<std::uint64_t>(M.cols()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(M(i, j)));
}

void put_payload(std::string& out, const MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(M(i, j)));
}

MatrixXd standard_error(const MatrixXd& sum, const MatrixXd& sum_sq, std::uint64_t n) {
  if (n < 2) return MatrixXd::Constant(sum.rows(), sum.cols(), std::numeric_limits<double>::infinity());
  const double nd = static_cast<double>(n);
  MatrixXd var = (sum_sq - sum.cwiseProduct(sum) / nd) / (nd - 1.0);
  return (var.cwiseMax(0.0) / nd).cwiseSqrt();
}

struct BlockSums {
  MatrixXd pp, pw, pe;
  MatrixXd pp_sq, pw_sq, pe_sq;
  VectorXd p, p_sq;
};

MatrixXd scalar_matrix(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace

std::string moment_digest(const SystemSpec& spec, int N, const PsiSpec& psi, const SteadyGains& gains) {
  std::string bytes = "ofspc-moments";
  for (const MatrixXd* M : {&spec.A, &spec.B, &spec.C, &spec.Sigma_x0, &spec.Sigma_w, &spec.Sigma_v, &gains.K,
                            &gains.Gamma, &gains.Phi, &gains.P})
    put_matrix(bytes, *M);
  put_u64(bytes, static_cast<std::uint64_t>(N));
  put_u64(bytes, psi.kind == PsiSpec::Kind::Sigmoid ? 0 : 1);
  put_u64(bytes, std::bit_cast<std::uint64_t>(psi.psi_max));
  return sha256_hex(bytes);
}

MomentSet estimate_moments(const SystemSpec& spec, const SteadyGains& gains, const ErrorStack& stack,
                           const PsiSpec& psi, std::uint64_t samples, std::uint64_t seed) {
  if (samples == 0) throw ParameterError("estimate_moments: samples must be positive");
  if (!gains.P.allFinite() || linalg::min_eigenvalue(linalg::symmetrized(gains.P)) <= 0.0)
    throw InputError("estimate_moments: stationary covariance is not positive definite");

  const int d = spec.state_dim();
  const int q = spec.output_dim();
  const int N = static_cast<int>(stack.G.cols()) / d;
  const int qn = q * N;

  const MatrixXd Le = linalg::psd_factor(gains.P);
  const MatrixXd Lw = linalg::psd_factor(spec.Sigma_w);
  const MatrixXd Lv = linalg::psd_factor(spec.Sigma_v);

  MatrixXd Cstack = MatrixXd::Zero((N + 1) * q, (N + 1) * d);
  for (int i = 0; i <= N; ++i) Cstack.block(i * q, i * d, q, d) = spec.C;
  // innovation stack = C F e + C G w + (I - C H) v; only offsets 1..N are kept.
  const MatrixXd Me = (Cstack * stack.F).bottomRows(qn);
  const MatrixXd Mw = (Cstack * stack.G).bottomRows(qn);
  const MatrixXd Mv = (MatrixXd::Identity((N + 1) * q, (N + 1) * q) - Cstack * stack.H).bottomRows(qn);

  const std::uint64_t blocks = (samples + kBlockSize - 1) / kBlockSize;
  std::vector<BlockSums> partial(blocks);

  parallel_for(blocks, [&](std::size_t b) {
    const std::uint64_t begin = b * kBlockSize;
    const auto count = static_cast<Eigen::Index>(std::min(kBlockSize, samples - begin));
    MatrixXd E(d, count), W(N * d, count), V((N + 1) * q, count);
    for (Eigen::Index s = 0; s < count; ++s) {
      GaussianStream g(stream_seed(seed, {begin + static_cast<std::uint64_t>(s)}));
      E.col(s) = g.next_correlated(Le);
      for (int k = 0; k < N; ++k) W.col(s).segment(k * d, d) = g.next_correlated(Lw);
      for (int k = 0; k <= N; ++k) V.col(s).segment(k * q, q) = g.next_correlated(Lv);
    }
    MatrixXd Psi = Me * E + Mw * W + Mv * V;
    for (Eigen::Index s = 0; s < count; ++s) Psi.col(s) = psi_apply(psi, Psi.col(s));

    const MatrixXd Psi2 = Psi.cwiseProduct(Psi);
    BlockSums& out = partial[b];
    out.pp = Psi * Psi.transpose();
    out.pw = Psi * W.transpose();
    out.pe = Psi * E.transpose();
    out.pp_sq = Psi2 * Psi2.transpose();
    out.pw_sq = Psi2 * W.cwiseProduct(W).transpose();
    out.pe_sq = Psi2 * E.cwiseProduct(E).transpose();
    out.p = Psi.rowwise().sum();
    out.p_sq = Psi2.rowwise().sum();
  });

  BlockSums total = partial.front();
  for (std::size_t b = 1; b < partial.size(); ++b) {
    total.pp += partial[b].pp;
    total.pw += partial[b].pw;
    total.pe += partial[b].pe;
    total.pp_sq += partial[b].pp_sq;
    total.pw_sq += partial[b].pw_sq;
    total.pe_sq += partial[b].pe_sq;
    total.p += partial[b].p;
    total.p_sq += partial[b].p_sq;
  }

  const double n = static_cast<double>(samples);
  MomentSet ms;
  ms.Sigma_psi = linalg::symmetrized(total.pp / n);
  ms.Sigma_psi_w = total.pw / n;
  ms.Sigma_e_psi = total.pe / n;
  ms.se_psi = standard_error(total.pp, total.pp_sq, samples);
  ms.se_psi_w = standard_error(total.pw, total.pw_sq, samples);
  ms.se_e_psi = standard_error(total.pe, total.pe_sq, samples);
  ms.psi_mean = total.p / n;
  ms.psi_mean_se = standard_error(total.p, total.p_sq, samples);
  ms.samples = samples;
  ms.seed = seed;
  ms.spec_digest = moment_digest(spec, N, psi, gains);
  return ms;
}

BetaEstimate estimate_beta(const SystemSpec& spec, const SteadyGains& gains, int N_r, std::uint64_t samples,
                           std::uint64_t seed) {
  if (N_r < 1) throw ParameterError("estimate_beta: N_r must be positive");
  if (samples == 0) throw ParameterError("estimate_beta: samples must be positive");
  const int d = spec.state_dim();
  const int q = spec.output_dim();
  const ErrorStack stack = error_stack(gains, spec, N_r);

  const MatrixXd Le = linalg::psd_factor(gains.P);
  const MatrixXd Lw = linalg::psd_factor(spec.Sigma_w);
  const MatrixXd Lv = linalg::psd_factor(spec.Sigma_v);

  // Xi = sum_k A^{N_r-1-k} K (C A e_{t+k} + C w_{t+k} + v_{t+k+1}).
  std::vector<MatrixXd> weight(N_r);
  for (int k = 0; k < N_r; ++k) weight[k] = linalg::matrix_power(spec.A, N_r - 1 - k) * gains.K;
  const MatrixXd CA = spec.C * spec.A;

  const std::uint64_t blocks = (samples + kBlockSize - 1) / kBlockSize;
  std::vector<std::pair<double, double>> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::uint64_t begin = b * kBlockSize;
    const std::uint64_t count = std::min(kBlockSize, samples - begin);
    double sum = 0.0, sum_sq = 0.0;
    VectorXd w((N_r) * d), v((N_r + 1) * q);
    for (std::uint64_t s = 0; s < count; ++s) {
      GaussianStream g(stream_seed(seed, {0xBE7Au, begin + s}));
      const VectorXd e0 = g.next_correlated(Le);
      for (int k = 0; k < N_r; ++k) w.segment(k * d, d) = g.next_correlated(Lw);
      for (int k = 0; k <= N_r; ++k) v.segment(k * q, q) = g.next_correlated(Lv);
      const VectorXd e = stack.F * e0 + stack.G * w - stack.H * v;
      VectorXd xi = VectorXd::Zero(d);
      for (int k = 0; k < N_r; ++k)
        xi += weight[k] * (CA * e.segment(k * d, d) + spec.C * w.segment(k * d, d) + v.segment((k + 1) * q, q));
      const double norm = xi.norm();
      sum += norm;
      sum_sq += norm * norm;
    }
    partial[b] = {sum, sum_sq};
  });

  double sum = 0.0, sum_sq = 0.0;
  for (const auto& [s, s2] : partial) {
    sum += s;
    sum_sq += s2;
  }
  BetaEstimate out;
  out.value = sum / static_cast<double>(samples);
  out.standard_error = standard_error(scalar_matrix(sum), scalar_matrix(sum_sq), samples)(0, 0);
  return out;
}

namespace {

// Payload order; beta values travel as 1 x 1 matrices so they roundtrip bitwise.
struct PayloadEntry {
  std::string name;
  MatrixXd value;
};

std::vector<PayloadEntry> payload_entries(const MomentSet& ms) {
  return {{"Sigma_psi", ms.Sigma_psi},     {"Sigma_psi_w", ms.Sigma_psi_w}, {"Sigma_e_psi", ms.Sigma_e_psi},
          {"se_psi", ms.se_psi},           {"se_psi_w", ms.se_psi_w},       {"se_e_psi", ms.se_e_psi},
          {"psi_mean", ms.psi_mean},       {"psi_mean_se", ms.psi_mean_se}, {"beta_hat", scalar_matrix(ms.beta_hat)},
          {"beta_se", scalar_matrix(ms.beta_se)}};
}

}  // namespace

void write_moments(const MomentSet& ms, const std::filesystem::path& path) {
  std::string payload;
  nlohmann::json matrices = nlohmann::json::array();
  for (const auto& entry : payload_entries(ms)) {
    put_payload(payload, entry.value);
    matrices.push_back({{"name", entry.name}, {"rows", entry.value.rows()}, {"cols", entry.value.cols()}});
  }
  nlohmann::json header = {{"format", "OFSPC-MOM"},
                           {"version", 1},
                           {"byte_order", "little"},
                           {"samples", ms.samples},
                           {"seed", ms.seed},
                           {"spec_digest", ms.spec_digest},
                           {"payload_sha256", sha256_hex(payload)},
                           {"matrices", matrices}};
  const std::string header_text = header.dump(2);

  std::string file = kMagic;
  put_u64(file, header_text.size());
  file += header_text;
  file += payload;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CacheError(CacheError::Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw CacheError(CacheError::Kind::Io, "write failed: " + path.string());
}

MomentSet read_moments(const std::filesystem::path& path, const std::optional<std::string>& expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError(CacheError::Kind::Io, "cannot open " + path.string());
  const std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw CacheError(CacheError::Kind::Io, "read failed: " + path.string());

  const std::size_t magic_len = sizeof(kMagic) - 1;
  if (file.size() < magic_len + 8 || file.compare(0, magic_len, kMagic) != 0)
    throw CacheError(CacheError::Kind::Format, path.string() + ": not a moments cache");
  const auto* bytes = reinterpret_cast<const unsigned char*>(file.data());
  const std::uint64_t header_len = get_u64(bytes + magic_len);
  const std::size_t payload_at = magic_len + 8 + header_len;
  if (header_len > file.size() || payload_at > file.size())
    throw CacheError(CacheError::Kind::Format, path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(file.substr(magic_len + 8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(CacheError::Kind::Format, path.string() + ": bad header: " + e.what());
  }

  MomentSet ms;
  std::string payload_hash;
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> layout;
  try {
    ms.samples = header.at("samples").get<std::uint64_t>();
    ms.seed = header.at("seed").get<std::uint64_t>();
    ms.spec_digest = header.at("spec_digest").get<std::string>();
    payload_hash = header.at("payload_sha256").get<std::string>();
    for (const auto& m : header.at("matrices"))
      layout.emplace_back(m.at("name").get<std::string>(), m.at("rows").get<Eigen::Index>(),
                          m.at("cols").get<Eigen::Index>());
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(CacheError::Kind::Format, path.string() + ": bad header: " + e.what());
  }

  const std::string payload = file.substr(payload_at);
  if (sha256_hex(payload) != payload_hash)
    throw CacheError(CacheError::Kind::Checksum, path.string() + ": payload checksum mismatch");

  std::size_t offset = 0;
  const auto* pbytes = reinterpret_cast<const unsigned char*>(payload.data());
  auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    if (rows < 0 || cols < 0 || offset + 8 * static_cast<std::size_t>(rows * cols) > payload.size())
      throw CacheError(CacheError::Kind::Format, path.string() + ": payload shorter than header claims");
    MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        M(i, j) = std::bit_cast<double>(get_u64(pbytes + offset));
        offset += 8;
      }
    return M;
  };

  for (const auto& [name, rows, cols] : layout) {
    MatrixXd M = take(rows, cols);
    if (name == "Sigma_psi") ms.Sigma_psi = M;
    else if (name == "Sigma_psi_w") ms.Sigma_psi_w = M;
    else if (name == "Sigma_e_psi") ms.Sigma_e_psi = M;
    else if (name == "se_psi") ms.se_psi = M;
    else if (name == "se_psi_w") ms.se_psi_w = M;
    else if (name == "se_e_psi") ms.se_e_psi = M;
    else if (name == "psi_mean") ms.psi_mean = M.col(0);
    else if (name == "psi_mean_se") ms.psi_mean_se = M.col(0);
    else if (name == "beta_hat") ms.beta_hat = M(0, 0);
    else if (name == "beta_se") ms.beta_se = M(0, 0);
    else throw CacheError(CacheError::Kind::Format, path.string() + ": unknown matrix " + name);
  }
  if (offset != payload.size())
    throw CacheError(CacheError::Kind::Format, path.string() + ": trailing bytes after payload");

  if (expected_digest && *expected_digest != ms.spec_digest)
    throw CacheError(CacheError::Kind::Stale,
                     path.string() + ": moments were estimated for a different system; re-run `ofspc moments`");
  return ms;
}

MomentSet cache_roundtrip(const MomentSet& ms, const std::filesystem::path& path) {
  write_moments(ms, path);
  return read_moments(path, ms.spec_digest);
}

}  // namespace ofspc
