#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "hopflab/common.hpp"
#include "hopflab/spectral.hpp"

namespace hopflab {

/// Cache root: HOPFLAB_CACHE wins, otherwise a subdirectory of the output.
inline std::filesystem::path cache_dir(const std::filesystem::path& out_dir) {
  if (const char* env = std::getenv("HOPFLAB_CACHE"); env && *env) return env;
  return out_dir / "cache";
}

/// Content key for a discretized eigenproblem. The caller passes whatever
/// uniquely identifies the operator and domain (the canonical config blocks
/// serve); h is folded in at full precision.
inline std::string eigen_cache_key(const std::string& op_desc, const std::string& dom_desc,
                                   double h) {
  char hb[40];
  std::snprintf(hb, sizeof hb, "%.17g", h);
  const std::uint64_t k = detail::fnv1a64(op_desc + "|" + dom_desc + "|" + hb);
  char out[20];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(k));
  return out;
}

namespace detail {

constexpr const char* kEigenMagic = "hopflab-eigenpair-v1";

// Bit-exact text encoding: IEEE payload as a hex integer.
inline std::string hexd(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

inline bool read_hexd(std::istream& in, double& x) {
  std::string tok;
  if (!(in >> tok) || tok.size() != 16) return false;
  std::uint64_t bits = 0;
  for (char c : tok) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = 10 + c - 'a';
    else
      return false;
    bits = (bits << 4) | static_cast<std::uint64_t>(v);
  }
  std::memcpy(&x, &bits, sizeof x);
  return true;
}

}  // namespace detail

inline void store_eigenpair(const std::filesystem::path& dir, const std::string& key,
                            const EigenPair& p) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (key + ".eig");
  const auto tmp = dir / (key + ".eig.tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cache: cannot write " + tmp.string());
    out << detail::kEigenMagic << '\n';
    out << p.phi.size() << ' ' << (p.converged ? 1 : 0) << ' ' << p.iterations << '\n';
    out << detail::hexd(p.lambda) << ' ' << detail::hexd(p.residual) << ' '
        << detail::hexd(p.gap) << ' ' << detail::hexd(p.phi_sup) << ' '
        << detail::hexd(p.phi_phihat) << '\n';
    for (Eigen::Index i = 0; i < p.phi.size(); ++i) out << detail::hexd(p.phi[i]) << '\n';
    for (Eigen::Index i = 0; i < p.phi_hat.size(); ++i) out << detail::hexd(p.phi_hat[i]) << '\n';
    if (!out) throw std::runtime_error("cache: write failure on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Returns the cached pair when the entry exists, parses cleanly and matches
/// the expected node count. Anything else yields nullopt; a malformed entry
/// additionally produces a warning so the recompute is never silent.
inline std::optional<EigenPair> fetch_eigenpair(const std::filesystem::path& dir,
                                                const std::string& key, int expected_nodes,
                                                std::string* warning = nullptr) {
  const auto path = dir / (key + ".eig");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt; // absent: normal first-run state
  auto bad = [&](const std::string& why) -> std::optional<EigenPair> {
    if (warning) *warning = "cache: discarding " + path.string() + " (" + why + ")";
    return std::nullopt;
  };
  std::string magic;
  if (!std::getline(in, magic) || magic != detail::kEigenMagic) return bad("bad header");
  Eigen::Index n = 0;
  int conv = 0, iters = 0;
  if (!(in >> n >> conv >> iters)) return bad("truncated");
  if (n != expected_nodes) return bad("node count mismatch");
  EigenPair p;
  p.converged = conv != 0;
  p.iterations = iters;
  if (!detail::read_hexd(in, p.lambda) || !detail::read_hexd(in, p.residual) ||
      !detail::read_hexd(in, p.gap) || !detail::read_hexd(in, p.phi_sup) ||
      !detail::read_hexd(in, p.phi_phihat))
    return bad("truncated");
  p.phi.resize(n);
  p.phi_hat.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!detail::read_hexd(in, p.phi[i])) return bad("truncated");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!detail::read_hexd(in, p.phi_hat[i])) return bad("truncated");
  if (!std::isfinite(p.lambda) || !p.phi.allFinite() || !p.phi_hat.allFinite())
    return bad("non-finite entries");
  return p;
}

/// Fetch-or-compute wrapper used by the tasks.
inline EigenPair cached_eigenpair(const GridOperator& G, const std::filesystem::path& dir,
                                  const std::string& key, std::string* warning = nullptr) {
  if (auto hit = fetch_eigenpair(dir, key, G.size(), warning)) return *hit;
  EigenPair p = principal_eigenpair(G);
  try {
    store_eigenpair(dir, key, p);
  } catch (const std::exception& e) {
    if (warning && warning->empty()) *warning = std::string("cache: ") + e.what();
  }
  return p;
}

}  // namespace hopflab
