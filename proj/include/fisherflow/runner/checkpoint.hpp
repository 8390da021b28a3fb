#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fisherflow/action.hpp"
#include "fisherflow/dynamics.hpp"
#include "fisherflow/version.hpp"

namespace fisherflow::runner {

/// Checkpoint file layout (all integers little-endian):
///   bytes 0..7   magic "FFCKPT01"
///   bytes 8..15  uint64 header length H
///   bytes 16..   H bytes of JSON header
///   then         raw float64 little-endian payload
/// Wave payload: re, im interleaved per site. Hydro payload: p then s, with
/// the phase's linear coefficients in the header.
inline constexpr char checkpoint_magic[8] = {'F', 'F', 'C', 'K', 'P', 'T', '0', '1'};

struct CheckpointData {
  std::string kind; // "wave" | "hydro"
  std::vector<double> payload;
  std::vector<double> s_linear;
  double time = 0.0;
  long step = 0;
  std::uint64_t grid_hash = 0;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline void write_all(std::ofstream& os, const void* data, std::size_t len) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

inline nlohmann::ordered_json checkpoint_header(const CheckpointData& d, std::size_t count) {
  nlohmann::ordered_json h;
  h["version"] = version_string;
  h["kind"] = d.kind;
  h["grid_hash"] = d.grid_hash;
  h["config_hash"] = d.config_hash;
  h["time"] = d.time;
  h["step"] = d.step;
  h["count"] = count;
  h["layout"] = "float64-le";
  if (!d.s_linear.empty()) h["s_linear"] = d.s_linear;
  return h;
}

} // namespace detail

inline void save_checkpoint_raw(const std::string& path, const CheckpointData& d) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), errc::io, "checkpoint: cannot open " + path + " for writing");
  detail::write_all(os, checkpoint_magic, sizeof checkpoint_magic);
  const std::string header = detail::checkpoint_header(d, d.payload.size()).dump();
  const std::uint64_t hlen = header.size();
  detail::write_all(os, &hlen, sizeof hlen);
  detail::write_all(os, header.data(), header.size());
  detail::write_all(os, d.payload.data(), d.payload.size() * sizeof(double));
  require(os.good(), errc::io, "checkpoint: write failed for " + path);
}

inline void save_checkpoint(const std::string& path, const ComplexField& psi, double time,
                            long step, std::uint64_t config_hash) {
  CheckpointData d;
  d.kind = "wave";
  d.time = time;
  d.step = step;
  d.grid_hash = psi.grid()->hash();
  d.config_hash = config_hash;
  d.payload.resize(2 * psi.size());
  // std::complex<double> guarantees array-of-double layout
  std::memcpy(d.payload.data(), reinterpret_cast<const double*>(psi.values().data()),
              d.payload.size() * sizeof(double));
  save_checkpoint_raw(path, d);
}

inline void save_checkpoint(const std::string& path, const HydroState& st, double time, long step,
                            std::uint64_t config_hash) {
  CheckpointData d;
  d.kind = "hydro";
  d.time = time;
  d.step = step;
  d.grid_hash = st.p.grid()->hash();
  d.config_hash = config_hash;
  d.s_linear = st.s_linear;
  d.payload.reserve(2 * st.p.size());
  d.payload.insert(d.payload.end(), st.p.values().begin(), st.p.values().end());
  d.payload.insert(d.payload.end(), st.s.values().begin(), st.s.values().end());
  save_checkpoint_raw(path, d);
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), errc::io, "checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  require(is.gcount() == sizeof magic && std::memcmp(magic, checkpoint_magic, 8) == 0, errc::io,
          "checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  require(is.gcount() == sizeof hlen && hlen > 0 && hlen < (1ull << 20), errc::io,
          "checkpoint: bad header length in " + path);
  std::string header(hlen, '\0');
  is.read(header.data(), static_cast<std::streamsize>(hlen));
  require(static_cast<std::uint64_t>(is.gcount()) == hlen, errc::io,
          "checkpoint: truncated header in " + path);
  nlohmann::ordered_json h;
  try {
    h = nlohmann::ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::io, std::string("checkpoint: invalid header JSON: ") + e.what());
  }
  CheckpointData d;
  d.kind = h.at("kind").get<std::string>();
  d.grid_hash = h.at("grid_hash").get<std::uint64_t>();
  d.config_hash = h.at("config_hash").get<std::uint64_t>();
  d.time = h.at("time").get<double>();
  d.step = h.at("step").get<long>();
  require(h.at("layout").get<std::string>() == "float64-le", errc::io,
          "checkpoint: unsupported payload layout");
  if (h.contains("s_linear")) d.s_linear = h.at("s_linear").get<std::vector<double>>();
  const auto count = h.at("count").get<std::size_t>();
  d.payload.resize(count);
  is.read(reinterpret_cast<char*>(d.payload.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  require(static_cast<std::size_t>(is.gcount()) == count * sizeof(double), errc::io,
          "checkpoint: truncated payload in " + path);
  return d;
}

inline ComplexField wave_from_checkpoint(const CheckpointData& d, const GridPtr& grid) {
  require(d.kind == "wave", errc::io, "checkpoint: expected a wave state");
  require(d.grid_hash == grid->hash(), errc::io,
          "checkpoint: grid hash mismatch (checkpoint written for a different grid)");
  require(d.payload.size() == 2 * grid->size(), errc::io, "checkpoint: payload size mismatch");
  ComplexField psi(grid);
  std::memcpy(reinterpret_cast<double*>(psi.values().data()), d.payload.data(),
              d.payload.size() * sizeof(double));
  return psi;
}

inline HydroState hydro_from_checkpoint(const CheckpointData& d, const GridPtr& grid) {
  require(d.kind == "hydro", errc::io, "checkpoint: expected a hydro state");
  require(d.grid_hash == grid->hash(), errc::io,
          "checkpoint: grid hash mismatch (checkpoint written for a different grid)");
  require(d.payload.size() == 2 * grid->size(), errc::io, "checkpoint: payload size mismatch");
  RealField p(grid), s(grid);
  std::copy(d.payload.begin(), d.payload.begin() + grid->size(), p.values().begin());
  std::copy(d.payload.begin() + grid->size(), d.payload.end(), s.values().begin());
  HydroState st{std::move(p), std::move(s), d.s_linear};
  if (st.s_linear.empty()) st.s_linear.assign(grid->ndim(), 0.0);
  return st;
}

} // namespace fisherflow::runner
