#pragma once

#include <stdexcept>
#include <string>

namespace fisherflow {

enum class errc {
  validation,      // bad configuration or arguments
  node_breach,     // density fell below the admissible floor
  non_convergence, // iterative solve exhausted its budget
  numerical,       // other runtime numerical failure
  io,              // file format or filesystem problem
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::validation: return "validation";
    case errc::node_breach: return "node_breach";
    case errc::non_convergence: return "non_convergence";
    case errc::numerical: return "numerical";
    case errc::io: return "io";
  }
  return "unknown";
}

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

} // namespace fisherflow
