#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cryptovit {

inline constexpr const char* kVersion = "0.1.0";

enum class Errc {
  io_missing,
  io_unsupported,
  io_corrupt,
  geometry,
  config,
  validation,
  numeric,
};

// Single exception type; the code distinguishes error families for tests
// and for stage-tagged diagnostics in the harness.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

std::string to_hex(const uint8_t* data, size_t n);
std::vector<uint8_t> from_hex(std::string_view hex);

// FNV-1a. Used as a stable identity stamp for configs and manifests, not as
// a cryptographic hash.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64(std::string_view s);

// splitmix64 step; x is the evolving state.
uint64_t splitmix64(uint64_t& x);

// One documented sub-seed rule for the whole artifact: every stage that
// needs randomness derives its own seed as sub_seed(root, "stage-name").
uint64_t sub_seed(uint64_t root_seed, std::string_view domain);

}  // namespace cryptovit
