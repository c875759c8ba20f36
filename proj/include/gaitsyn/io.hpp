#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "gaitsyn/linalg.hpp"

namespace gaitsyn {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

uint64_t fnv1a(const std::string& s);

// Provenance block carried by every artifact. The date is taken from the
// GAITSYN_DATE environment variable when set and left empty otherwise, so
// that identical configs and seeds produce byte-identical files.
struct Provenance {
  std::string solver;
  std::string date;
  std::string version = kVersion;
  uint64_t config_hash = 0;
  uint64_t seed = 0;

  static Provenance make(const std::string& solver, uint64_t config_hash, uint64_t seed);
};

Json to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);

Json vec_to_json(const VecX& v);
VecX vec_from_json(const Json& j);
Json mat_to_json(const MatX& m);
MatX mat_from_json(const Json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace gaitsyn
