#include "gaitsyn/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gaitsyn {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Provenance Provenance::make(const std::string& solver, uint64_t config_hash, uint64_t seed) {
  Provenance p;
  p.solver = solver;
  p.config_hash = config_hash;
  p.seed = seed;
  if (const char* d = std::getenv("GAITSYN_DATE")) p.date = d;
  return p;
}

Json to_json(const Provenance& p) {
  return Json{{"solver", p.solver},
              {"date", p.date},
              {"version", p.version},
              {"config_hash", p.config_hash},
              {"seed", p.seed}};
}

Provenance provenance_from_json(const Json& j) {
  Provenance p;
  p.solver = j.value("solver", "");
  p.date = j.value("date", "");
  p.version = j.value("version", "");
  p.config_hash = j.value("config_hash", 0ull);
  p.seed = j.value("seed", 0ull);
  return p;
}

Json vec_to_json(const VecX& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VecX vec_from_json(const Json& j) {
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

Json mat_to_json(const MatX& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

MatX mat_from_json(const Json& j) {
  const int r = static_cast<int>(j.size());
  if (r == 0) return MatX(0, 0);
  const int c = static_cast<int>(j[0].size());
  MatX m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

void write_text_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace gaitsyn
