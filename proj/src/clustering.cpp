#include "delichain/clustering.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace delichain {

std::map<std::string, std::vector<MentionRef>> PredictedClustering::clusters() const {
  std::map<std::string, std::vector<MentionRef>> out;
  for (const auto& [m, label] : assignments) out[label].push_back(m);
  return out;
}

void write_clustering(const PredictedClustering& c, std::ostream& out) {
  for (const auto& [m, label] : c.assignments) {
    nlohmann::ordered_json rec;
    rec["dialogue_id"] = m.dialogue_id;
    rec["index"] = m.index;
    rec["cluster_id"] = label;
    auto it = c.labels.find(m);
    rec["label"] = std::string(1, role_code(it == c.labels.end() ? Role::Neither : it->second));
    out << rec.dump() << '\n';
  }
}

PredictedClustering read_clustering(std::istream& in) {
  PredictedClustering c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", lineno);
    if (j.contains("format")) continue;
    try {
      const std::string cluster = j.value("cluster_id", std::string());
      if (cluster.empty()) continue;
      MentionRef m{j.at("dialogue_id").get<std::string>(), j.at("index").get<int>()};
      if (!c.assignments.emplace(m, cluster).second)
        throw ParseError("mention " + to_string(m) + " assigned twice", lineno);
      if (j.contains("label")) c.labels.emplace(m, role_from_code(j["label"].get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), lineno);
    }
  }
  return c;
}

PredictedClustering load_clustering(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open clustering '" + path.string() + "'");
  return read_clustering(in);
}

}  // namespace delichain
