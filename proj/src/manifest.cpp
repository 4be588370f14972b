#include "nnpda/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nnpda {

std::string digest_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["config"] = config;
  j["dataset_path"] = dataset_path;
  j["dataset_digest"] = dataset_digest;
  j["model_path"] = model_path;
  j["metrics_path"] = metrics_path;
  j["epochs"] = epochs;
  j["augment_rounds"] = augment_rounds;
  j["converged"] = converged;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::parse(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    j.at("tool_version").get_to(m.tool_version);
    j.at("seed").get_to(m.seed);
    j.at("config").get_to(m.config);
    j.at("dataset_path").get_to(m.dataset_path);
    j.at("dataset_digest").get_to(m.dataset_digest);
    j.at("model_path").get_to(m.model_path);
    j.at("metrics_path").get_to(m.metrics_path);
    j.at("epochs").get_to(m.epochs);
    j.at("augment_rounds").get_to(m.augment_rounds);
    j.at("converged").get_to(m.converged);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << to_json();
}

}  // namespace nnpda
