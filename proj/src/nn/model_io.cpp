#include "golfsig/nn/model_io.hpp"

#include <fstream>

namespace golfsig::nn {

void save_model(const std::filesystem::path& dir, const std::string& kind, const Json& config,
                const ParameterStore& params, bool single_precision) {
  params.save(dir, single_precision);
  std::ofstream out(dir / "model.json");
  if (!out) throw FormatError("cannot write " + (dir / "model.json").string());
  out << Json{{"kind", kind}, {"config", config}}.dump(2) << "\n";
}

LoadedModel load_model(const std::filesystem::path& dir, const std::string& kind) {
  const auto path = dir / "model.json";
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.contains("kind") || j["kind"] != kind)
    throw FormatError(path.string() + ": expected a " + kind + " checkpoint, found " + j.value("kind", "nothing"));
  return {j.at("config"), ParameterStore::load(dir)};
}

}  // namespace golfsig::nn
