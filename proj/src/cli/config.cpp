#include "golfsig/cli/config.hpp"

#include <fstream>

#include "golfsig/util/error.hpp"
#include "golfsig/util/random.hpp"

namespace golfsig::cli {

namespace fs = std::filesystem;

kin::Skeleton PipelineConfig::load_skeleton() const {
  return skeleton.path.empty() ? kin::Skeleton::default_skeleton() : kin::Skeleton::load(skeleton.path);
}

data::CorpusSpec PipelineConfig::corpus() const {
  return {datagen.swings, datagen.players, datagen.frames, datagen.fps};
}

data::GeneratorConfig PipelineConfig::generator() const {
  return {datagen.keyframe_noise, datagen.timing_noise, datagen.sex_offset,
          datagen.age_offset,     datagen.sensor_noise, datagen.smoothing_window};
}

data::SensorPlacement PipelineConfig::placement() const {
  const auto& o = datagen.sensor_offset;
  return {datagen.sensor_body, kin::Vec3(o[0], o[1], o[2])};
}

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  // FNV-1a of the stage name picks the stream.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stage) h = (h ^ c) * 1099511628211ULL;
  return Rng::derive(seed, h).next_u64();
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: empty component in key '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

PipelineConfig resolve_config(Json doc, const std::vector<std::string>& overrides) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(doc, o);
  if (!doc.contains("seed")) throw ConfigError("missing mandatory config key 'seed'");
  PipelineConfig c;
  from_json_value(doc, c);

  auto check = [](auto& section, const char* name) {
    try {
      section.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    }
  };
  check(c.posenet, "posenet");
  check(c.events, "events");
  check(c.vqvae, "vqvae");
  check(c.prior, "prior");
  check(c.heads, "heads");
  const auto& d = c.datagen;
  if (d.swings == 0 || d.players == 0) throw ConfigError("datagen.swings and datagen.players must be positive");
  if (d.frames < 8) throw ConfigError("datagen.frames must be at least 8");
  if (!(d.fps > 0.0)) throw ConfigError("datagen.fps must be positive");
  for (const auto& [key, p] : {std::pair{"skeleton.path", c.skeleton.path}, std::pair{"paths.data", c.paths.data},
                               std::pair{"paths.reference", c.paths.reference}})
    if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(key) + ": '" + p + "' does not exist");
  try {
    c.load_skeleton().index_of(d.sensor_body);
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("datagen.sensor_body: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return resolve_config(std::move(doc), overrides);
}

void echo_config(const PipelineConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / kConfigEcho);
  if (!out) throw FormatError("cannot write " + (dir / kConfigEcho).string());
  out << to_json_value(config).dump(2) << '\n';
}

}  // namespace golfsig::cli
