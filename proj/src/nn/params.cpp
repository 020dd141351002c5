#include "golfsig/nn/params.hpp"

#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>

#include "golfsig/io/gsmb.hpp"
#include "golfsig/util/error.hpp"

namespace golfsig::nn {

using nlohmann::json;

NDArray& ParameterStore::add(const std::string& name, NDArray value, bool trainable) {
  Entry e;
  e.first_moment = NDArray(value.shape(), 0.0);
  e.second_moment = NDArray(value.shape(), 0.0);
  e.value = std::move(value);
  e.trainable = trainable;
  auto [it, inserted] = entries_.insert_or_assign(name, std::move(e));
  return it->second.value;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("parameter store has no entry '" + name + "'");
  return it->second;
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("parameter store has no entry '" + name + "'");
  return it->second;
}

const NDArray& ParameterStore::get(const std::string& name) const { return entry(name).value; }
NDArray& ParameterStore::get(const std::string& name) { return entry(name).value; }

std::size_t ParameterStore::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (!trainable_only || e.trainable) n += e.value.size();
  }
  return n;
}

void ParameterStore::apply_buffers(const std::map<std::string, NDArray>& buffers) {
  for (const auto& [name, value] : buffers) entry(name).value = value;
}

void ParameterStore::reset_optimizer() {
  for (auto& [name, e] : entries_) {
    e.first_moment.fill(0.0);
    e.second_moment.fill(0.0);
    e.step = 0;
  }
}

namespace {

std::string blob_name(const std::string& name) {
  std::string out;
  for (char c : name) out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '.');
  return out + ".bin";
}

}  // namespace

void ParameterStore::save(const std::filesystem::path& dir, bool single_precision) const {
  std::filesystem::create_directories(dir);
  const auto dtype = single_precision ? io::DType::f32 : io::DType::f64;
  json index;
  index["format"] = "golfsig-checkpoint";
  index["version"] = 1;
  json params = json::array();
  for (const auto& [name, e] : entries_) {
    const auto file = blob_name(name);
    io::write_gsmb(dir / file, e.value, dtype);
    params.push_back({{"name", name},
                      {"shape", e.value.shape()},
                      {"dtype", static_cast<int>(dtype)},
                      {"trainable", e.trainable},
                      {"file", file}});
  }
  index["parameters"] = params;
  std::ofstream(dir / "index.json") << index.dump(2) << '\n';
}

ParameterStore ParameterStore::load(const std::filesystem::path& dir) {
  std::ifstream f(dir / "index.json");
  if (!f) throw FormatError((dir / "index.json").string() + ": missing checkpoint index");
  json index;
  try {
    f >> index;
  } catch (const json::exception& e) {
    throw FormatError((dir / "index.json").string() + ": " + e.what());
  }
  ParameterStore store;
  for (const auto& p : index.at("parameters")) {
    const auto file = dir / p.at("file").get<std::string>();
    NDArray value = io::read_gsmb(file);
    if (value.shape() != p.at("shape").get<Shape>()) {
      throw FormatError(file.string() + ": shape disagrees with index.json");
    }
    store.add(p.at("name").get<std::string>(), std::move(value), p.value("trainable", true));
  }
  return store;
}

}  // namespace golfsig::nn
