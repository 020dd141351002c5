#include "golfsig/data/dataset.hpp"

#include <fstream>
#include <sstream>

#include "golfsig/io/gsmb.hpp"
#include "golfsig/util/error.hpp"
#include "json.hpp"

namespace golfsig::data {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kFormat = "golfsig-dataset";
constexpr int kVersion = 1;

nn::NDArray read_checked(const fs::path& path, std::size_t rows, std::size_t cols) {
  if (!fs::exists(path)) throw FormatError("manifest lists missing file " + path.string());
  auto a = io::read_gsmb(path);
  if (a.ndim() != 2 || a.rows() != rows || a.cols() != cols)
    throw FormatError(path.string() + ": expected shape [" + std::to_string(rows) + ", " + std::to_string(cols) +
                      "], got " + nn::shape_string(a.shape()));
  return a;
}

}  // namespace

void write_dataset(const std::vector<SwingRecord>& records, const fs::path& dir) {
  fs::create_directories(dir);
  json swings = json::array();
  for (const auto& r : records) {
    r.validate();
    json s;
    s["id"] = r.id;
    s["player"] = {{"id", r.player.id},
                   {"sex", sex_name(r.player.sex)},
                   {"age", r.player.age},
                   {"style", r.player.style}};
    s["club"] = club_name(r.club);
    s["fps"] = r.motion.fps;
    s["frames"] = r.frames();
    s["events"] = r.events;
    if (r.has_pose()) {
      s["pose"] = r.id + ".pose.bin";
      io::write_gsmb(dir / s["pose"].get<std::string>(), r.motion.pose);
      if (r.motion.root) {
        s["root"] = r.id + ".root.bin";
        io::write_gsmb(dir / s["root"].get<std::string>(), *r.motion.root);
      }
    }
    if (r.has_sensor()) {
      s["imu"] = r.id + ".imu.bin";
      io::write_gsmb(dir / s["imu"].get<std::string>(), r.sensor);
    }
    if (!r.tokens.empty()) {
      s["tokens"] = r.id + ".tok.bin";
      io::write_gsmb_u16(dir / s["tokens"].get<std::string>(), {r.frames(), kin::kParts}, r.tokens);
    }
    swings.push_back(std::move(s));
  }
  json manifest{{"format", kFormat}, {"version", kVersion}, {"swings", swings}};
  std::ofstream out(dir / kManifestName);
  if (!out) throw FormatError("cannot write " + (dir / kManifestName).string());
  out << manifest.dump(1) << "\n";
}

std::vector<SwingRecord> read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / kManifestName;
  std::ifstream in(mpath);
  if (!in) throw FormatError("cannot read " + mpath.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  std::vector<SwingRecord> out;
  try {
    if (m.at("format") != kFormat) throw FormatError(mpath.string() + ": not a golfsig dataset manifest");
    if (m.at("version") != kVersion)
      throw FormatError(mpath.string() + ": unsupported manifest version " + m.at("version").dump());
    for (const auto& s : m.at("swings")) {
      SwingRecord r;
      r.id = s.at("id").get<std::string>();
      const auto& p = s.at("player");
      r.player.id = p.at("id").get<int>();
      r.player.sex = parse_sex(p.at("sex").get<std::string>());
      r.player.age = p.at("age").get<double>();
      r.player.style = p.at("style").get<std::array<double, 8>>();
      r.club = parse_club(s.at("club").get<std::string>());
      r.motion.fps = s.at("fps").get<double>();
      r.events = s.at("events").get<std::array<int, kEvents>>();
      const auto T = s.at("frames").get<std::size_t>();
      if (s.contains("pose")) r.motion.pose = read_checked(dir / s["pose"].get<std::string>(), T, kin::kPoseWidth);
      if (s.contains("root")) r.motion.root = read_checked(dir / s["root"].get<std::string>(), T, 3);
      if (s.contains("imu")) r.sensor = read_checked(dir / s["imu"].get<std::string>(), T, kSensorWidth);
      if (s.contains("tokens")) {
        const fs::path tpath = dir / s["tokens"].get<std::string>();
        if (!fs::exists(tpath)) throw FormatError("manifest lists missing file " + tpath.string());
        nn::Shape shape;
        r.tokens = io::read_gsmb_u16(tpath, shape);
        if (shape != nn::Shape{T, kin::kParts}) throw FormatError(tpath.string() + ": token grid must be T x 5");
      }
      try {
        r.validate();
      } catch (const ValidationError& e) {
        throw FormatError(mpath.string() + ": " + e.what());
      }
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  return out;
}

}  // namespace golfsig::data
