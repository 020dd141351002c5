#include "golfsig/kin/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "golfsig/util/error.hpp"
#include "json.hpp"

namespace golfsig::kin {

namespace {

using nlohmann::json;

const Vec3 kX = Vec3::UnitX();
const Vec3 kY = Vec3::UnitY();
const Vec3 kZ = Vec3::UnitZ();

Dof make_dof(std::string name, Vec3 axis, double lo, double hi) { return Dof{std::move(name), axis, lo, hi}; }

Body make_body(std::string name, std::string parent_name, Vec3 offset, std::string joint, std::vector<Dof> dofs,
          std::vector<std::string>& parent_names) {
  parent_names.push_back(std::move(parent_name));
  return Body{std::move(name), -1, offset, std::move(joint), std::move(dofs)};
}

std::vector<Body> resolve_parents(std::vector<Body> bodies, const std::vector<std::string>& parent_names) {
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    if (parent_names[i].empty()) continue;
    int found = -1;
    for (std::size_t j = 0; j < bodies.size(); ++j)
      if (bodies[j].name == parent_names[i]) found = static_cast<int>(j);
    if (found < 0) throw ValidationError("body '" + bodies[i].name + "' has unknown parent '" + parent_names[i] + "'");
    bodies[i].parent = found;
  }
  return bodies;
}

// side = +1 left, -1 right. Mirroring across the sagittal plane flips the
// y offsets and the sign of rotations about x and z.
void add_arm(std::vector<Body>& out, std::vector<std::string>& parents, const std::string& s, double side) {
  const Vec3 sx = side * kX, sz = side * kZ;
  out.push_back(make_body("clavicle" + s, "thorax", {0.02, side * 0.02, 0.22}, "sternoclavicular" + s,
                     {make_dof("sc_elevation" + s, sx, -0.5, 0.5), make_dof("sc_protraction" + s, sz, -0.5, 0.5),
                      make_dof("sc_rotation" + s, side * kX.cross(kZ) * side, -0.5, 0.5)},
                     parents));
  out.push_back(make_body("scapula" + s, "clavicle" + s, {-0.03, side * 0.14, 0.0}, "scapulothoracic" + s,
                     {make_dof("st_upward" + s, sx, -0.6, 0.6), make_dof("st_protraction" + s, sz, -0.6, 0.6),
                      make_dof("st_tilt" + s, kX.cross(kZ), -0.6, 0.6)},
                     parents));
  // flexion about y, abduction about x, axial rotation about (y x x) = -z
  out.push_back(make_body("humerus" + s, "scapula" + s, {0.0, side * 0.04, -0.03}, "shoulder" + s,
                     {make_dof("shoulder_flexion" + s, kY, -2.9, 1.2), make_dof("shoulder_abduction" + s, sx, -1.35, 1.35),
                      make_dof("shoulder_rotation" + s, kY.cross(sx), -1.6, 1.6)},
                     parents));
  out.push_back(make_body("ulna" + s, "humerus" + s, {0.0, 0.0, -0.30}, "elbow" + s,
                     {make_dof("elbow_flexion" + s, kY, -2.6, 0.1)}, parents));
  out.push_back(make_body("radius" + s, "ulna" + s, {0.0, 0.0, -0.02}, "radioulnar" + s,
                     {make_dof("pro_sup" + s, -sz, -1.6, 1.6)}, parents));
  out.push_back(make_body("hand" + s, "radius" + s, {0.0, 0.0, -0.25}, "wrist" + s,
                     {make_dof("wrist_flexion" + s, kY, -1.3, 1.3), make_dof("wrist_deviation" + s, sx, -0.7, 0.7)}, parents));
}

void add_leg(std::vector<Body>& out, std::vector<std::string>& parents, const std::string& s, double side) {
  const Vec3 sx = side * kX;
  out.push_back(make_body("femur" + s, "pelvis", {0.0, side * 0.09, -0.07}, "hip" + s,
                     {make_dof("hip_flexion" + s, kY, -2.2, 0.8), make_dof("hip_adduction" + s, sx, -0.9, 0.9),
                      make_dof("hip_rotation" + s, kY.cross(sx), -0.9, 0.9)},
                     parents));
  out.push_back(make_body("tibia" + s, "femur" + s, {0.0, 0.0, -0.42}, "knee" + s,
                     {make_dof("knee_flexion" + s, kY, -0.1, 2.4)}, parents));
  out.push_back(make_body("talus" + s, "tibia" + s, {0.0, 0.0, -0.40}, "ankle" + s,
                     {make_dof("ankle_flexion" + s, kY, -0.9, 0.9)}, parents));
  out.push_back(make_body("calcn" + s, "talus" + s, {-0.05, 0.0, -0.04}, "subtalar" + s,
                     {make_dof("subtalar" + s, sx, -0.6, 0.6)}, parents));
  out.push_back(make_body("toes" + s, "calcn" + s, {0.18, 0.0, -0.01}, "mtp" + s, {make_dof("mtp" + s, kY, -0.9, 0.9)},
                     parents));
}

std::vector<double> vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 json_vec(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(what + " must be a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

Skeleton::Skeleton(std::vector<Body> bodies, std::vector<BodyPart> parts)
    : bodies_(std::move(bodies)), parts_(std::move(parts)) {
  validate();
}

void Skeleton::validate() {
  if (bodies_.size() != kBodies)
    throw ValidationError("skeleton must have " + std::to_string(kBodies) + " bodies, got " +
                          std::to_string(bodies_.size()));
  std::size_t roots = 0;
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    const auto& b = bodies_[i];
    if (b.parent < 0) {
      root_ = i;
      ++roots;
    } else if (static_cast<std::size_t>(b.parent) >= bodies_.size() || static_cast<std::size_t>(b.parent) == i) {
      throw ValidationError("body '" + b.name + "' has an invalid parent index");
    }
    for (std::size_t j = 0; j < i; ++j)
      if (bodies_[j].name == b.name) throw ValidationError("duplicate body name '" + b.name + "'");
    if (b.dofs.size() > 3) throw ValidationError("joint of '" + b.name + "' has more than 3 DOF");
    for (std::size_t a = 0; a < b.dofs.size(); ++a) {
      const auto& d = b.dofs[a];
      if (std::abs(d.axis.norm() - 1.0) > 1e-9) throw ValidationError("DOF '" + d.name + "' axis is not unit length");
      if (!(d.lower < d.upper)) throw ValidationError("DOF '" + d.name + "' has empty limits");
      for (std::size_t c = 0; c < a; ++c)
        if (std::abs(d.axis.dot(b.dofs[c].axis)) > 1e-9)
          throw ValidationError("DOF axes of '" + b.name + "' are not orthogonal");
    }
    if (b.dofs.size() == 3 && (b.dofs[0].axis.cross(b.dofs[1].axis) - b.dofs[2].axis).norm() > 1e-9)
      throw ValidationError("DOF axes of '" + b.name + "' are not right-handed");
  }
  if (roots != 1) throw ValidationError("skeleton must have exactly one root");
  if (bodies_[root_].name != "pelvis") throw ValidationError("skeleton root must be the pelvis");
  if (bodies_[root_].offset.norm() != 0.0) throw ValidationError("root offset must be zero");

  // Breadth-first from the root; anything unreached means a cycle or a forest.
  order_.assign(1, root_);
  for (std::size_t k = 0; k < order_.size(); ++k)
    for (std::size_t i = 0; i < bodies_.size(); ++i)
      if (bodies_[i].parent == static_cast<int>(order_[k])) order_.push_back(i);
  if (order_.size() != bodies_.size()) throw ValidationError("parent links do not form a tree rooted at the pelvis");

  dof_start_.resize(bodies_.size());
  dof_count_ = 0;
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    dof_start_[i] = dof_count_;
    dof_count_ += bodies_[i].dofs.size();
  }
  if (dof_count_ != kDofs) throw ValidationError("skeleton must have 52 DOF, got " + std::to_string(dof_count_));

  static const std::size_t kPartSizes[kParts] = {6, 6, 5, 5, 4};
  if (parts_.size() != kParts) throw ValidationError("partition must have 5 parts");
  std::size_t next = 0;
  for (std::size_t p = 0; p < kParts; ++p) {
    if (parts_[p].bodies.size() != kPartSizes[p])
      throw ValidationError("part '" + parts_[p].name + "' must have " + std::to_string(kPartSizes[p]) + " bodies");
    for (auto b : parts_[p].bodies) {
      if (b != next) throw ValidationError("partition must list bodies contiguously in body order");
      ++next;
    }
  }
}

const Dof& Skeleton::dof(std::size_t i) const {
  for (std::size_t b = bodies_.size(); b-- > 0;)
    if (dof_start_[b] <= i && i < dof_start_[b] + bodies_[b].dofs.size()) return bodies_[b].dofs[i - dof_start_[b]];
  throw ValidationError("DOF index out of range");
}

std::size_t Skeleton::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < bodies_.size(); ++i)
    if (bodies_[i].name == name) return i;
  throw ValidationError("unknown body '" + name + "'");
}

std::size_t Skeleton::dof_index(const std::string& name) const {
  for (std::size_t b = 0; b < bodies_.size(); ++b)
    for (std::size_t k = 0; k < bodies_[b].dofs.size(); ++k)
      if (bodies_[b].dofs[k].name == name) return dof_start_[b] + k;
  throw ValidationError("unknown DOF '" + name + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> Skeleton::part_slices() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : parts_) out.emplace_back(6 * p.bodies.front(), 6 * p.bodies.size());
  return out;
}

Skeleton Skeleton::default_skeleton() {
  std::vector<Body> b;
  std::vector<std::string> parents;
  add_arm(b, parents, "_l", 1.0);
  add_arm(b, parents, "_r", -1.0);
  add_leg(b, parents, "_l", 1.0);
  add_leg(b, parents, "_r", -1.0);
  // Backbone: axial rotation about z first, then lateral bend (x), then
  // flexion (y).
  b.push_back(make_body("pelvis", "", {0.0, 0.0, 0.0}, "ground_pelvis",
                   {make_dof("pelvis_rotation", kZ, -2.5, 2.5), make_dof("pelvis_list", kX, -0.6, 0.6),
                    make_dof("pelvis_tilt", kY, -0.9, 0.9)},
                   parents));
  b.push_back(make_body("lumbar", "pelvis", {0.0, 0.0, 0.10}, "lumbar",
                   {make_dof("lumbar_rotation", kZ, -0.9, 0.9), make_dof("lumbar_bending", kX, -0.6, 0.6),
                    make_dof("lumbar_extension", kY, -0.6, 1.0)},
                   parents));
  b.push_back(make_body("thorax", "lumbar", {0.0, 0.0, 0.20}, "thoracic",
                   {make_dof("thorax_rotation", kZ, -0.9, 0.9), make_dof("thorax_bending", kX, -0.6, 0.6),
                    make_dof("thorax_extension", kY, -0.6, 1.0)},
                   parents));
  b.push_back(make_body("head", "thorax", {0.0, 0.0, 0.30}, "neck",
                   {make_dof("neck_rotation", kZ, -1.2, 1.2), make_dof("neck_bending", kX, -0.6, 0.6),
                    make_dof("neck_flexion", kY, -0.8, 0.8)},
                   parents));
  auto bodies = resolve_parents(std::move(b), parents);
  std::vector<BodyPart> parts{{"left_arm", {0, 1, 2, 3, 4, 5}},
                              {"right_arm", {6, 7, 8, 9, 10, 11}},
                              {"left_leg", {12, 13, 14, 15, 16}},
                              {"right_leg", {17, 18, 19, 20, 21}},
                              {"backbone", {22, 23, 24, 25}}};
  return Skeleton(std::move(bodies), std::move(parts));
}

std::string Skeleton::to_json_string() const {
  json j;
  j["bodies"] = json::array();
  for (const auto& b : bodies_) {
    json jb;
    jb["name"] = b.name;
    jb["parent"] = b.parent < 0 ? json(nullptr) : json(bodies_[static_cast<std::size_t>(b.parent)].name);
    jb["offset"] = vec_json(b.offset);
    jb["joint"] = b.joint;
    jb["dofs"] = json::array();
    for (const auto& d : b.dofs)
      jb["dofs"].push_back({{"name", d.name}, {"axis", vec_json(d.axis)}, {"limits", {d.lower, d.upper}}});
    j["bodies"].push_back(jb);
  }
  j["partition"] = json::array();
  for (const auto& p : parts_) {
    json names = json::array();
    for (auto i : p.bodies) names.push_back(bodies_[i].name);
    j["partition"].push_back({{"name", p.name}, {"bodies", names}});
  }
  return j.dump(2);
}

Skeleton Skeleton::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("skeleton JSON: ") + e.what());
  }
  try {
    std::vector<Body> bodies;
    std::vector<std::string> parents;
    for (const auto& jb : j.at("bodies")) {
      std::vector<Dof> dofs;
      for (const auto& jd : jb.at("dofs")) {
        const auto& lim = jd.at("limits");
        dofs.push_back(make_dof(jd.at("name").get<std::string>(), json_vec(jd.at("axis"), "axis"), lim.at(0).get<double>(),
                           lim.at(1).get<double>()));
      }
      const auto& jp = jb.at("parent");
      bodies.push_back(make_body(jb.at("name").get<std::string>(), jp.is_null() ? "" : jp.get<std::string>(),
                            json_vec(jb.at("offset"), "offset"), jb.value("joint", ""), std::move(dofs), parents));
    }
    bodies = resolve_parents(std::move(bodies), parents);
    std::vector<BodyPart> parts;
    for (const auto& jp : j.at("partition")) {
      BodyPart part{jp.at("name").get<std::string>(), {}};
      for (const auto& name : jp.at("bodies")) {
        std::size_t idx = bodies.size();
        for (std::size_t i = 0; i < bodies.size(); ++i)
          if (bodies[i].name == name.get<std::string>()) idx = i;
        if (idx == bodies.size()) throw ValidationError("partition names unknown body " + name.dump());
        part.bodies.push_back(idx);
      }
      parts.push_back(std::move(part));
    }
    return Skeleton(std::move(bodies), std::move(parts));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("skeleton JSON: ") + e.what());
  }
}

Skeleton Skeleton::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read skeleton file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace golfsig::kin
