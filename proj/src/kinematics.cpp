#include "resim/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resim/error.hpp"
#include "resim/rng.hpp"

namespace resim {

namespace {

using nlohmann::json;

// Derivative of a rigid pose along one scalar parameter.
struct PoseDeriv {
  Mat3 dR;
  Vec3 dt;
};

Pose local_pose_at(const Body& b, const JointState& q, const KinematicChain& chain, int body_idx) {
  if (b.joint.type == Joint::Type::kRevolute) {
    int slot = chain.revolute_joint_of[body_idx];
    Pose rot{so3_exp(q.angles[slot] * b.joint.axis), Vec3{}};
    return compose(b.local, rot);
  }
  return b.local;
}

Vec3 parse_vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Pose parse_pose(const json& j) {
  Pose p;
  if (j.contains("pos")) p.t = parse_vec3(j.at("pos"));
  if (j.contains("quat")) {
    const auto& q = j.at("quat");
    p.R = quat_to_rotation({q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                            q.at(3).get<double>()});
  }
  return p;
}

}  // namespace

KinematicChain make_chain(std::vector<Body> bodies, std::vector<CameraMount> cameras,
                          std::vector<TcpSite> tcps) {
  KinematicChain chain;
  chain.bodies = std::move(bodies);
  chain.cameras = std::move(cameras);
  chain.tcps = std::move(tcps);
  chain.revolute_joint_of.assign(chain.bodies.size(), -1);

  for (size_t b = 0; b < chain.bodies.size(); ++b) {
    Body& body = chain.bodies[b];
    if (body.parent >= int(b))
      throw TopologyError("chain: body " + body.name + " has parent at or after itself");
    if (body.parent < -1) throw TopologyError("chain: invalid parent index");
    if (body.joint.type == Joint::Type::kRevolute) {
      double n = norm(body.joint.axis);
      if (std::abs(n - 1.0) > 1e-9)
        throw DegenerateGeometryError("chain: revolute axis of " + body.name + " is not unit");
      body.joint.axis = body.joint.axis / n;
      chain.revolute_joint_of[b] = chain.joint_count++;
    }
  }
  for (const auto& c : chain.cameras)
    if (c.body < -1 || c.body >= int(chain.bodies.size()))
      throw TopologyError("chain: camera mounted on invalid body");
  for (const auto& t : chain.tcps)
    if (t.body < 0 || t.body >= int(chain.bodies.size()))
      throw TopologyError("chain: tcp on invalid body");
  return chain;
}

KinematicChain parse_chain_json(const std::string& text) {
  json j = json::parse(text);
  std::vector<Body> bodies;
  for (const auto& jb : j.at("bodies")) {
    Body b;
    b.name = jb.value("name", "body" + std::to_string(bodies.size()));
    b.parent = jb.at("parent").get<int>();
    b.local = parse_pose(jb);
    if (jb.contains("joint")) {
      std::string type = jb.at("joint").value("type", "fixed");
      if (type == "revolute") {
        b.joint.type = Joint::Type::kRevolute;
        b.joint.axis = parse_vec3(jb.at("joint").at("axis"));
      } else if (type != "fixed") {
        throw ConfigError("chain: unknown joint type " + type);
      }
    }
    bodies.push_back(std::move(b));
  }
  std::vector<CameraMount> cameras;
  for (const auto& jc : j.value("cameras", json::array())) {
    CameraMount c;
    c.body = jc.at("body").get<int>();
    c.local = parse_pose(jc);
    if (jc.contains("look_at")) {
      // Aim helper: orient the mount toward a target point (in the mount
      // frame's parent coordinates) instead of hand-writing a quaternion.
      Vec3 target = parse_vec3(jc.at("look_at"));
      Vec3 up = jc.contains("up") ? parse_vec3(jc.at("up")) : Vec3{0, 0, 1};
      Camera probe = look_at_camera(c.local.t, target, up, 1, 1, 0.25, 0.25, 1, 1);
      c.local = inverse(probe.world_to_camera);
    }
    c.intrinsics.fx = jc.at("fx").get<double>();
    c.intrinsics.fy = jc.at("fy").get<double>();
    c.intrinsics.cx = jc.at("cx").get<double>();
    c.intrinsics.cy = jc.at("cy").get<double>();
    c.intrinsics.width = jc.at("width").get<int>();
    c.intrinsics.height = jc.at("height").get<int>();
    c.intrinsics.frame_weight = jc.value("weight", 1.0);
    c.intrinsics.id = jc.value("name", "cam" + std::to_string(cameras.size()));
    c.optimize_rotation = jc.value("optimize_rotation", c.body < 0);
    cameras.push_back(std::move(c));
  }
  std::vector<TcpSite> tcps;
  for (const auto& jt : j.value("tcps", json::array())) {
    tcps.push_back({jt.at("body").get<int>(), parse_vec3(jt.at("pos"))});
  }
  return make_chain(std::move(bodies), std::move(cameras), std::move(tcps));
}

KinematicChain load_chain_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_chain_json: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_chain_json(ss.str());
  } catch (const json::exception& e) {
    throw IoError("load_chain_json: malformed " + path + ": " + e.what());
  }
}

FkResult forward_kinematics(const KinematicChain& chain, const JointState& q) {
  if (int(q.angles.size()) != chain.joint_count)
    throw ShapeError("forward_kinematics: expected " + std::to_string(chain.joint_count) +
                     " joint angles, got " + std::to_string(q.angles.size()));

  FkResult out;
  out.body_poses.resize(chain.bodies.size());
  for (size_t b = 0; b < chain.bodies.size(); ++b) {
    Pose parent = chain.bodies[b].parent < 0 ? Pose::identity()
                                             : out.body_poses[chain.bodies[b].parent];
    out.body_poses[b] = compose(parent, local_pose_at(chain.bodies[b], q, chain, int(b)));
  }
  out.cameras.reserve(chain.cameras.size());
  for (const auto& mount : chain.cameras) {
    Camera cam = mount.intrinsics;
    Pose c2w = mount.body < 0 ? mount.local : compose(out.body_poses[mount.body], mount.local);
    cam.world_to_camera = inverse(c2w);
    out.cameras.push_back(std::move(cam));
  }
  out.tcp_points.reserve(chain.tcps.size());
  for (const auto& site : chain.tcps)
    out.tcp_points.push_back(out.body_poses[site.body].apply(site.local));
  return out;
}

std::vector<double> fk_vjp(const KinematicChain& chain, const JointState& q,
                           const FkCotangent& cotangent) {
  if (int(q.angles.size()) != chain.joint_count)
    throw ShapeError("fk_vjp: joint angle count mismatch");
  if (!cotangent.cameras.empty() && cotangent.cameras.size() != chain.cameras.size())
    throw ShapeError("fk_vjp: camera cotangent count mismatch");
  if (!cotangent.bodies.empty() && cotangent.bodies.size() != chain.bodies.size())
    throw ShapeError("fk_vjp: body cotangent count mismatch");
  if (!cotangent.tcps.empty() && cotangent.tcps.size() != chain.tcps.size())
    throw ShapeError("fk_vjp: tcp cotangent count mismatch");

  FkResult fk = forward_kinematics(chain, q);
  std::vector<double> grad(chain.joint_count, 0.0);

  // Forward-mode sweep per joint; chains are small so this is cheap and exact.
  std::vector<PoseDeriv> deriv(chain.bodies.size());
  for (size_t jb = 0; jb < chain.bodies.size(); ++jb) {
    int slot = chain.revolute_joint_of[jb];
    if (slot < 0) continue;

    for (size_t b = 0; b < chain.bodies.size(); ++b) {
      const Body& body = chain.bodies[b];
      PoseDeriv dp = body.parent < 0 ? PoseDeriv{} : deriv[body.parent];
      Pose local = local_pose_at(body, q, chain, int(b));
      deriv[b].dR = dp.dR * local.R;
      deriv[b].dt = dp.dR * local.t + dp.dt;
      if (b == jb) {
        // d/dq (L * exp(q a^)) = L.R * exp(q a^) * a^ appended in the body frame.
        Pose parent_pose = body.parent < 0 ? Pose::identity() : fk.body_poses[body.parent];
        Mat3 dlocal = local.R * so3_hat(body.joint.axis);
        deriv[b].dR = deriv[b].dR + parent_pose.R * dlocal;
      }
    }

    double g = 0.0;
    if (!cotangent.tcps.empty()) {
      for (size_t i = 0; i < chain.tcps.size(); ++i) {
        const PoseDeriv& d = deriv[chain.tcps[i].body];
        g += dot(cotangent.tcps[i], d.dR * chain.tcps[i].local + d.dt);
      }
    }
    if (!cotangent.bodies.empty()) {
      for (size_t b = 0; b < chain.bodies.size(); ++b) {
        Vec3 rot_tan = so3_vee(transpose(fk.body_poses[b].R) * deriv[b].dR);
        g += dot(cotangent.bodies[b].rotation, rot_tan) +
             dot(cotangent.bodies[b].translation, deriv[b].dt);
      }
    }
    if (!cotangent.cameras.empty()) {
      for (size_t c = 0; c < chain.cameras.size(); ++c) {
        const CameraMount& mount = chain.cameras[c];
        if (mount.body < 0) continue;
        const PoseDeriv& d = deriv[mount.body];
        Mat3 dR_c2w = d.dR * mount.local.R;
        Vec3 dt_c2w = d.dR * mount.local.t + d.dt;
        const Pose& w2c = fk.cameras[c].world_to_camera;
        Mat3 dR_w2c = transpose(dR_c2w);
        Pose c2w = inverse(w2c);
        Vec3 dt_w2c = -(dR_w2c * c2w.t) - w2c.R * dt_c2w;
        Vec3 rot_tan = so3_vee(transpose(w2c.R) * dR_w2c);
        g += dot(cotangent.cameras[c].rotation, rot_tan) +
             dot(cotangent.cameras[c].translation, dt_w2c);
      }
    }
    grad[slot] = g;
  }
  return grad;
}

JointState add_joint_noise(const JointState& q, double sigma, uint64_t rng_seed) {
  if (sigma < 0.0) throw BoundError("add_joint_noise: sigma must be non-negative");
  JointState out = q;
  if (sigma == 0.0) return out;
  for (size_t i = 0; i < out.angles.size(); ++i)
    out.angles[i] += sigma * Rng::keyed(rng_seed, i).normal();
  return out;
}

}  // namespace resim
