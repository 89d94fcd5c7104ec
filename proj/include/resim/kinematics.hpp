#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resim/camera.hpp"
#include "resim/vec.hpp"

namespace resim {

struct Joint {
  enum class Type { kFixed, kRevolute };
  Type type = Type::kFixed;
  Vec3 axis{0, 0, 1};  // unit, in the body's local frame
};

struct Body {
  std::string name;
  int parent = -1;  // -1 = world; must be < own index
  Pose local;       // parent -> body at zero joint angle
  Joint joint;
};

struct CameraMount {
  int body = -1;  // -1 mounts directly in the world frame
  Pose local;     // camera-to-body
  Camera intrinsics;  // pose field unused; filled by forward kinematics
  bool optimize_rotation = true;  // false for wrist-style mounts by default
};

struct TcpSite {
  int body = 0;
  Vec3 local;
};

struct KinematicChain {
  std::vector<Body> bodies;
  std::vector<CameraMount> cameras;
  std::vector<TcpSite> tcps;

  // revolute_joint_of[b] is the joint slot of body b, or -1.
  std::vector<int> revolute_joint_of;
  int joint_count = 0;
};

KinematicChain make_chain(std::vector<Body> bodies, std::vector<CameraMount> cameras,
                          std::vector<TcpSite> tcps);

// {bodies:[{name,parent,pos,quat,joint:{type,axis}}], cameras:[...], tcps:[...]}
KinematicChain load_chain_json(const std::string& path);
KinematicChain parse_chain_json(const std::string& text);

struct JointState {
  std::vector<double> angles;  // radians, one per revolute joint
};

struct FkResult {
  std::vector<Pose> body_poses;  // body-to-world
  std::vector<Camera> cameras;   // world_to_camera filled
  std::vector<Vec3> tcp_points;  // world
};

FkResult forward_kinematics(const KinematicChain& chain, const JointState& q);

// Cotangents use the same tangent conventions the rasterizer emits:
// camera rotation is a right-increment on world_to_camera.R, camera
// translation is additive; body rotation is a right-increment on the
// body-to-world rotation.
struct FkCotangent {
  struct PoseTangent {
    Vec3 rotation;
    Vec3 translation;
  };
  std::vector<PoseTangent> cameras;  // sized like chain.cameras or empty
  std::vector<PoseTangent> bodies;   // sized like chain.bodies or empty
  std::vector<Vec3> tcps;            // sized like chain.tcps or empty
};

std::vector<double> fk_vjp(const KinematicChain& chain, const JointState& q,
                           const FkCotangent& cotangent);

JointState add_joint_noise(const JointState& q, double sigma, uint64_t rng_seed);

}  // namespace resim
