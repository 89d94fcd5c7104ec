#pragma once

#include <string>

#include "resim/vec.hpp"

namespace resim {

// Pinhole camera. world_to_camera maps world points into a frame whose +z
// axis looks through the image; pixels are u = fx x/z + cx, v = fy y/z + cy.
struct Camera {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  Pose world_to_camera;
  double frame_weight = 1.0;
  std::string id;

  Vec3 center() const { return -(transpose(world_to_camera.R) * world_to_camera.t); }
};

void validate_camera(const Camera& cam);

// Camera at eye looking toward target, +z forward, up as the vertical hint.
Camera look_at_camera(Vec3 eye, Vec3 target, Vec3 up, double fx, double fy, double cx, double cy,
                      int width, int height);

// Rotation-only perturbation about the camera center:
// R_wc(delta) = R_wc exp(hat(delta)), center fixed.
Camera apply_rotation_delta(const Camera& nominal, Vec3 delta);

// Pulls a rasterizer camera gradient (right-increment rotation tangent +
// translation) back onto the delta vector of apply_rotation_delta.
Vec3 rotation_delta_vjp(const Camera& nominal, Vec3 delta, Vec3 d_rot_tangent, Vec3 d_translation);

}  // namespace resim
