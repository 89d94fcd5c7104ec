#include "resim/camera.hpp"

#include <cmath>

#include "resim/error.hpp"

namespace resim {

void validate_camera(const Camera& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw BoundError("camera: focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) throw BoundError("camera: image size must be positive");
  if (cam.cx < 0.0 || cam.cx >= cam.width || cam.cy < 0.0 || cam.cy >= cam.height)
    throw BoundError("camera: principal point outside image");
  Mat3 rtr = transpose(cam.world_to_camera.R) * cam.world_to_camera.R;
  Mat3 eye = Mat3::identity();
  double drift = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) drift = std::max(drift, std::abs(rtr.m[i][j] - eye.m[i][j]));
  if (drift > 1e-6 || det(cam.world_to_camera.R) < 0.0)
    throw DegenerateGeometryError("camera: rotation is not a proper orthonormal matrix");
}

Camera look_at_camera(Vec3 eye, Vec3 target, Vec3 up, double fx, double fy, double cx, double cy,
                      int width, int height) {
  Vec3 fwd = target - eye;
  if (norm(fwd) <= 0.0) throw DegenerateGeometryError("look_at_camera: eye equals target");
  fwd = normalized(fwd);
  Vec3 right = cross(fwd, up);
  if (norm(right) < 1e-9) {
    // up parallel to the view direction; pick another vertical hint
    up = std::abs(fwd.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    right = cross(fwd, up);
  }
  right = normalized(right);
  Vec3 down = cross(fwd, right);  // +y down so +z is forward in a right-handed frame

  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  // Rows of world_to_camera.R are the camera axes expressed in world coords.
  Mat3 R;
  for (int j = 0; j < 3; ++j) {
    R.m[0][j] = right[j];
    R.m[1][j] = down[j];
    R.m[2][j] = fwd[j];
  }
  cam.world_to_camera.R = R;
  cam.world_to_camera.t = -(R * eye);
  validate_camera(cam);
  return cam;
}

Camera apply_rotation_delta(const Camera& nominal, Vec3 delta) {
  Camera out = nominal;
  Vec3 center = nominal.center();
  out.world_to_camera.R = nominal.world_to_camera.R * so3_exp(delta);
  out.world_to_camera.t = -(out.world_to_camera.R * center);
  return out;
}

Vec3 rotation_delta_vjp(const Camera& nominal, Vec3 delta, Vec3 d_rot_tangent,
                        Vec3 d_translation) {
  // R(delta + h) = R(delta) exp(hat(Jr h)) and t = -R(delta) center, so the
  // rasterizer tangent splits as eps = Jr h, u = R(delta) (center x Jr h).
  Camera cur = apply_rotation_delta(nominal, delta);
  Vec3 center = nominal.center();
  Vec3 g = d_rot_tangent + cross(transpose(cur.world_to_camera.R) * d_translation, center);
  return transpose(so3_right_jacobian(delta)) * g;
}

}  // namespace resim
