#pragma once

#include <array>
#include <cmath>

namespace resim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return s * a; }
inline Vec3 operator/(Vec3 a, double s) { return (1.0 / s) * a; }
inline Vec3& operator+=(Vec3& a, Vec3 b) { a = a + b; return a; }
inline Vec3& operator-=(Vec3& a, Vec3 b) { a = a - b; return a; }
inline Vec3& operator*=(Vec3& a, double s) { a = s * a; return a; }

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double norm_sq(Vec3 a) { return dot(a, a); }
inline Vec3 normalized(Vec3 a) { return a / norm(a); }
inline Vec3 hadamard(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

// Row-major 3x3 matrix.
struct Mat3 {
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }
  static Mat3 diag(double a, double b, double c) {
    Mat3 r;
    r.m[0][0] = a;
    r.m[1][1] = b;
    r.m[2][2] = c;
    return r;
  }
  static Mat3 from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
      r.m[i][0] = c0[i];
      r.m[i][1] = c1[i];
      r.m[i][2] = c2[i];
    }
    return r;
  }
  Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
  Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
};

inline Vec3 operator*(const Mat3& A, Vec3 v) {
  return {dot(A.row(0), v), dot(A.row(1), v), dot(A.row(2), v)};
}
inline Mat3 operator*(const Mat3& A, const Mat3& B) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i][j] = A.m[i][0] * B.m[0][j] + A.m[i][1] * B.m[1][j] + A.m[i][2] * B.m[2][j];
  return r;
}
inline Mat3 operator+(const Mat3& A, const Mat3& B) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = A.m[i][j] + B.m[i][j];
  return r;
}
inline Mat3 operator-(const Mat3& A, const Mat3& B) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = A.m[i][j] - B.m[i][j];
  return r;
}
inline Mat3 operator*(double s, const Mat3& A) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = s * A.m[i][j];
  return r;
}
inline Mat3 transpose(const Mat3& A) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = A.m[j][i];
  return r;
}
inline Mat3 outer(Vec3 a, Vec3 b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a[i] * b[j];
  return r;
}
inline double det(const Mat3& A) {
  return A.m[0][0] * (A.m[1][1] * A.m[2][2] - A.m[1][2] * A.m[2][1]) -
         A.m[0][1] * (A.m[1][0] * A.m[2][2] - A.m[1][2] * A.m[2][0]) +
         A.m[0][2] * (A.m[1][0] * A.m[2][1] - A.m[1][1] * A.m[2][0]);
}
inline double trace(const Mat3& A) { return A.m[0][0] + A.m[1][1] + A.m[2][2]; }

// Skew-symmetric matrix such that hat(w) * v == cross(w, v).
inline Mat3 so3_hat(Vec3 w) {
  Mat3 r;
  r.m[0][1] = -w.z;
  r.m[0][2] = w.y;
  r.m[1][0] = w.z;
  r.m[1][2] = -w.x;
  r.m[2][0] = -w.y;
  r.m[2][1] = w.x;
  return r;
}

// vee(A - A^T) / 2 restricted to exactly skew inputs: (A32-A23, A13-A31, A21-A12)/...
// Here the plain extraction for a skew matrix.
inline Vec3 so3_vee(const Mat3& A) {
  return {A.m[2][1], A.m[0][2], A.m[1][0]};
}

// Rodrigues formula, exact with a Taylor fallback near zero.
inline Mat3 so3_exp(Vec3 w) {
  double theta2 = dot(w, w);
  Mat3 K = so3_hat(w);
  Mat3 K2 = K * K;
  double a, b;
  if (theta2 < 1e-16) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::identity() + a * K + b * K2;
}

// Right Jacobian of SO(3): exp((w + dw)^) = exp(w^) exp((Jr(w) dw)^) + O(dw^2).
inline Mat3 so3_right_jacobian(Vec3 w) {
  double theta2 = dot(w, w);
  Mat3 K = so3_hat(w);
  Mat3 K2 = K * K;
  double b, c;
  if (theta2 < 1e-16) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    double theta = std::sqrt(theta2);
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::identity() - b * K + c * K2;
}

// Rigid transform x -> R x + t.
struct Pose {
  Mat3 R = Mat3::identity();
  Vec3 t;

  Vec3 apply(Vec3 x) const { return R * x + t; }
  static Pose identity() { return {}; }
};

// (a * b)(x) = a(b(x)).
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}
inline Pose inverse(const Pose& p) {
  Mat3 Rt = transpose(p.R);
  return {Rt, -(Rt * p.t)};
}

// Quaternion as (w, x, y, z), unit norm.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline Mat3 quat_to_rotation(Quat q) {
  double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
  Mat3 r;
  r.m[0][0] = 1 - 2 * (y * y + z * z);
  r.m[0][1] = 2 * (x * y - z * w);
  r.m[0][2] = 2 * (x * z + y * w);
  r.m[1][0] = 2 * (x * y + z * w);
  r.m[1][1] = 1 - 2 * (x * x + z * z);
  r.m[1][2] = 2 * (y * z - x * w);
  r.m[2][0] = 2 * (x * z - y * w);
  r.m[2][1] = 2 * (y * z + x * w);
  r.m[2][2] = 1 - 2 * (x * x + y * y);
  return r;
}

// Shepperd's method; returns the canonical representative with w >= 0.
inline Quat rotation_to_quat(const Mat3& R) {
  Quat q;
  double tr = trace(R);
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (R.m[2][1] - R.m[1][2]) / s;
    q.y = (R.m[0][2] - R.m[2][0]) / s;
    q.z = (R.m[1][0] - R.m[0][1]) / s;
  } else if (R.m[0][0] > R.m[1][1] && R.m[0][0] > R.m[2][2]) {
    double s = std::sqrt(1.0 + R.m[0][0] - R.m[1][1] - R.m[2][2]) * 2.0;
    q.w = (R.m[2][1] - R.m[1][2]) / s;
    q.x = 0.25 * s;
    q.y = (R.m[0][1] + R.m[1][0]) / s;
    q.z = (R.m[0][2] + R.m[2][0]) / s;
  } else if (R.m[1][1] > R.m[2][2]) {
    double s = std::sqrt(1.0 + R.m[1][1] - R.m[0][0] - R.m[2][2]) * 2.0;
    q.w = (R.m[0][2] - R.m[2][0]) / s;
    q.x = (R.m[0][1] + R.m[1][0]) / s;
    q.y = 0.25 * s;
    q.z = (R.m[1][2] + R.m[2][1]) / s;
  } else {
    double s = std::sqrt(1.0 + R.m[2][2] - R.m[0][0] - R.m[1][1]) * 2.0;
    q.w = (R.m[1][0] - R.m[0][1]) / s;
    q.x = (R.m[0][2] + R.m[2][0]) / s;
    q.y = (R.m[1][2] + R.m[2][1]) / s;
    q.z = 0.25 * s;
  }
  if (q.w < 0.0) {
    q.w = -q.w;
    q.x = -q.x;
    q.y = -q.y;
    q.z = -q.z;
  }
  return q;
}

}  // namespace resim
