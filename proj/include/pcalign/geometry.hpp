#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pcalign {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat4 = Eigen::Matrix4d;

// Axis-angle rotation (omega, radians) plus translation (tau, scene units).
struct PoseParams {
  Vec3 omega = Vec3::Zero();
  Vec3 tau = Vec3::Zero();

  Vec6 as_vector() const {
    Vec6 v;
    v << omega, tau;
    return v;
  }
  static PoseParams from_vector(const Vec6& v) {
    return {v.head<3>(), v.tail<3>()};
  }
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
      throw std::invalid_argument("intrinsics: principal point outside image");
    if (width < 2 || height < 2)
      throw std::invalid_argument("intrinsics: image too small");
  }
};

// n positions (scene units) with per-point RGB colors in [0,1].
struct PointCloud {
  Eigen::Matrix<double, Eigen::Dynamic, 3> positions;
  Eigen::Matrix<double, Eigen::Dynamic, 3> colors;

  Eigen::Index size() const { return positions.rows(); }
};

struct VisibilityMask {
  std::vector<uint8_t> mask;          // one flag per point
  std::vector<double> depth_buffer;   // width*height, row-major, +inf = empty
  int width = 0, height = 0;

  bool visible(std::size_t j) const { return mask[j] != 0; }
  std::size_t count() const {
    std::size_t c = 0;
    for (uint8_t m : mask) c += m;
    return c;
  }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Rodrigues exponential map.
inline Mat3 rotation_from_axis_angle(const Vec3& omega) {
  double angle = omega.norm();
  if (angle < 1e-14) return Mat3::Identity() + skew(omega);
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

inline Vec3 axis_angle_from_rotation(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

// Wrap |omega| into [0, pi], flipping the axis when needed.
inline PoseParams canonicalize(const PoseParams& theta) {
  PoseParams out = theta;
  double angle = theta.omega.norm();
  if (angle <= M_PI || angle < 1e-14) return out;
  Vec3 axis = theta.omega / angle;
  double wrapped = std::fmod(angle, 2.0 * M_PI);
  if (wrapped > M_PI) wrapped -= 2.0 * M_PI;
  out.omega = axis * wrapped;
  return out;
}

inline Mat4 pose_matrix(const PoseParams& theta) {
  Mat4 T = Mat4::Identity();
  T.topLeftCorner<3, 3>() = rotation_from_axis_angle(theta.omega);
  T.topRightCorner<3, 1>() = theta.tau;
  return T;
}

inline PoseParams pose_from_matrix(const Mat4& T) {
  PoseParams theta;
  theta.omega = axis_angle_from_rotation(T.topLeftCorner<3, 3>());
  theta.tau = T.topRightCorner<3, 1>();
  return theta;
}

inline PoseParams compose(const PoseParams& a, const PoseParams& b) {
  return pose_from_matrix(pose_matrix(a) * pose_matrix(b));
}

inline PoseParams inverse(const PoseParams& theta) {
  Mat3 R = rotation_from_axis_angle(theta.omega);
  PoseParams inv;
  inv.omega = axis_angle_from_rotation(R.transpose());
  inv.tau = -(R.transpose() * theta.tau);
  return inv;
}

inline Vec3 se3_transform(const PoseParams& theta, const Vec3& x) {
  return rotation_from_axis_angle(theta.omega) * x + theta.tau;
}

inline Eigen::Matrix<double, Eigen::Dynamic, 3> se3_transform(
    const PoseParams& theta, const Eigen::Matrix<double, Eigen::Dynamic, 3>& points) {
  Mat3 R = rotation_from_axis_angle(theta.omega);
  return (points * R.transpose()).rowwise() + theta.tau.transpose();
}

// Pinhole projection; caller guarantees z > 0.
inline Vec2 project(const CameraIntrinsics& K, const Vec3& p_cam) {
  if (!(p_cam.z() > 0))
    throw std::domain_error("project: non-positive depth");
  return {K.fx * p_cam.x() / p_cam.z() + K.cx,
          K.fy * p_cam.y() / p_cam.z() + K.cy};
}

// d(u,v)/d(p_cam) for the pinhole model.
inline Mat23 projection_jacobian(const CameraIntrinsics& K, const Vec3& p_cam) {
  if (!(p_cam.z() > 0))
    throw std::domain_error("projection_jacobian: non-positive depth");
  double iz = 1.0 / p_cam.z();
  Mat23 J;
  J << K.fx * iz, 0, -K.fx * p_cam.x() * iz * iz,
       0, K.fy * iz, -K.fy * p_cam.y() * iz * iz;
  return J;
}

// d(R(omega) x + tau)/d(omega, tau). Rotation block via the Gallego-Yezzi
// closed form; translation block is the identity.
inline Mat36 pose_point_jacobian(const PoseParams& theta, const Vec3& x) {
  Mat36 J;
  J.rightCols<3>() = Mat3::Identity();
  const Vec3& w = theta.omega;
  double n2 = w.squaredNorm();
  Mat3 R = rotation_from_axis_angle(w);
  if (n2 < 1e-16) {
    J.leftCols<3>() = -skew(x);
    return J;
  }
  Mat3 I_minus_R = Mat3::Identity() - R;
  for (int i = 0; i < 3; ++i) {
    Vec3 ei = Vec3::Unit(i);
    Mat3 dR = (w(i) * skew(w) + skew(w.cross(I_minus_R * ei))) / n2 * R;
    J.col(i) = dR * x;
  }
  return J;
}

// Z-buffer visibility: bin each in-bounds point to its nearest pixel, keep
// the per-pixel minimum depth, and admit points within depth_eps of it.
// The 1-pixel border margin guarantees sampling support for both gradient
// strategies.
inline VisibilityMask zbuffer_mask(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& points_cam,
    const CameraIntrinsics& K, double depth_eps) {
  if (!(depth_eps > 0))
    throw std::invalid_argument("zbuffer_mask: depth_eps must be positive");
  const Eigen::Index n = points_cam.rows();
  VisibilityMask vis;
  vis.width = K.width;
  vis.height = K.height;
  vis.mask.assign(static_cast<std::size_t>(n), 0);
  vis.depth_buffer.assign(static_cast<std::size_t>(K.width) * K.height,
                          std::numeric_limits<double>::infinity());

  std::vector<int> bin(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 0; j < n; ++j) {
    double z = points_cam(j, 2);
    if (!(z > 0)) continue;
    double u = K.fx * points_cam(j, 0) / z + K.cx;
    double v = K.fy * points_cam(j, 1) / z + K.cy;
    if (!(u >= 1.0 && u <= K.width - 2.0 && v >= 1.0 && v <= K.height - 2.0))
      continue;
    int pu = static_cast<int>(std::lround(u));
    int pv = static_cast<int>(std::lround(v));
    int idx = pv * K.width + pu;
    bin[static_cast<std::size_t>(j)] = idx;
    if (z < vis.depth_buffer[idx]) vis.depth_buffer[idx] = z;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    int idx = bin[static_cast<std::size_t>(j)];
    if (idx < 0) continue;
    if (points_cam(j, 2) <= vis.depth_buffer[idx] + depth_eps)
      vis.mask[static_cast<std::size_t>(j)] = 1;
  }
  return vis;
}

}  // namespace pcalign
