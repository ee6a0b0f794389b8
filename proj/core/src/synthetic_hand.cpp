// Procedural hand: one capsule per bone of the 21-joint MediaPipe skeleton,
// rest pose with the palm in the x-y plane, fingers pointing along +y and
// the wrist at the origin.

#include <cmath>
#include <numbers>

#include "hoa/hand_model.hpp"

namespace hoa {

namespace {

constexpr int kAround = 8;
constexpr int kCapRings = 2;
constexpr std::array<double, 3> kCylinderRings = {0.0, 0.5, 1.0};
constexpr int kRingsPerCapsule = 2 * kCapRings + 3;
constexpr int kVertsPerCapsule = kRingsPerCapsule * kAround + 2;

constexpr std::array<int, kHandJoints> kParents = {
    -1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19};

struct Finger {
  Vec3 base;
  Vec3 direction;
  std::array<double, 3> lengths;
  std::array<double, 3> radii;
};

std::array<Finger, 5> fingers() {
  const std::array<double, 3> finger_radii = {0.009, 0.008, 0.007};
  return {{
      {{-0.020, 0.020, 0.0}, Vec3(-0.55, 0.83, 0.0).normalized(), {0.040, 0.032, 0.027},
       {0.011, 0.009, 0.008}},
      {{-0.025, 0.085, 0.0}, Vec3(-0.1, 1.0, 0.0).normalized(), {0.040, 0.024, 0.020},
       finger_radii},
      {{-0.003, 0.090, 0.0}, Vec3(0.0, 1.0, 0.0), {0.045, 0.027, 0.021}, finger_radii},
      {{0.018, 0.085, 0.0}, Vec3(0.08, 1.0, 0.0).normalized(), {0.042, 0.026, 0.020},
       finger_radii},
      {{0.036, 0.075, 0.0}, Vec3(0.18, 1.0, 0.0).normalized(), {0.032, 0.020, 0.018},
       finger_radii},
  }};
}

constexpr double kPalmRadius = 0.011;

Vec3 to_float(const Vec3& v) {
  return v.cast<float>().cast<double>();
}

}  // namespace

HandModelData make_synthetic_hand_model(Handedness handedness) {
  const auto fs = fingers();
  JointArray joints;
  std::array<double, kHandJoints> radius{};
  joints[0] = Vec3::Zero();
  for (int f = 0; f < 5; ++f) {
    const int first = 1 + 4 * f;
    joints[first] = fs[f].base;
    radius[first] = kPalmRadius;
    for (int b = 0; b < 3; ++b) {
      joints[first + b + 1] = joints[first + b] + fs[f].lengths[b] * fs[f].direction;
      radius[first + b + 1] = fs[f].radii[b];
    }
  }

  const int bones = kHandJoints - 1;
  const int nv = bones * kVertsPerCapsule;
  Eigen::MatrixX3d verts(nv, 3);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(nv, kHandJoints);
  Eigen::MatrixXd regressor = Eigen::MatrixXd::Zero(kHandJoints, nv);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * nv, kShapeParams);
  std::vector<Triangle> faces;

  for (int i = 1; i < kHandJoints; ++i) {
    const int p = kParents[i];
    const int finger = (i - 1) / 4;
    const bool palm_bone = p == 0;
    const Vec3 a = joints[p];
    const Vec3 b = joints[i];
    const double length = (b - a).norm();
    const Vec3 u = (b - a) / length;
    const Vec3 e2(0.0, 0.0, 1.0);
    const Vec3 e1 = e2.cross(u);
    const double r = radius[i];
    const int v0 = (i - 1) * kVertsPerCapsule;

    // Ring list ordered along the axis: cap at a, cylinder, cap at b.
    struct Ring {
      double axial;  // offset along u from a
      double radial;
      double s;      // skinning coordinate
    };
    std::vector<Ring> rings;
    for (int c = kCapRings; c >= 1; --c) {
      const double lat = std::numbers::pi / 2.0 * c / (kCapRings + 1);
      rings.push_back({-r * std::sin(lat), r * std::cos(lat), 0.0});
    }
    for (double s : kCylinderRings) rings.push_back({s * length, r, s});
    for (int c = 1; c <= kCapRings; ++c) {
      const double lat = std::numbers::pi / 2.0 * c / (kCapRings + 1);
      rings.push_back({length + r * std::sin(lat), r * std::cos(lat), 1.0});
    }

    std::vector<Vec3> pts;
    std::vector<double> svals;
    pts.push_back(a - r * u);
    svals.push_back(0.0);
    for (const Ring& ring : rings) {
      for (int k = 0; k < kAround; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / kAround;
        pts.push_back(a + ring.axial * u +
                      ring.radial * (std::cos(phi) * e1 + std::sin(phi) * e2));
        svals.push_back(ring.s);
      }
    }
    pts.push_back(b + r * u);
    svals.push_back(1.0);

    for (int n = 0; n < kVertsPerCapsule; ++n) {
      const int v = v0 + n;
      const Vec3 x = to_float(pts[n]);
      verts.row(v) = x.transpose();

      const double s = svals[n];
      if (s <= 0.25) {
        const double wp = p == 0 ? 1.0 : 0.5 + 2.0 * s;
        weights(v, p) += wp;
        if (p != 0) weights(v, kParents[p]) += 1.0 - wp;
      } else if (s >= 0.75) {
        const double wi = 2.0 * (s - 0.75);
        weights(v, i) += wi;
        weights(v, p) += 1.0 - wi;
      } else {
        weights(v, p) = 1.0;
      }

      // Shape basis, each component an affine map of the rest position.
      Eigen::Matrix<double, 3, kShapeParams> d =
          Eigen::Matrix<double, 3, kShapeParams>::Zero();
      d.col(0) = 0.04 * x;
      if (!palm_bone) {
        const Finger& fg = fs[finger];
        d.col(1 + finger) = 0.08 * (x - fg.base).dot(fg.direction) * fg.direction;
      }
      d.col(6) = Vec3(0.08 * x.x(), 0.0, 0.0);
      const double along = std::clamp((x - a).dot(u), 0.0, length);
      d.col(7) = 0.12 * (x - (a + along * u));
      d.col(8) = Vec3(0.0, 0.06 * x.y(), 0.0);
      if (finger == 0) d.col(9) = Vec3(-0.1 * x.y(), 0.0, 0.0);
      for (int c = 0; c < kShapeParams; ++c) {
        basis.block<3, 1>(3 * v, c) = to_float(d.col(c));
      }
    }

    // Joint i is the centroid of the last cylinder ring; the wrist uses the
    // first cylinder ring of the middle-finger palm bone.
    const int last_cyl = 1 + (kCapRings + 2) * kAround;
    for (int k = 0; k < kAround; ++k) regressor(i, v0 + last_cyl + k) = 1.0 / kAround;
    if (i == 9) {
      const int first_cyl = 1 + kCapRings * kAround;
      for (int k = 0; k < kAround; ++k) regressor(0, v0 + first_cyl + k) = 1.0 / kAround;
    }

    const int pole_a = v0;
    const int pole_b = v0 + kVertsPerCapsule - 1;
    auto ring_vertex = [&](int ring, int k) { return v0 + 1 + ring * kAround + (k % kAround); };
    for (int k = 0; k < kAround; ++k) {
      faces.push_back({pole_a, ring_vertex(0, k + 1), ring_vertex(0, k)});
    }
    for (int ring = 0; ring + 1 < kRingsPerCapsule; ++ring) {
      for (int k = 0; k < kAround; ++k) {
        const int a0 = ring_vertex(ring, k), a1 = ring_vertex(ring, k + 1);
        const int b0 = ring_vertex(ring + 1, k), b1 = ring_vertex(ring + 1, k + 1);
        faces.push_back({a0, a1, b1});
        faces.push_back({a0, b1, b0});
      }
    }
    for (int k = 0; k < kAround; ++k) {
      faces.push_back(
          {ring_vertex(kRingsPerCapsule - 1, k), ring_vertex(kRingsPerCapsule - 1, k + 1), pole_b});
    }
  }

  HandModelData right(std::move(verts), std::move(faces), std::move(regressor),
                      std::move(weights), std::move(basis), kParents, Handedness::kRight);
  return handedness == Handedness::kRight ? right : mirror_model(right);
}

}  // namespace hoa
