#include "hoa/joint_refiner.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hoa/error.hpp"
#include "hoa/hand_surface.hpp"
#include "lm.hpp"

namespace hoa {

HandSegmentation segment_hand_points(const std::vector<Vec3>& cloud, const HandModelData& data,
                                     const HandShape& shape, const HandPose& pose,
                                     double threshold) {
  HandSegmentation out;
  if (!cloud.empty()) {
    const MeshIndex index(skin_mesh(data, shape, pose));
    Vec3 lo, hi;
    index.mesh().bounds(lo, hi);
    const Eigen::AlignedBox3d box(lo - Vec3::Constant(threshold), hi + Vec3::Constant(threshold));
    for (const Vec3& p : cloud) {
      if (box.contains(p) && index.unsigned_distance(p) <= threshold) out.points.push_back(p);
    }
  }
  out.empty_warning = out.points.empty();
  return out;
}

namespace {

double object_term(const SceneObject& obj, double lambda1) {
  double term = 0.0;
  if (!obj.cloud.empty()) term = sdf_loss(*obj.sdf, obj.pose, obj.cloud);
  if (obj.prev && lambda1 > 0.0) term += lambda1 * kWeightScale * smoothness_loss(obj.pose, *obj.prev);
  return term;
}

double hand_term(const SceneHand& hand, const HandPose& pose, double lambda3, double lambda1) {
  double term = 0.0;
  if (!hand.cloud.empty()) {
    const HandSurface surface(*hand.data, hand.shape, pose);
    double sum = 0.0;
    for (const Vec3& p : hand.cloud) {
      const double r = surface.signed_distance(p);
      sum += r * r;
    }
    term = sum / static_cast<double>(hand.cloud.size());
  }
  term += lambda3 * kWeightScale * pose.articulation.squaredNorm();
  if (hand.prev && lambda1 > 0.0) {
    term += lambda1 * kWeightScale *
            smoothness_loss(pose.global_transform(), hand.prev->global_transform());
  }
  return term;
}

detail::NormalEquations hand_normal_equations(const SceneHand& hand, const HandPose& pose,
                                              double lambda3, double lambda1) {
  detail::NormalEquations ne;
  ne.hessian = Eigen::MatrixXd::Zero(kPoseParams, kPoseParams);
  ne.gradient = Eigen::VectorXd::Zero(kPoseParams);
  if (!hand.cloud.empty()) {
    const HandSurface surface(*hand.data, hand.shape, pose);
    const double inv_n = 1.0 / static_cast<double>(hand.cloud.size());
    PoseRow j;
    for (const Vec3& p : hand.cloud) {
      const double r = surface.residual(p, &j, nullptr);
      ne.hessian.selfadjointView<Eigen::Lower>().rankUpdate(j.transpose(), inv_n);
      ne.gradient += (inv_n * r) * j.transpose();
    }
    ne.hessian = ne.hessian.selfadjointView<Eigen::Lower>();
  }
  const double w3 = lambda3 * kWeightScale;
  for (int k = 0; k < 3 * kArticulatedJoints; ++k) {
    ne.hessian(kPoseArticulation + k, kPoseArticulation + k) += w3;
    ne.gradient(kPoseArticulation + k) += w3 * pose.articulation(k);
  }
  if (hand.prev && lambda1 > 0.0) {
    const double w1 = lambda1 * kWeightScale;
    Eigen::Matrix<double, 7, 1> r;
    Eigen::Matrix<double, 7, 6> js;
    smoothness_residuals(pose.global_transform(), hand.prev->global_transform(), r, js);
    // Tangent rotation -> axis-angle parameters through the left Jacobian.
    Eigen::Matrix<double, 7, 6> jp;
    jp.leftCols<3>() = js.leftCols<3>() * so3_left_jacobian(pose.global_rotation);
    jp.rightCols<3>() = js.rightCols<3>();
    const std::array<int, 6> cols = {kPoseGlobalRotation, kPoseGlobalRotation + 1,
                                     kPoseGlobalRotation + 2, kPoseTranslation,
                                     kPoseTranslation + 1, kPoseTranslation + 2};
    const Eigen::Matrix<double, 6, 6> h = jp.transpose() * jp;
    const Vec6 g = jp.transpose() * r;
    for (int a = 0; a < 6; ++a) {
      ne.gradient(cols[a]) += w1 * g(a);
      for (int b = 0; b < 6; ++b) ne.hessian(cols[a], cols[b]) += w1 * h(a, b);
    }
  }
  ne.loss = hand_term(hand, pose, lambda3, lambda1);
  return ne;
}

}  // namespace

double joint_loss(const SceneFrame& frame, double lambda3, double lambda1) {
  double total = 0.0;
  if (!frame.objects.empty()) {
    double sum = 0.0;
    for (const auto& obj : frame.objects) sum += object_term(obj, lambda1);
    total += sum / static_cast<double>(frame.objects.size());
  }
  if (!frame.hands.empty()) {
    double sum = 0.0;
    for (const auto& hand : frame.hands) sum += hand_term(hand, hand.pose, lambda3, lambda1);
    total += sum / static_cast<double>(frame.hands.size());
  }
  return total;
}

Eigen::VectorXd joint_loss_gradient(const SceneFrame& frame, double lambda3, double lambda1) {
  const std::size_t no = frame.objects.size();
  const std::size_t nh = frame.hands.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * no + kPoseParams * nh));
  for (std::size_t o = 0; o < no; ++o) {
    const auto& obj = frame.objects[o];
    Vec6 go = Vec6::Zero();
    if (!obj.cloud.empty()) go += sdf_loss_gradient(*obj.sdf, obj.pose, obj.cloud);
    if (obj.prev && lambda1 > 0.0) {
      go += lambda1 * kWeightScale * smoothness_loss_gradient(obj.pose, *obj.prev);
    }
    g.segment<6>(static_cast<Eigen::Index>(6 * o)) = go / static_cast<double>(no);
  }
  for (std::size_t h = 0; h < nh; ++h) {
    const auto& hand = frame.hands[h];
    const auto ne = hand_normal_equations(hand, hand.pose, lambda3, lambda1);
    g.segment<kPoseParams>(static_cast<Eigen::Index>(6 * no + kPoseParams * h)) =
        2.0 * ne.gradient / static_cast<double>(nh);
  }
  return g;
}

SceneFrame perturb_scene(const SceneFrame& frame, const Eigen::VectorXd& delta) {
  SceneFrame out = frame;
  const std::size_t no = frame.objects.size();
  for (std::size_t o = 0; o < no; ++o) {
    out.objects[o].pose =
        frame.objects[o].pose.retract(delta.segment<6>(static_cast<Eigen::Index>(6 * o)));
  }
  for (std::size_t h = 0; h < frame.hands.size(); ++h) {
    const auto d = delta.segment<kPoseParams>(static_cast<Eigen::Index>(6 * no + kPoseParams * h));
    out.hands[h].pose = HandPose::from_vector(frame.hands[h].pose.to_vector() + d);
  }
  return out;
}

double max_penetration(const SceneFrame& frame) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& hand : frame.hands) {
    const TriangleMesh mesh = skin_mesh(*hand.data, hand.shape, hand.pose);
    for (const auto& obj : frame.objects) {
      const RigidTransform inv = obj.pose.inverse();
      for (const Vec3& v : mesh.vertices) worst = std::max(worst, -obj.sdf->query(inv * v));
    }
  }
  return worst;
}

JointRefineResult refine_joint(const SceneFrame& frame, const JointRefineOptions& options) {
  if (frame.hands.size() > 2) throw Error(ErrorCode::kInvalidArgument, "at most two hands");
  for (const auto& obj : frame.objects) {
    if (obj.sdf == nullptr) throw Error(ErrorCode::kInvalidArgument, "object without sdf");
  }
  for (const auto& hand : frame.hands) {
    if (hand.data == nullptr) throw Error(ErrorCode::kInvalidArgument, "hand without model");
  }
  const double l1 = options.lambda1;
  const double l3 = options.lambda3;
  const double max_rot_rad = options.max_rotation_deg * std::numbers::pi / 180.0;
  const PoseGate region{options.max_translation, options.max_rotation_deg};

  SceneFrame state = frame;
  JointRefineResult result;
  result.loss_before = joint_loss(state, l3, l1);
  result.penetration_before = max_penetration(state);

  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    // A sweep that changes nothing would repeat identically.
    bool changed = false;
    for (std::size_t o = 0; o < state.objects.size(); ++o) {
      SceneObject& obj = state.objects[o];
      const RefineResult r =
          refine_pose_sdf(*obj.sdf, obj.cloud, obj.pose, obj.prev, l1, options.object);
      if (r.final_loss < r.initial_loss &&
          region.admits(pose_distance(r.pose, frame.objects[o].pose))) {
        obj.pose = r.pose;
        changed = true;
      }
    }
    for (std::size_t h = 0; h < state.hands.size(); ++h) {
      SceneHand& hand = state.hands[h];
      if (hand.cloud.empty()) continue;
      const HandPose& origin = frame.hands[h].pose;
      auto inside_region = [&](const HandPose& p) {
        if (!region.admits(pose_distance(p.global_transform(), origin.global_transform()))) {
          return false;
        }
        for (int s = 0; s < kArticulatedJoints; ++s) {
          if ((p.articulation.segment<3>(3 * s) - origin.articulation.segment<3>(3 * s)).norm() >
              max_rot_rad) {
            return false;
          }
        }
        return true;
      };
      auto linearize = [&](const HandPose& p) { return hand_normal_equations(hand, p, l3, l1); };
      auto loss = [&](const HandPose& p) {
        return inside_region(p) ? hand_term(hand, p, l3, l1)
                                : std::numeric_limits<double>::infinity();
      };
      auto apply = [](const HandPose& p, const Eigen::VectorXd& d) {
        return HandPose::from_vector(p.to_vector() + d);
      };
      detail::LmOptions opts;
      opts.max_iterations = options.hand_iterations;
      opts.step_tolerance = 1e-7;
      const auto lm = detail::levenberg_marquardt(hand.pose, linearize, loss, apply, opts);
      if (lm.final_loss < lm.initial_loss) {
        hand.pose = lm.state;
        changed = true;
      }
    }
    result.sweep_losses.push_back(joint_loss(state, l3, l1));
    if (!changed) break;
  }

  for (const auto& obj : state.objects) result.object_poses.push_back(obj.pose);
  for (const auto& hand : state.hands) result.hand_poses.push_back(hand.pose);
  result.loss_after = joint_loss(state, l3, l1);
  result.penetration_after = max_penetration(state);
  return result;
}

}  // namespace hoa
