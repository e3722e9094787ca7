#include "satpose/keypoint_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace satpose {

namespace {

struct PickRef {
  int obs_index;   // into the observations span
  int pick_index;  // into that observation's pick list
  Vec2 uv;
};

}  // namespace

RecoverySolution recover_keypoints(const CameraIntrinsics& cam,
                                   std::span<const Observation> observations) {
  if (observations.empty())
    throw InvalidInputError("recover_keypoints: no observations");

  for (const auto& obs : observations) {
    if (obs.picks.empty())
      throw InvalidInputError("recover_keypoints: observation " +
                              std::to_string(obs.image_id) + " has no picks");
    for (const auto& pick : obs.picks)
      if (pick.index < 0 || pick.index >= kKeypointCount)
        throw InvalidInputError("recover_keypoints: pick index " +
                                std::to_string(pick.index) + " out of range");
  }

  // Group picks by keypoint index; the objective decouples over keypoints.
  std::array<std::vector<PickRef>, kKeypointCount> by_point;
  for (int oi = 0; oi < static_cast<int>(observations.size()); ++oi) {
    const auto& obs = observations[static_cast<std::size_t>(oi)];
    for (int pi = 0; pi < static_cast<int>(obs.picks.size()); ++pi) {
      const auto& pick = obs.picks[static_cast<std::size_t>(pi)];
      by_point[static_cast<std::size_t>(pick.index)].push_back(
          {oi, pi, pick.uv});
    }
  }

  const Mat3 k = cam.pixel_matrix();

  RecoverySolution sol;
  sol.scales.resize(observations.size());
  for (std::size_t oi = 0; oi < observations.size(); ++oi)
    sol.scales[oi].resize(observations[oi].picks.size(), 0.0);

  double sq_err_sum = 0.0;
  std::size_t pick_total = 0;

  for (int kp = 0; kp < kKeypointCount; ++kp) {
    const auto& refs = by_point[static_cast<std::size_t>(kp)];
    const int m = static_cast<int>(refs.size());
    if (m < 2)
      throw UnobservablePointError(
          "keypoint " + std::to_string(kp) + " picked in " +
              std::to_string(m) + " image(s); depth needs at least 2",
          kp);

    // Per view j: s_j * p2d_h - K R_j p - K t_j = 0. Unknowns (p, s_1..s_m).
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * m, 3 + m);
    Eigen::VectorXd b(3 * m);
    for (int j = 0; j < m; ++j) {
      const auto& obs = observations[static_cast<std::size_t>(refs[j].obs_index)];
      const Mat3 kr = k * obs.pose.rotation();
      const Vec3 kt = k * obs.pose.t;
      a.block<3, 3>(3 * j, 0) = -kr;
      a(3 * j + 0, 3 + j) = refs[j].uv.x();
      a(3 * j + 1, 3 + j) = refs[j].uv.y();
      a(3 * j + 2, 3 + j) = 1.0;
      b.segment<3>(3 * j) = kt;
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    cod.setThreshold(1e-10);
    if (cod.rank() < 3 + m)
      throw DegenerateGeometryError(
          "keypoint " + std::to_string(kp) +
          ": rank-deficient system (views share a pose or geometry is degenerate)");
    const Eigen::VectorXd x = cod.solve(b);

    sol.points3d[kp] = x.head<3>();
    for (int j = 0; j < m; ++j)
      sol.scales[static_cast<std::size_t>(refs[j].obs_index)]
                [static_cast<std::size_t>(refs[j].pick_index)] = x(3 + j);

    // Pixel-space residual of the recovered point against the picks.
    for (int j = 0; j < m; ++j) {
      const auto& obs = observations[static_cast<std::size_t>(refs[j].obs_index)];
      const Vec2 reproj = project_point(cam, obs.pose, sol.points3d[kp], kp);
      sq_err_sum += (reproj - refs[j].uv).squaredNorm();
      ++pick_total;
    }
  }

  sol.residual_px = std::sqrt(sq_err_sum / static_cast<double>(pick_total));
  return sol;
}

ReprojectionReport reprojection_report(const CameraIntrinsics& cam,
                                       const RecoverySolution& solution,
                                       const KeypointSet3D& truth,
                                       std::span<const Pose> poses,
                                       int num_bins) {
  if (poses.empty())
    throw InvalidInputError("reprojection_report: empty pose list");
  if (num_bins < 1) throw InvalidInputError("reprojection_report: num_bins < 1");

  double lo = poses[0].t.norm(), hi = lo;
  for (const auto& p : poses) {
    lo = std::min(lo, p.t.norm());
    hi = std::max(hi, p.t.norm());
  }
  if (hi <= lo) hi = lo + 1.0;  // single-distance degenerate span

  ReprojectionReport report;
  report.bins.resize(static_cast<std::size_t>(num_bins));
  const double width = (hi - lo) / num_bins;
  for (int b = 0; b < num_bins; ++b) {
    report.bins[static_cast<std::size_t>(b)].range_lo = lo + b * width;
    report.bins[static_cast<std::size_t>(b)].range_hi = lo + (b + 1) * width;
  }

  std::vector<double> err_sum(static_cast<std::size_t>(num_bins), 0.0);
  for (const auto& pose : poses) {
    const int b = std::min(num_bins - 1,
                           static_cast<int>((pose.t.norm() - lo) / width));
    for (int i = 0; i < kKeypointCount; ++i) {
      const Vec2 rec = project_point(cam, pose, solution.points3d[i], i);
      const Vec2 gt = project_point(cam, pose, truth[i], i);
      err_sum[static_cast<std::size_t>(b)] += (rec - gt).norm();
      ++report.bins[static_cast<std::size_t>(b)].point_count;
    }
  }
  for (int b = 0; b < num_bins; ++b) {
    auto& bin = report.bins[static_cast<std::size_t>(b)];
    if (bin.point_count > 0) bin.mean_error_px = err_sum[static_cast<std::size_t>(b)] / bin.point_count;
  }
  return report;
}

std::string ReprojectionReport::to_csv() const {
  std::ostringstream os;
  os << "range_lo_m,range_hi_m,point_count,mean_error_px\n";
  for (const auto& b : bins)
    os << b.range_lo << ',' << b.range_hi << ',' << b.point_count << ','
       << b.mean_error_px << '\n';
  return os.str();
}

std::vector<Observation> read_picks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open picks file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("picks file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw IoError("picks file must be a JSON array");

  std::vector<Observation> out;
  for (const auto& item : doc) {
    Observation obs;
    obs.image_id = item.at("image_id").get<int>();
    const auto& q = item.at("pose").at("q");
    const auto& t = item.at("pose").at("t");
    if (q.size() != 4 || t.size() != 3)
      throw IoError("picks file: pose must have q[4] and t[3]");
    obs.pose.q = Quaternion{q[0], q[1], q[2], q[3]}.normalized();
    obs.pose.t = Vec3(t[0], t[1], t[2]);
    for (const auto& pj : item.at("picks")) {
      Pick p;
      p.index = pj.at("index").get<int>();
      p.uv = Vec2(pj.at("u").get<double>(), pj.at("v").get<double>());
      obs.picks.push_back(p);
    }
    out.push_back(std::move(obs));
  }
  return out;
}

void write_picks_file(const std::string& path, std::span<const Observation> obs) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& o : obs) {
    nlohmann::json picks = nlohmann::json::array();
    for (const auto& p : o.picks)
      picks.push_back({{"index", p.index}, {"u", p.uv.x()}, {"v", p.uv.y()}});
    doc.push_back({{"image_id", o.image_id},
                   {"pose",
                    {{"q", {o.pose.q.w, o.pose.q.x, o.pose.q.y, o.pose.q.z}},
                     {"t", {o.pose.t.x(), o.pose.t.y(), o.pose.t.z()}}}},
                   {"picks", picks}});
  }
  std::ofstream outf(path);
  if (!outf) throw IoError("cannot write picks file: " + path);
  outf << doc.dump(2) << '\n';
}

}  // namespace satpose
