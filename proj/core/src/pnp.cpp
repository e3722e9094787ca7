#include "satpose/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

namespace satpose {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Correspondence {
  Vec3 pw;
  Vec2 uv;
};

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

/// Closed-form absolute orientation (quaternion method): the rigid
/// transform taking world points onto camera points in least squares.
Pose fit_rigid_transform(const std::vector<Vec3>& world,
                         const std::vector<Vec3>& camera) {
  const auto n = world.size();
  Vec3 cw = Vec3::Zero(), cc = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cw += world[i];
    cc += camera[i];
  }
  cw /= static_cast<double>(n);
  cc /= static_cast<double>(n);

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i)
    h += (world[i] - cw) * (camera[i] - cc).transpose();

  Eigen::Matrix4d nmat;
  const double sxx = h(0, 0), sxy = h(0, 1), sxz = h(0, 2);
  const double syx = h(1, 0), syy = h(1, 1), syz = h(1, 2);
  const double szx = h(2, 0), szy = h(2, 1), szz = h(2, 2);
  nmat << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
          syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
          szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
          sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(nmat);
  const Eigen::Vector4d qv = es.eigenvectors().col(3);  // largest eigenvalue
  const Quaternion q = Quaternion{qv(0), qv(1), qv(2), qv(3)}.normalized().canonical();
  Pose pose;
  pose.q = q;
  pose.t = cc - quat_to_rotmat(q) * cw;
  return pose;
}

double reprojection_error_sum(const CameraIntrinsics& cam,
                              const std::vector<Correspondence>& corr,
                              const Pose& pose) {
  const Mat3 r = pose.rotation();
  double sum = 0.0;
  for (const auto& c : corr) {
    const Vec3 pc = r * c.pw + pose.t;
    if (pc.z() <= 0.0) return std::numeric_limits<double>::infinity();
    const double u = cam.fpx() * pc.x() / pc.z() + cam.c_x;
    const double v = cam.fpy() * pc.y() / pc.z() + cam.c_y;
    sum += (Vec2(u, v) - c.uv).norm();
  }
  return sum;
}

// --- EPnP internals --------------------------------------------------------

struct ControlPoints {
  std::vector<Vec3> cw;  // 4 (general) or 3 (planar)
  bool planar = false;
};

ControlPoints choose_control_points(const std::vector<Correspondence>& corr) {
  const auto n = corr.size();
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corr) centroid += c.pw;
  centroid /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  for (const auto& c : corr) {
    const Vec3 d = c.pw - centroid;
    cov += d * d.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);  // eigenvalues ascending
  const Vec3 evals = es.eigenvalues().cwiseMax(0.0);
  const double lmax = evals(2);
  if (lmax <= 0.0 || evals(1) / lmax < 1e-12)
    throw DegenerateGeometryError("control points: reference points are collinear");

  ControlPoints cp;
  cp.planar = evals(0) / lmax < 1e-8;
  cp.cw.push_back(centroid);
  const int ndirs = cp.planar ? 2 : 3;
  for (int k = 0; k < ndirs; ++k) {
    const int col = 2 - k;  // largest eigenvalue first
    cp.cw.push_back(centroid + std::sqrt(evals(col) / static_cast<double>(n)) *
                                   es.eigenvectors().col(col));
  }
  return cp;
}

/// Barycentric coordinates of each reference point in the control-point
/// basis; the first coordinate is 1 minus the rest.
MatrixXd compute_alphas(const std::vector<Correspondence>& corr,
                        const ControlPoints& cp) {
  const auto n = corr.size();
  const int nc = static_cast<int>(cp.cw.size());
  MatrixXd basis(3, nc - 1);
  for (int j = 1; j < nc; ++j) basis.col(j - 1) = cp.cw[static_cast<std::size_t>(j)] - cp.cw[0];

  // For the planar case the basis is 3x2; least squares projects the point
  // onto the control-point plane.
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(basis);
  MatrixXd alphas(n, nc);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd a = cod.solve(corr[i].pw - cp.cw[0]);
    double a0 = 1.0;
    for (int j = 0; j < nc - 1; ++j) {
      alphas(static_cast<Eigen::Index>(i), j + 1) = a(j);
      a0 -= a(j);
    }
    alphas(static_cast<Eigen::Index>(i), 0) = a0;
  }
  return alphas;
}

/// Pairs (a, b) of control-point indices for the distance constraints.
std::vector<std::pair<int, int>> control_pairs(int nc) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < nc; ++a)
    for (int b = a + 1; b < nc; ++b) pairs.emplace_back(a, b);
  return pairs;
}

/// Column order of the beta-product vector for nv kernel vectors:
/// [b11, b12, b22, b13, b23, b33, b14, b24, b34, b44][:ncols(nv)].
int beta_column(int k, int l) {  // k <= l
  return l * (l + 1) / 2 + k;
}

int beta_columns(int nv) { return nv * (nv + 1) / 2; }

VectorXd beta_products(const VectorXd& betas) {
  const int nv = static_cast<int>(betas.size());
  VectorXd prod(beta_columns(nv));
  for (int l = 0; l < nv; ++l)
    for (int k = 0; k <= l; ++k)
      prod(beta_column(k, l)) = betas(k) * betas(l);
  return prod;
}

/// L matrix of the distance constraints: row per control-point pair,
/// column per beta product (off-diagonal products carry the factor 2).
MatrixXd compute_l(const std::vector<MatrixXd>& kernel_cps,
                   const std::vector<std::pair<int, int>>& pairs) {
  const int nv = static_cast<int>(kernel_cps.size());
  MatrixXd l(static_cast<Eigen::Index>(pairs.size()), beta_columns(nv));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::vector<Vec3> dv(static_cast<std::size_t>(nv));
    for (int k = 0; k < nv; ++k)
      dv[static_cast<std::size_t>(k)] =
          kernel_cps[static_cast<std::size_t>(k)].row(pairs[p].first) -
          kernel_cps[static_cast<std::size_t>(k)].row(pairs[p].second);
    for (int lcol = 0; lcol < nv; ++lcol)
      for (int k = 0; k <= lcol; ++k)
        l(static_cast<Eigen::Index>(p), beta_column(k, lcol)) =
            (k == lcol ? 1.0 : 2.0) *
            dv[static_cast<std::size_t>(k)].dot(dv[static_cast<std::size_t>(lcol)]);
  }
  return l;
}

VectorXd solve_beta_subset(const MatrixXd& l, const VectorXd& rho,
                           const std::vector<int>& cols) {
  MatrixXd lsub(l.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    lsub.col(static_cast<Eigen::Index>(j)) = l.col(cols[j]);
  return lsub.colPivHouseholderQr().solve(rho);
}

/// Initial beta estimates for the standard EPnP cases. Case 1 keeps only
/// products with beta_1, case 2 the (beta_1, beta_2) block, case 3 adds the
/// beta_3 cross terms. The overall sign is irrelevant; the depth check in
/// camera_control_points fixes it.
VectorXd approx_betas(const MatrixXd& l, const VectorXd& rho, int nv, int ncase) {
  VectorXd betas = VectorXd::Zero(nv);
  if (ncase == 1) {
    // [B11, B12, B13, B14]
    std::vector<int> cols{beta_column(0, 0)};
    for (int k = 1; k < nv; ++k) cols.push_back(beta_column(0, k));
    const VectorXd b = solve_beta_subset(l, rho, cols);
    const double sign = b(0) < 0.0 ? -1.0 : 1.0;
    betas(0) = std::sqrt(std::abs(b(0)));
    if (betas(0) > 0.0)
      for (int k = 1; k < nv; ++k) betas(k) = sign * b(k) / betas(0);
  } else if (ncase == 2) {
    // [B11, B12, B22]
    const VectorXd b = solve_beta_subset(
        l, rho, {beta_column(0, 0), beta_column(0, 1), beta_column(1, 1)});
    betas(0) = std::sqrt(std::abs(b(0)));
    betas(1) = (b(0) >= 0.0) == (b(2) >= 0.0) ? std::sqrt(std::abs(b(2))) : 0.0;
    if (b(1) < 0.0) betas(0) = -betas(0);  // relative sign from B12
  } else {
    // [B11, B12, B22, B13, B23]
    const VectorXd b = solve_beta_subset(
        l, rho,
        {beta_column(0, 0), beta_column(0, 1), beta_column(1, 1),
         beta_column(0, 2), beta_column(1, 2)});
    betas(0) = std::sqrt(std::abs(b(0)));
    betas(1) = (b(0) >= 0.0) == (b(2) >= 0.0) ? std::sqrt(std::abs(b(2))) : 0.0;
    if (b(1) < 0.0) betas(0) = -betas(0);
    if (betas(0) != 0.0) betas(2) = b(3) / betas(0);
  }
  return betas;
}

/// Gauss-Newton refinement of betas against the control-point distance
/// constraints.
void refine_betas(const MatrixXd& l, const VectorXd& rho, VectorXd& betas,
                  int iterations) {
  const int nv = static_cast<int>(betas.size());
  for (int it = 0; it < iterations; ++it) {
    const VectorXd f = l * beta_products(betas) - rho;
    MatrixXd jac(l.rows(), nv);
    for (int k = 0; k < nv; ++k) {
      VectorXd dprod = VectorXd::Zero(beta_columns(nv));
      for (int m = 0; m < nv; ++m) {
        const int col = beta_column(std::min(k, m), std::max(k, m));
        dprod(col) += betas(m) * (k == m ? 2.0 : 1.0);
      }
      jac.col(k) = l * dprod;
    }
    const VectorXd step = jac.colPivHouseholderQr().solve(-f);
    if (!step.allFinite()) break;
    betas += step;
  }
}

/// Camera-frame control points from betas and kernel vectors, sign-fixed so
/// that most reference points land in front of the camera.
std::vector<Vec3> camera_control_points(const std::vector<MatrixXd>& kernel_cps,
                                        const VectorXd& betas,
                                        const MatrixXd& alphas) {
  const int nc = static_cast<int>(kernel_cps[0].rows());
  std::vector<Vec3> cc(static_cast<std::size_t>(nc), Vec3::Zero());
  for (int k = 0; k < static_cast<int>(betas.size()); ++k)
    for (int j = 0; j < nc; ++j)
      cc[static_cast<std::size_t>(j)] +=
          betas(k) * kernel_cps[static_cast<std::size_t>(k)].row(j).transpose();

  int negative_depths = 0;
  for (Eigen::Index i = 0; i < alphas.rows(); ++i) {
    double z = 0.0;
    for (int j = 0; j < nc; ++j) z += alphas(i, j) * cc[static_cast<std::size_t>(j)].z();
    if (z < 0.0) ++negative_depths;
  }
  if (2 * negative_depths > alphas.rows())
    for (auto& c : cc) c = -c;
  return cc;
}

}  // namespace

double reprojection_rms(const CameraIntrinsics& cam, const KeypointSet3D& pts3d,
                        const KeypointSet2D& pts2d, const Pose& pose) {
  const Mat3 r = pose.rotation();
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < kKeypointCount; ++i) {
    if (!pts2d.visible[static_cast<std::size_t>(i)]) continue;
    const Vec3 pc = r * pts3d[i] + pose.t;
    if (pc.z() <= 0.0) return std::numeric_limits<double>::infinity();
    const Vec2 proj(cam.fpx() * pc.x() / pc.z() + cam.c_x,
                    cam.fpy() * pc.y() / pc.z() + cam.c_y);
    sum += (proj - pts2d[i]).squaredNorm();
    ++n;
  }
  if (n == 0) return 0.0;
  return std::sqrt(sum / n);
}

Pose solve_epnp(const CameraIntrinsics& cam, const KeypointSet3D& pts3d,
                const KeypointSet2D& pts2d) {
  std::vector<Correspondence> corr;
  for (int i = 0; i < kKeypointCount; ++i)
    if (pts2d.visible[static_cast<std::size_t>(i)])
      corr.push_back({pts3d[i], pts2d[i]});

  if (corr.size() < 4)
    throw InsufficientCorrespondencesError(
        "solve_epnp: " + std::to_string(corr.size()) +
        " visible correspondences, need at least 4");

  const ControlPoints cp = choose_control_points(corr);
  const int nc = static_cast<int>(cp.cw.size());
  const MatrixXd alphas = compute_alphas(corr, cp);

  // M: two rows per correspondence, three columns per control point.
  const auto n = corr.size();
  MatrixXd m(2 * static_cast<Eigen::Index>(n), 3 * nc);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = corr[i].uv.x(), v = corr[i].uv.y();
    for (int j = 0; j < nc; ++j) {
      const double a = alphas(static_cast<Eigen::Index>(i), j);
      m(2 * static_cast<Eigen::Index>(i), 3 * j + 0) = a * cam.fpx();
      m(2 * static_cast<Eigen::Index>(i), 3 * j + 1) = 0.0;
      m(2 * static_cast<Eigen::Index>(i), 3 * j + 2) = a * (cam.c_x - u);
      m(2 * static_cast<Eigen::Index>(i) + 1, 3 * j + 0) = 0.0;
      m(2 * static_cast<Eigen::Index>(i) + 1, 3 * j + 1) = a * cam.fpy();
      m(2 * static_cast<Eigen::Index>(i) + 1, 3 * j + 2) = a * (cam.c_y - v);
    }
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.transpose() * m);
  if (es.info() != Eigen::Success)
    throw DegenerateGeometryError("solve_epnp: eigen decomposition failed");

  // Kernel vectors (ascending eigenvalues), reshaped to control points.
  const int nv = nc == 4 ? 4 : 3;
  std::vector<MatrixXd> kernel_cps;
  for (int k = 0; k < nv; ++k) {
    MatrixXd cps(nc, 3);
    for (int j = 0; j < nc; ++j)
      cps.row(j) = es.eigenvectors().col(k).segment<3>(3 * j).transpose();
    kernel_cps.push_back(std::move(cps));
  }

  const auto pairs = control_pairs(nc);
  const MatrixXd l = compute_l(kernel_cps, pairs);
  VectorXd rho(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p)
    rho(static_cast<Eigen::Index>(p)) =
        (cp.cw[static_cast<std::size_t>(pairs[p].first)] -
         cp.cw[static_cast<std::size_t>(pairs[p].second)])
            .squaredNorm();

  std::vector<Vec3> world_pts;
  world_pts.reserve(n);
  for (const auto& c : corr) world_pts.push_back(c.pw);
  Vec3 world_centroid = Vec3::Zero();
  for (const auto& p : world_pts) world_centroid += p;
  world_centroid /= static_cast<double>(n);

  constexpr int kBetaIterations = 10;
  const int max_case = nc == 4 ? 3 : 2;

  std::optional<Pose> best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int ncase = 1; ncase <= max_case; ++ncase) {
    VectorXd betas = approx_betas(l, rho, nv, ncase);
    refine_betas(l, rho, betas, kBetaIterations);
    if (!betas.allFinite()) continue;

    const std::vector<Vec3> cc = camera_control_points(kernel_cps, betas, alphas);
    std::vector<Vec3> camera_pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 pc = Vec3::Zero();
      for (int j = 0; j < nc; ++j)
        pc += alphas(static_cast<Eigen::Index>(i), j) * cc[static_cast<std::size_t>(j)];
      camera_pts[i] = pc;
    }

    const Pose candidate = fit_rigid_transform(world_pts, camera_pts);
    if (candidate.apply(world_centroid).z() <= 0.0) continue;  // cheirality
    const double err = reprojection_error_sum(cam, corr, candidate);
    if (err < best_err) {
      best_err = err;
      best = candidate;
    }
  }

  if (!best)
    throw NoValidPoseError(
        "solve_epnp: every candidate solution places the model behind the camera");
  best->q = best->q.canonical();
  return *best;
}

RefineResult refine_gauss_newton(const CameraIntrinsics& cam,
                                 const KeypointSet3D& pts3d,
                                 const KeypointSet2D& pts2d, const Pose& init,
                                 int max_iterations) {
  RefineResult result;
  result.pose = init;
  double rms = reprojection_rms(cam, pts3d, pts2d, init);
  result.rms_history.push_back(rms);
  if (!std::isfinite(rms)) return result;

  for (int it = 0; it < max_iterations; ++it) {
    const Mat3 r = result.pose.rotation();
    std::vector<int> used;
    for (int i = 0; i < kKeypointCount; ++i)
      if (pts2d.visible[static_cast<std::size_t>(i)]) used.push_back(i);

    MatrixXd jac(2 * static_cast<Eigen::Index>(used.size()), 6);
    VectorXd res(2 * static_cast<Eigen::Index>(used.size()));
    for (std::size_t row = 0; row < used.size(); ++row) {
      const int i = used[row];
      const Vec3 rp = r * pts3d[i];
      const Vec3 pc = rp + result.pose.t;
      const double z = pc.z();
      const Vec2 proj(cam.fpx() * pc.x() / z + cam.c_x,
                      cam.fpy() * pc.y() / z + cam.c_y);
      res.segment<2>(2 * static_cast<Eigen::Index>(row)) = pts2d[i] - proj;

      Eigen::Matrix<double, 2, 3> dproj;
      dproj << cam.fpx() / z, 0.0, -cam.fpx() * pc.x() / (z * z),
               0.0, cam.fpy() / z, -cam.fpy() * pc.y() / (z * z);
      Eigen::Matrix<double, 3, 6> dpc;
      dpc.block<3, 3>(0, 0) = -skew(rp);  // left-multiplied rotation update
      dpc.block<3, 3>(0, 3) = Mat3::Identity();
      jac.block<2, 6>(2 * static_cast<Eigen::Index>(row), 0) = dproj * dpc;
    }

    Eigen::ColPivHouseholderQR<MatrixXd> qr(jac);
    if (qr.rank() < 6) break;  // singular normal matrix: no usable step
    VectorXd step = qr.solve(res);
    if (!step.allFinite()) break;

    // Step-halving line search; reject anything that does not reduce RMS.
    bool accepted = false;
    for (int halving = 0; halving < 8 && !accepted; ++halving) {
      const Vec3 dtheta = step.head<3>();
      Pose candidate = result.pose;
      if (dtheta.norm() > 0.0)
        candidate.q = (Quaternion::from_axis_angle(dtheta, dtheta.norm()) *
                       candidate.q)
                          .normalized();
      candidate.t += step.tail<3>();
      const double candidate_rms = reprojection_rms(cam, pts3d, pts2d, candidate);
      if (candidate_rms < rms) {
        result.pose = candidate;
        rms = candidate_rms;
        result.rms_history.push_back(rms);
        result.made_progress = true;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    ++result.iterations;
    if (!accepted) break;
    if (rms < 1e-13) break;
  }

  result.pose.q = result.pose.q.canonical();
  return result;
}

}  // namespace satpose
