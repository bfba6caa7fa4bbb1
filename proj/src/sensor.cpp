#include "sparsefoot/sensor.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sparsefoot {

void CameraModel::validate() const {
  if (width_px < 1 || height_px < 1)
    throw Error(ErrorCode::InvalidSpec, "camera needs at least one pixel per axis");
  if (!(hfov_rad > 0.0 && hfov_rad < std::numbers::pi) ||
      !(vfov_rad > 0.0 && vfov_rad < std::numbers::pi))
    throw Error(ErrorCode::InvalidSpec, "camera field of view must lie in (0, pi)");
  if (!(min_range_m > 0.0 && min_range_m < max_range_m))
    throw Error(ErrorCode::InvalidSpec, "camera ranges must satisfy 0 < min < max");
}

Eigen::Matrix3d RobotPose::attitude() const {
  return (Eigen::AngleAxisd(pitch_rad, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll_rad, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Matrix3d RobotPose::rotation() const {
  return Eigen::AngleAxisd(yaw_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix() * attitude();
}

Eigen::Isometry3d RobotPose::world_from_base() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation();
  t.translation() = position;
  return t;
}

Eigen::Vector3d pixel_ray(const CameraModel& cam, int u, int v) {
  const double nu = 2.0 * (u + 0.5) / cam.width_px - 1.0;   // -1 left .. +1 right
  const double nv = 2.0 * (v + 0.5) / cam.height_px - 1.0;  // -1 top .. +1 bottom
  return Eigen::Vector3d(1.0, -nu * std::tan(0.5 * cam.hfov_rad), -nv * std::tan(0.5 * cam.vfov_rad))
      .normalized();
}

Eigen::Isometry3d base_from_camera(const CameraModel& cam) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  // Pitching down is a positive rotation about +y for an x-forward, z-up frame.
  t.linear() = Eigen::AngleAxisd(cam.mount_pitch_rad, Eigen::Vector3d::UnitY()).toRotationMatrix();
  t.translation() = cam.mount_offset;
  return t;
}

namespace {

class RayMarcher {
 public:
  RayMarcher(const HeightField& hf, const RenderOptions& options)
      : hf_(hf),
        step_(options.march_step_m > 0.0 ? options.march_step_m : 0.5 * hf.cell_m),
        tol_(options.bisection_tol_m),
        hmax_(hf.heights.maxCoeff()),
        hmin_(hf.heights.minCoeff()),
        rows_(double(hf.rows())),
        cols_(double(hf.cols())),
        heights_(hf.heights.data()),
        stride_(hf.heights.rows()) {}

  // Ray in cell units: cell (fi, fj) and height at parameter t.
  struct CellRay {
    double i0, j0, di, dj, z0, dz;
  };

  CellRay cell_ray(const Eigen::Vector3d& o, const Eigen::Vector3d& d) const {
    const double inv = 1.0 / hf_.cell_m;
    return {(o.x() - hf_.origin.x()) * inv, (o.y() - hf_.origin.y()) * inv, d.x() * inv, d.y() * inv, o.z(), d.z()};
  }

  bool inside(const CellRay& r, double t) const {
    const double fi = std::floor(r.i0 + t * r.di);
    const double fj = std::floor(r.j0 + t * r.dj);
    if (!(fi >= 0.0 && fj >= 0.0 && fi < rows_ && fj < cols_)) return false;
    return r.z0 + t * r.dz <= heights_[Eigen::Index(fj) * stride_ + Eigen::Index(fi)];
  }

  /// Distance along the ray to the first terrain sample, or +inf.
  double cast(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double max_t) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    double t_enter = 0.0;
    double t_exit = max_t;
    if (d.z() < 0.0) {
      t_enter = std::max(0.0, (o.z() - hmax_) / -d.z());
      t_exit = std::min(max_t, (o.z() - hmin_) / -d.z());
    } else if (o.z() > hmax_) {
      return kInf;
    }
    if (t_enter > max_t) return kInf;
    const CellRay r = cell_ray(o, d);
    // Samples sit on the fixed lattice t = k * step so that terrain edits
    // never shift the sampling positions.
    auto k = static_cast<long>(std::floor(t_enter / step_)) - 1;
    k = std::max(k, 0L);
    double lo = double(k) * step_;
    const long k_end = static_cast<long>(std::ceil(t_exit / step_)) + 1;
    for (++k; k <= k_end; ++k) {
      const double t = double(k) * step_;
      if (!inside(r, t)) {
        lo = t;
        continue;
      }
      double hi = t;
      while (hi - lo > tol_) {
        const double mid = 0.5 * (lo + hi);
        if (inside(r, mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return hi;
    }
    return kInf;
  }

 private:
  const HeightField& hf_;
  double step_;
  double tol_;
  double hmax_;
  double hmin_;
  double rows_;
  double cols_;
  const double* heights_;
  Eigen::Index stride_;
};

}  // namespace

DepthImage render_depth(const HeightField& hf, const RobotPose& pose, const CameraModel& cam,
                        double timestamp_s, const RenderOptions& options) {
  cam.validate();
  const Eigen::Isometry3d world_from_cam = pose.world_from_base() * base_from_camera(cam);
  const Eigen::Vector3d origin = world_from_cam.translation();
  for (const Eigen::Vector3d& p : {pose.position, origin}) {
    const auto h = hf.height_at(p.head<2>());
    if (h && p.z() < *h - 1e-6) throw Error(ErrorCode::InvalidPose, "pose lies below the terrain");
  }

  DepthImage img;
  img.camera = cam;
  img.timestamp_s = timestamp_s;
  img.ranges.resize(cam.height_px, cam.width_px);
  const RayMarcher marcher(hf, options);
  const Eigen::Matrix3d rot = world_from_cam.linear();
  for (int v = 0; v < cam.height_px; ++v) {
    for (int u = 0; u < cam.width_px; ++u) {
      const Eigen::Vector3d dir = rot * pixel_ray(cam, u, v);
      const double t = marcher.cast(origin, dir, cam.max_range_m);
      img.ranges(v, u) = t >= cam.max_range_m ? cam.max_range_m : std::max(t, cam.min_range_m);
    }
  }
  return img;
}

DepthImage apply_noise(const DepthImage& img, const NoiseModel& noise) {
  if (noise.gaussian_sigma_m <= 0.0 && noise.dropout_prob <= 0.0) return img;
  DepthImage out = img;
  const auto& cam = img.camera;
  const auto stamp = static_cast<std::uint64_t>(std::llround(img.timestamp_s * 1e6));
  const std::uint64_t frame_key = hash_combine(substream(noise.seed, "depth_noise"), stamp);
  for (Eigen::Index v = 0; v < out.ranges.rows(); ++v) {
    for (Eigen::Index u = 0; u < out.ranges.cols(); ++u) {
      if (img.is_sentinel(v, u)) continue;
      Rng rng(hash_combine(frame_key, std::uint64_t(v * out.ranges.cols() + u)));
      const double drop = rng.uniform();
      const double gauss = rng.normal();
      if (drop < noise.dropout_prob) {
        out.ranges(v, u) = cam.max_range_m;
        continue;
      }
      out.ranges(v, u) = std::clamp(img.ranges(v, u) + noise.gaussian_sigma_m * gauss,
                                    cam.min_range_m, cam.max_range_m);
    }
  }
  return out;
}

std::vector<ClockTick> sensor_clock(std::int64_t n_ticks, int policy_rate_hz, int depth_rate_hz) {
  if (policy_rate_hz <= 0 || depth_rate_hz <= 0 || depth_rate_hz > policy_rate_hz ||
      policy_rate_hz % depth_rate_hz != 0)
    throw Error(ErrorCode::RateMismatch, "depth rate " + std::to_string(depth_rate_hz) +
                                             " Hz does not divide policy rate " +
                                             std::to_string(policy_rate_hz) + " Hz");
  const std::int64_t every = policy_rate_hz / depth_rate_hz;
  std::vector<ClockTick> ticks;
  ticks.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n_ticks, 0)));
  for (std::int64_t t = 0; t < n_ticks; ++t) ticks.push_back({t, t % every == 0});
  return ticks;
}

}  // namespace sparsefoot
