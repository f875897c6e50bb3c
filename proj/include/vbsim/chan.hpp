#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vbsim/geom.hpp"
#include "vbsim/vbs.hpp"

// Coarse channel reconstruction from VBS geometry: per-path angles and
// distances, empirical path loss, near-field ULA steering vectors, and the
// polar-domain (angle x distance) codebook.

namespace vbsim::chan {

using geom::Vec3;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

struct PathParams {
  double aoa_az = 0.0, aoa_el = 0.0;  // radians, at the UE
  double aod_az = 0.0, aod_el = 0.0;  // radians, at the BS
  double r_rx = 0.0, r_tx = 0.0;      // meters, scatter-to-array distances
  double gain_mag = 0.0;              // linear amplitude
  int order = 0;
  int index = 0;
};

struct ArrayConfig {
  int n_elements = 1;
  double spacing = 0.0;     // meters; half wavelength unless configured
  double az_offset = 0.0;   // radians added to computed azimuths
  double el_offset = 0.0;   // radians added to computed elevations
};

inline ArrayConfig make_ula(int n_elements, double f_c, double az_offset = 0.0,
                            double el_offset = 0.0) {
  ArrayConfig c;
  c.n_elements = n_elements;
  c.spacing = kSpeedOfLight / f_c / 2.0;
  c.az_offset = az_offset;
  c.el_offset = el_offset;
  return c;
}

// ---- path loss -----------------------------------------------------------

/// Free-space loss in dB: 20log10(4 pi f_c / c) + 20log10(d).
inline double path_loss_free(double f_c, double d) {
  if (!(d > 0.0)) throw std::domain_error("path_loss_free: distance must be positive");
  if (!(f_c > 0.0)) throw std::domain_error("path_loss_free: frequency must be positive");
  return 20.0 * std::log10(4.0 * kPi * f_c / kSpeedOfLight) + 20.0 * std::log10(d);
}

/// u-bounce reflection loss in dB: free-space + Gamma + 10log10(u).
inline double path_loss_reflect(double f_c, double d, int u, double gamma_db) {
  if (u < 1) throw std::domain_error("path_loss_reflect: u must be >= 1");
  return path_loss_free(f_c, d) + gamma_db + 10.0 * std::log10(static_cast<double>(u));
}

/// Amplitude 10^(-PL/20): free-space over r_tx for the direct path,
/// single-bounce loss over r_rx + r_tx otherwise.
inline double path_gain(const PathParams& p, double f_c, double gamma_db) {
  const double pl = p.order == 0 ? path_loss_free(f_c, p.r_tx)
                                 : path_loss_reflect(f_c, p.r_rx + p.r_tx, 1, gamma_db);
  return std::pow(10.0, -pl / 20.0);
}

// ---- geometry ------------------------------------------------------------

namespace detail_chan {

inline void fill_angles(const Vec3& p_bs, const Vec3& p_ue, const ArrayConfig& bs_cfg,
                        const ArrayConfig& ue_cfg, PathParams& out) {
  out.aod_az = std::atan2(p_bs.y, p_bs.x) + bs_cfg.az_offset;
  out.aod_el = std::acos(std::clamp(p_bs.z / geom::norm(p_bs), -1.0, 1.0)) + bs_cfg.el_offset;
  out.aoa_az = std::atan2(p_ue.y, p_ue.x) + ue_cfg.az_offset;
  out.aoa_el = std::acos(std::clamp(p_ue.z / geom::norm(p_ue), -1.0, 1.0)) + ue_cfg.el_offset;
}

}  // namespace detail_chan

/// Geometric path parameters for one record (gain left at zero). The direct
/// path uses the BS/UE displacement; a reflection path routes through the
/// bounce point implied by the record location. Returns nullopt when the UE
/// is not strictly on the reflecting side (no physical bounce).
inline std::optional<PathParams> path_params(const vbs::VbsRecord& rec, const Vec3& o_bs,
                                             const Vec3& o_ue, const ArrayConfig& bs_cfg,
                                             const ArrayConfig& ue_cfg) {
  PathParams out;
  out.order = rec.order;
  out.index = rec.index;
  if (rec.order == 0) {
    const Vec3 p_bs = o_ue - o_bs;
    const Vec3 p_ue = o_bs - o_ue;
    const double d = geom::norm(p_bs);
    if (d <= geom::kMinRayParam) return std::nullopt;
    detail_chan::fill_angles(p_bs, p_ue, bs_cfg, ue_cfg, out);
    out.r_rx = out.r_tx = d;
    return out;
  }
  // Bounce must lie strictly between the image and the UE: positive
  // denominator and UE on the far (front) side of the mirror plane.
  const Vec3 b = o_bs - rec.location;
  const Vec3 u = o_ue - rec.location;
  const double den = 2.0 * geom::dot(b, u);
  if (den <= geom::kMinReflectionDen || geom::norm_sq(b) >= den) return std::nullopt;
  const auto o_ref = geom::reflection_point(rec.location, o_bs, o_ue);
  if (!o_ref) return std::nullopt;
  const Vec3 p_bs = *o_ref - o_bs;
  const Vec3 p_ue = *o_ref - o_ue;
  if (geom::norm(p_bs) <= geom::kMinRayParam || geom::norm(p_ue) <= geom::kMinRayParam)
    return std::nullopt;
  detail_chan::fill_angles(p_bs, p_ue, bs_cfg, ue_cfg, out);
  out.r_tx = geom::norm(p_bs);
  out.r_rx = geom::norm(p_ue);
  return out;
}

// ---- steering vectors and codebooks ---------------------------------------

/// Near-field ULA steering vector: element n carries phase
/// k_c (r^(n) - r) with r^(n) the element-to-scatter distance for an array
/// laid out along +y, normalized to unit norm.
inline Eigen::VectorXcd steering_vector(double el, double az, double r, const ArrayConfig& cfg,
                                        double f_c) {
  if (!(r > 0.0)) throw std::domain_error("steering_vector: r must be positive");
  const int n = cfg.n_elements;
  const double k_c = 2.0 * kPi * f_c / kSpeedOfLight;
  const double omega = std::sin(el) * std::sin(az);
  Eigen::VectorXcd a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    const double delta = static_cast<double>(i) - (static_cast<double>(n) - 1.0) / 2.0;
    const double dd = delta * cfg.spacing;
    // r^(n) - r computed in a cancellation-free form (r can be huge for the
    // far-field sample).
    const double num = dd * dd - 2.0 * r * omega * dd;
    const double rn = std::sqrt(r * r + num);
    const double diff = num / (rn + r);
    a(i) = std::polar(scale, k_c * diff);
  }
  return a;
}

struct CodebookColumn {
  double sin_az = 0.0;  // effective spatial frequency sin(el)*sin(az)
  double az = 0.0;
  double el = kPi / 2.0;
  double r = 0.0;  // sampled distance (the far ring stands in for infinity)
};

struct Codebook {
  Eigen::MatrixXcd mat;  // N x M, unit-norm columns of constant-magnitude entries
  std::vector<CodebookColumn> columns;

  int size() const { return static_cast<int>(mat.cols()); }
};

struct PolarGridSpec {
  double r_min = 3.0;
  double r_far_scale = 10.0;   // times the Rayleigh distance
  double min_ring_corr = 0.95; // adjacent-ring codeword correlation floor
  int max_rings_per_angle = 0; // 0 = derive from min_ring_corr; 1 = far-field only
};

inline double rayleigh_distance(const ArrayConfig& cfg, double f_c) {
  const double lambda = kSpeedOfLight / f_c;
  const double aperture = (cfg.n_elements - 1) * cfg.spacing;
  return 2.0 * aperture * aperture / lambda;
}

/// Polar-domain codebook: N angles uniform in sin space over [-1, 1), each
/// with distance rings uniform in 1/r from the far-field sample down to
/// r_min. The per-angle ring count is the smallest for which adjacent rings
/// still correlate at min_ring_corr; near endfire the near field collapses
/// and a single ring remains.
inline Codebook build_polar_codebook(const ArrayConfig& cfg, double f_c,
                                     const PolarGridSpec& spec = {}) {
  if (cfg.n_elements < 1) throw std::invalid_argument("codebook: n_elements must be >= 1");
  const int n = cfg.n_elements;
  const double r_far = std::max(spec.r_far_scale * rayleigh_distance(cfg, f_c), spec.r_min);

  std::vector<CodebookColumn> cols;
  for (int i = 0; i < n; ++i) {
    const double s = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
    const double az = std::asin(s);
    const double el = kPi / 2.0;

    std::vector<double> rings{r_far};
    if (spec.max_rings_per_angle != 1 && r_far > spec.r_min * (1.0 + 1e-9)) {
      const double u_far = 1.0 / r_far;
      const double u_near = 1.0 / spec.r_min;
      const int cap = spec.max_rings_per_angle > 0 ? spec.max_rings_per_angle : 512;
      for (int count = 2; count <= cap; ++count) {
        std::vector<double> trial(static_cast<std::size_t>(count));
        for (int j = 0; j < count; ++j)
          trial[static_cast<std::size_t>(j)] =
              1.0 / (u_far + (u_near - u_far) * static_cast<double>(j) /
                                 static_cast<double>(count - 1));
        double worst = 1.0;
        for (int j = 0; j + 1 < count; ++j) {
          const auto a = steering_vector(el, az, trial[static_cast<std::size_t>(j)], cfg, f_c);
          const auto b = steering_vector(el, az, trial[static_cast<std::size_t>(j + 1)], cfg, f_c);
          worst = std::min(worst, std::abs(std::complex<double>(a.dot(b))));
        }
        if (worst >= spec.min_ring_corr || count == cap) {
          rings = std::move(trial);
          break;
        }
      }
      // A single far ring is enough when even the coarsest two-ring split
      // already correlates above the floor.
      {
        const auto a = steering_vector(el, az, r_far, cfg, f_c);
        const auto b = steering_vector(el, az, spec.r_min, cfg, f_c);
        if (std::abs(std::complex<double>(a.dot(b))) >= spec.min_ring_corr) rings = {r_far};
      }
    }
    for (double r : rings) cols.push_back({s, az, el, r});
  }

  Codebook cb;
  cb.columns = std::move(cols);
  cb.mat.resize(n, static_cast<Eigen::Index>(cb.columns.size()));
  for (std::size_t c = 0; c < cb.columns.size(); ++c) {
    const auto& col = cb.columns[c];
    cb.mat.col(static_cast<Eigen::Index>(c)) = steering_vector(col.el, col.az, col.r, cfg, f_c);
  }
  return cb;
}

/// Writes the codebook as CSV: one row per column with its annotation and
/// interleaved re/im element pairs.
inline void save_codebook_csv(const Codebook& cb, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "# sin_az,az,el,r,re0,im0,re1,im1,...\n";
  char buf[64];
  for (int c = 0; c < cb.size(); ++c) {
    const auto& col = cb.columns[static_cast<std::size_t>(c)];
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g", col.sin_az, col.az, col.el, col.r);
    f << buf;
    for (int i = 0; i < cb.mat.rows(); ++i) {
      const auto v = cb.mat(i, c);
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g", v.real(), v.imag());
      f << buf;
    }
    f << "\n";
  }
}

// ---- serving set and reconstruction ---------------------------------------

struct ServingSet {
  std::vector<int> record_ids;  // sorted, unique
  bool ue_in_bounds = true;
};

/// Union of the per-cell VBS sets over the K grid cells nearest to the UE.
inline ServingSet serving_vbs_set(const Vec3& o_ue, const vbs::VbsStore& store, int k) {
  if (k < 1) throw std::invalid_argument("serving_vbs_set: K must be >= 1");
  ServingSet out;
  out.ue_in_bounds = store.grid.spec.bounds.contains_xy(o_ue.x, o_ue.y);
  std::set<int> ids;
  for (int cell : store.grid.k_nearest_cells(o_ue.x, o_ue.y, k))
    for (int id : store.grid.cell_vbs[static_cast<std::size_t>(cell)]) ids.insert(id);
  out.record_ids.assign(ids.begin(), ids.end());
  return out;
}

struct ChannelEstimate {
  Eigen::MatrixXcd h;   // N_UE x N_BS
  bool covered = false; // false when no usable path contributed
};

/// Coarse channel: sqrt(N_BS N_UE) * sum of gain-weighted outer products of
/// receive and transmit steering vectors over the serving records. Gains are
/// real magnitudes; phases are deliberately not modeled.
inline ChannelEstimate reconstruct_channel(const std::vector<int>& serving_ids,
                                           const vbs::VbsStore& store, const Vec3& o_ue,
                                           const ArrayConfig& bs_cfg, const ArrayConfig& ue_cfg,
                                           double f_c, double gamma_db) {
  ChannelEstimate out;
  out.h = Eigen::MatrixXcd::Zero(ue_cfg.n_elements, bs_cfg.n_elements);
  for (int id : serving_ids) {
    const auto& rec = store.records.at(static_cast<std::size_t>(id));
    auto params = path_params(rec, store.bs_location, o_ue, bs_cfg, ue_cfg);
    if (!params) continue;
    params->gain_mag = path_gain(*params, f_c, gamma_db);
    const auto a_r = steering_vector(params->aoa_el, params->aoa_az, params->r_rx, ue_cfg, f_c);
    const auto a_t = steering_vector(params->aod_el, params->aod_az, params->r_tx, bs_cfg, f_c);
    out.h.noalias() += params->gain_mag * a_r * a_t.adjoint();
    out.covered = true;
  }
  out.h *= std::sqrt(static_cast<double>(bs_cfg.n_elements) *
                     static_cast<double>(ue_cfg.n_elements));
  return out;
}

}  // namespace vbsim::chan
