#include "cbctox/cohort/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cbctox/error.hpp"
#include "cbctox/parallel.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::cohort {

namespace {

struct Ellipsoid {
  Vec3 center_mm;
  Vec3 radii_mm;
  double intensity;
};

struct Bump {
  Vec3 center_mm;
  double sigma_mm = 10;
  Vec3 dir{1, 0, 0};  // unit, for directional bumps
  double amp_mm = 0;
  bool radial = false;
};

struct AnatomyParams {
  std::array<std::int64_t, 3> grid;
  double spacing;
  Ellipsoid head;
  double shell_lo = 0.90, shell_intensity = 0.80;
  std::vector<Ellipsoid> structures;  // [0] is the designated region
};

double fov_mm(const AnatomyParams& a, int axis) {
  return double(a.grid[std::size_t(axis)]) * a.spacing;
}

AnatomyParams make_anatomy(std::array<std::int64_t, 3> grid, double spacing,
                           Rng& rng) {
  AnatomyParams a;
  a.grid = grid;
  a.spacing = spacing;
  const double fx = double(grid[0]) * spacing;
  const double fy = double(grid[1]) * spacing;
  const double fz = double(grid[2]) * spacing;
  const Vec3 c{fx / 2, fy / 2, fz / 2};
  auto jitter = [&](double s) { return 1.0 + s * (rng.uniform() - 0.5); };
  a.head = {c,
            {0.40 * fx * jitter(0.08), 0.42 * fy * jitter(0.08),
             0.44 * fz * jitter(0.08)},
            0.35};
  // region structure plus two reference structures and a low-intensity
  // cavity; the region is a sphere so its boundary sits at one radius, where
  // the radial deformation bump peaks
  const double rs = 0.12 * std::min({fx, fy, fz});
  const double r0 = rs * jitter(0.2);
  a.structures.push_back(
      {{c[0] + 0.10 * fx * (rng.uniform() - 0.5), c[1] + 0.06 * fy * jitter(0.5),
        c[2] + 0.05 * fz * (rng.uniform() - 0.5)},
       {r0, r0, r0},
       0.75});
  a.structures.push_back(
      {{c[0] - 0.18 * fx, c[1] - 0.12 * fy * jitter(0.3), c[2] + 0.10 * fz},
       {0.6 * rs, 0.7 * rs, 0.6 * rs},
       0.55});
  a.structures.push_back(
      {{c[0] + 0.17 * fx, c[1] - 0.14 * fy, c[2] - 0.12 * fz * jitter(0.3)},
       {0.5 * rs, 0.5 * rs, 0.7 * rs},
       0.90});
  a.structures.push_back(
      {{c[0], c[1] + 0.20 * fy, c[2] - 0.08 * fz},
       {0.45 * rs, 0.5 * rs, 0.8 * rs},
       0.05});
  return a;
}

double ellip_rho(const Vec3& p, const Ellipsoid& e) {
  const double dx = (p[0] - e.center_mm[0]) / e.radii_mm[0];
  const double dy = (p[1] - e.center_mm[1]) / e.radii_mm[1];
  const double dz = (p[2] - e.center_mm[2]) / e.radii_mm[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double min_radius(const Ellipsoid& e) {
  return std::min({e.radii_mm[0], e.radii_mm[1], e.radii_mm[2]});
}

// 1 inside, 0 outside, one-voxel linear edge
double edge_alpha(double signed_dist_mm, double w_mm) {
  return std::clamp(0.5 - signed_dist_mm / (2.0 * w_mm), 0.0, 1.0);
}

double sample_anatomy(const AnatomyParams& a, const Vec3& p) {
  const double w = a.spacing;
  const double rho_h = ellip_rho(p, a.head);
  const double mr = min_radius(a.head);
  const double a_head = edge_alpha((rho_h - 1.0) * mr, w);
  if (a_head <= 0.0) return 0.02;

  double inside = a.head.intensity;
  // skull shell band
  const double d_shell = std::max(a.shell_lo - rho_h, rho_h - 1.0) * mr;
  const double a_shell = edge_alpha(d_shell, w);
  inside = inside * (1 - a_shell) + a.shell_intensity * a_shell;
  for (const auto& s : a.structures) {
    const double d = (ellip_rho(p, s) - 1.0) * min_radius(s);
    const double al = edge_alpha(d, w);
    inside = inside * (1 - al) + s.intensity * al;
  }
  return 0.02 * (1 - a_head) + inside * a_head;
}

Vec3 eval_bumps(const std::vector<Bump>& bumps, const Vec3& p) {
  Vec3 u{0, 0, 0};
  for (const auto& b : bumps) {
    const double dx = p[0] - b.center_mm[0];
    const double dy = p[1] - b.center_mm[1];
    const double dz = p[2] - b.center_mm[2];
    const double r2 = dx * dx + dy * dy + dz * dz;
    if (b.radial) {
      // peak amplitude amp_mm at r = sigma
      const double r = std::sqrt(r2);
      if (r < 1e-9) continue;
      const double s = r / b.sigma_mm;
      const double g = s * std::exp(-0.5 * s * s) / 0.60653065971263342;
      const double k = b.amp_mm * g / r;
      u[0] += k * dx;
      u[1] += k * dy;
      u[2] += k * dz;
    } else {
      const double g = std::exp(-0.5 * r2 / (b.sigma_mm * b.sigma_mm));
      u[0] += b.amp_mm * g * b.dir[0];
      u[1] += b.amp_mm * g * b.dir[1];
      u[2] += b.amp_mm * g * b.dir[2];
    }
  }
  return u;
}

Volume rasterize_anatomy(const AnatomyParams& a,
                         const std::vector<Bump>* bumps) {
  Volume v = Volume::make(a.grid, 1, {a.spacing, a.spacing, a.spacing});
  const std::int64_t nx = a.grid[0], ny = a.grid[1];
  parallel_for(0, v.voxels(), 2048, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      Vec3 p{double(x) * a.spacing, double(y) * a.spacing,
             double(z) * a.spacing};
      if (bumps) {
        const Vec3 u = eval_bumps(*bumps, p);
        p = {p[0] + u[0], p[1] + u[1], p[2] + u[2]};
      }
      v.data[std::size_t(i)] = float(sample_anatomy(a, p));
    }
  });
  return v;
}

DisplacementField rasterize_field(const AnatomyParams& a,
                                  const std::vector<Bump>& bumps) {
  Volume grid = Volume::make(a.grid, 1, {a.spacing, a.spacing, a.spacing});
  DisplacementField d = DisplacementField::zeros_like(grid);
  const std::int64_t nx = a.grid[0], ny = a.grid[1];
  const std::int64_t nvox = grid.voxels();
  parallel_for(0, nvox, 2048, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const std::int64_t x = i % nx;
      const std::int64_t y = (i / nx) % ny;
      const std::int64_t z = i / (nx * ny);
      const Vec3 u = eval_bumps(bumps, {double(x) * a.spacing,
                                        double(y) * a.spacing,
                                        double(z) * a.spacing});
      d.f.data[std::size_t(i)] = float(u[0]);
      d.f.data[std::size_t(nvox + i)] = float(u[1]);
      d.f.data[std::size_t(2 * nvox + i)] = float(u[2]);
    }
  });
  return d;
}

void apply_cbct_appearance(Volume& v, double noise_sigma, double bias_amp,
                           Rng& rng) {
  const double gain = rng.uniform(0.85, 0.95);
  const double shift = rng.uniform(0.02, 0.05);
  // two random low-frequency plane waves
  const double fov = double(v.nx()) * v.spacing_mm[0];
  double k1[3], k2[3];
  for (int i = 0; i < 3; ++i) {
    k1[i] = rng.uniform(0.5, 1.5) * 2.0 * 3.14159265358979 / fov;
    k2[i] = rng.uniform(0.5, 1.5) * 2.0 * 3.14159265358979 / fov;
  }
  const double ph1 = rng.uniform(0, 6.28318530717958);
  const double ph2 = rng.uniform(0, 6.28318530717958);
  const std::int64_t nx = v.nx(), ny = v.ny();
  // sequential: the noise stream must not depend on threading
  for (std::int64_t i = 0; i < v.voxels(); ++i) {
    const std::int64_t x = i % nx;
    const std::int64_t y = (i / nx) % ny;
    const std::int64_t z = i / (nx * ny);
    const double px = double(x) * v.spacing_mm[0];
    const double py = double(y) * v.spacing_mm[1];
    const double pz = double(z) * v.spacing_mm[2];
    const double bias =
        1.0 + bias_amp * 0.5 *
                  (std::sin(k1[0] * px + k1[1] * py + k1[2] * pz + ph1) +
                   std::sin(k2[0] * px + k2[1] * py + k2[2] * pz + ph2));
    const double val = (double(v.data[std::size_t(i)]) * gain + shift) * bias +
                       rng.normal(0.0, noise_sigma);
    v.data[std::size_t(i)] = float(std::max(0.0, val));
  }
}

std::vector<LandmarkPair> solve_landmarks(const AnatomyParams& a,
                                          const std::vector<Bump>& bumps,
                                          int count) {
  // moving points on the region structure boundary, up to 6 axis extremes
  const Ellipsoid& s = a.structures.front();
  static const double dirs[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                    {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  std::vector<LandmarkPair> out;
  for (int i = 0; i < std::min(count, 6); ++i) {
    const Vec3 q{s.center_mm[0] + dirs[i][0] * s.radii_mm[0],
                 s.center_mm[1] + dirs[i][1] * s.radii_mm[1],
                 s.center_mm[2] + dirs[i][2] * s.radii_mm[2]};
    // fixed-space point p with p + u(p) = q
    Vec3 p = q;
    for (int it = 0; it < 40; ++it) {
      const Vec3 u = eval_bumps(bumps, p);
      p = {q[0] - u[0], q[1] - u[1], q[2] - u[2]};
    }
    out.push_back({p, q});
  }
  return out;
}

struct DeformationPlan {
  std::vector<Bump> base;  // amplitudes at the final fraction
  int t_max = 1;
};

// phantom bumps: one radial bump on the region structure plus two
// directional bumps near the reference structures, scaled so the final
// fraction peaks at deformation_mm
DeformationPlan phantom_bumps(const AnatomyParams& a, double deformation_mm,
                              const std::vector<int>& fractions, Rng& rng) {
  DeformationPlan plan;
  plan.t_max = fractions.empty() ? 1 : *std::max_element(fractions.begin(),
                                                         fractions.end());
  if (deformation_mm <= 0) return plan;

  const Ellipsoid& s0 = a.structures[0];
  Bump radial;
  radial.radial = true;
  radial.center_mm = s0.center_mm;
  // outward growth shifts the apparent boundary inward by roughly the bump
  // amplitude; 0.8r puts the displacement peak about where it lands
  radial.sigma_mm = 0.8 * min_radius(s0);
  radial.amp_mm = rng.uniform(0.9, 1.0);
  plan.base.push_back(radial);
  for (int k = 1; k <= 2; ++k) {
    Bump b;
    b.center_mm = a.structures[std::size_t(k)].center_mm;
    b.sigma_mm = 0.18 * fov_mm(a, 0);
    double d[3], norm = 0;
    for (auto& di : d) {
      di = rng.normal();
      norm += di * di;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    b.dir = {d[0] / norm, d[1] / norm, d[2] / norm};
    b.amp_mm = rng.uniform(0.25, 0.40);
    plan.base.push_back(b);
  }

  // normalize the final-fraction field to peak at deformation_mm
  const DisplacementField probe = rasterize_field(a, plan.base);
  double maxmag = 0;
  const std::int64_t nvox = probe.f.voxels();
  for (std::int64_t i = 0; i < nvox; ++i) {
    const double ux = probe.f.data[std::size_t(i)];
    const double uy = probe.f.data[std::size_t(nvox + i)];
    const double uz = probe.f.data[std::size_t(2 * nvox + i)];
    maxmag = std::max(maxmag, std::sqrt(ux * ux + uy * uy + uz * uz));
  }
  if (maxmag > 0)
    for (auto& b : plan.base) b.amp_mm *= deformation_mm / maxmag;
  return plan;
}

std::vector<Bump> scaled_bumps(const DeformationPlan& plan, int fraction) {
  std::vector<Bump> out = plan.base;
  const double scale = double(fraction) / double(plan.t_max);
  for (auto& b : out) b.amp_mm *= scale;
  return out;
}

}  // namespace

Phantom synth_phantom(const PhantomConfig& cfg) {
  require(cfg.deformation_mm >= 0, "domain",
          "synth_phantom: deformation must be >= 0");
  require(!cfg.fractions.empty(), "domain",
          "synth_phantom: need at least one fraction");
  Rng rng(cfg.seed);
  const AnatomyParams anat = make_anatomy(cfg.grid, cfg.spacing_mm, rng);
  Rng bump_rng = rng.split(1);
  const DeformationPlan plan =
      phantom_bumps(anat, cfg.deformation_mm, cfg.fractions, bump_rng);

  Phantom out;
  out.pct = rasterize_anatomy(anat, nullptr);
  for (const int t : cfg.fractions) {
    FractionData fd;
    fd.fraction = t;
    const std::vector<Bump> bumps = scaled_bumps(plan, t);
    fd.gt_dvf = rasterize_field(anat, bumps);
    fd.cbct = rasterize_anatomy(anat, &bumps);
    Rng app = rng.split(1000 + std::uint64_t(t));
    apply_cbct_appearance(fd.cbct, cfg.noise_sigma, cfg.bias_amplitude, app);
    fd.landmarks = solve_landmarks(anat, bumps, cfg.landmarks);
    out.fractions.push_back(std::move(fd));
  }
  return out;
}

// ---- cohort -----------------------------------------------------------------

namespace {

struct PatientPlanInternal {
  AnatomyParams anat;
  double signal_amp = 0;  // signed, mm at the final fraction
};

PatientPlanInternal plan_patient_geometry(const CohortConfig& cfg, int index) {
  Rng rng = Rng(cfg.seed).split(std::uint64_t(index) + 17);
  PatientPlanInternal p;
  p.anat = make_anatomy(cfg.grid, cfg.spacing_mm, rng);
  const double mag = rng.uniform(0.3, 1.0);
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  p.signal_amp = sign * mag * cfg.deformation_mm;
  return p;
}

std::vector<Bump> cohort_fraction_bumps(const CohortConfig& cfg,
                                        const PatientPlanInternal& p,
                                        int index, int fraction) {
  const int t_max = *std::max_element(cfg.fractions.begin(),
                                      cfg.fractions.end());
  const double profile = cfg.effect.time_profile == "constant"
                             ? 1.0
                             : double(fraction) / double(t_max);
  std::vector<Bump> bumps;
  const Ellipsoid& s0 = p.anat.structures[0];
  Bump sig;
  sig.radial = true;
  sig.center_mm = s0.center_mm;
  sig.sigma_mm = 1.2 * min_radius(s0);
  sig.amp_mm = profile * p.signal_amp;
  bumps.push_back(sig);

  // per-fraction positioning/anatomy noise, label-independent
  Rng nrng = Rng(cfg.seed).split(std::uint64_t(index) * 911 +
                                 std::uint64_t(fraction) + 31);
  for (int k = 0; k < 2; ++k) {
    Bump b;
    b.center_mm = {nrng.uniform(0.3, 0.7) * fov_mm(p.anat, 0),
                   nrng.uniform(0.3, 0.7) * fov_mm(p.anat, 1),
                   nrng.uniform(0.3, 0.7) * fov_mm(p.anat, 2)};
    b.sigma_mm = 0.18 * fov_mm(p.anat, 0);
    double d[3], norm = 0;
    for (auto& di : d) {
      di = nrng.normal();
      norm += di * di;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    b.dir = {d[0] / norm, d[1] / norm, d[2] / norm};
    b.amp_mm = cfg.effect.nuisance_mm * nrng.uniform(0.5, 1.0);
    bumps.push_back(b);
  }
  return bumps;
}

double regional_volume_change(const CohortConfig& cfg,
                              const PatientPlanInternal& p, int index) {
  const int t_max = *std::max_element(cfg.fractions.begin(),
                                      cfg.fractions.end());
  const DisplacementField dvf = rasterize_field(
      p.anat, cohort_fraction_bumps(cfg, p, index, t_max));
  const Volume det = jacobian_determinant(jacobian_field(dvf));
  const Ellipsoid& s0 = p.anat.structures[0];
  const double r = min_radius(s0) + 2.0 * cfg.spacing_mm;
  double sum = 0;
  std::int64_t count = 0;
  for (std::int64_t z = 0; z < det.nz(); ++z)
    for (std::int64_t y = 0; y < det.ny(); ++y)
      for (std::int64_t x = 0; x < det.nx(); ++x) {
        const double dx = double(x) * cfg.spacing_mm - s0.center_mm[0];
        const double dy = double(y) * cfg.spacing_mm - s0.center_mm[1];
        const double dz = double(z) * cfg.spacing_mm - s0.center_mm[2];
        if (dx * dx + dy * dy + dz * dz > r * r) continue;
        sum += double(det.at(0, x, y, z)) - 1.0;
        ++count;
      }
  return count ? sum / double(count) : 0.0;
}

PatientRecord random_covariates(const CohortConfig& cfg, int index) {
  Rng rng = Rng(cfg.seed).split(std::uint64_t(index) * 7919 + 101);
  PatientRecord r;
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%03d", index);
  r.id = buf;
  r.age_years = std::floor(rng.uniform(40, 86));
  r.sex = rng.bernoulli(0.72) ? Sex::male : Sex::female;
  r.kps = 50 + 10 * double(rng.below(6));
  r.location = TumorLocation(rng.below(6));
  r.smoker = Smoker(rng.below(3));
  r.alcohol = rng.bernoulli(0.5);
  r.t_stage = int(rng.below(5));
  r.n_stage = int(rng.below(5));
  r.m_stage = int(rng.below(3));
  r.p16 = P16(rng.below(3));
  r.surgery = rng.bernoulli(0.4);
  r.chemo = rng.bernoulli(0.7);
  r.feeding_tube_at_onset = false;
  return r;
}

}  // namespace

CohortPlan plan_cohort(const CohortConfig& cfg) {
  require(cfg.n >= 10, "domain", "synth_cohort: need n >= 10");
  require(!cfg.fractions.empty(), "domain", "synth_cohort: empty fraction set");
  require(cfg.effect.prevalence > 0 && cfg.effect.prevalence < 1, "domain",
          "synth_cohort: prevalence must be in (0,1)");
  require(cfg.effect.time_profile == "linear" ||
              cfg.effect.time_profile == "constant",
          "domain", "synth_cohort: time_profile must be linear or constant");

  CohortPlan plan;
  plan.cfg = cfg;

  std::vector<double> changes(std::size_t(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const PatientPlanInternal p = plan_patient_geometry(cfg, i);
    changes[std::size_t(i)] = regional_volume_change(cfg, p, i);
    if (i == 0) {
      plan.region_center_mm = p.anat.structures[0].center_mm;
      plan.region_radius_mm =
          min_radius(p.anat.structures[0]) + 2.0 * cfg.spacing_mm;
    }
  }
  double mean = 0;
  for (double c : changes) mean += c;
  mean /= double(cfg.n);
  double var = 0;
  for (double c : changes) var += (c - mean) * (c - mean);
  var /= double(cfg.n);
  const double sd = std::sqrt(std::max(var, 1e-24));

  std::vector<double> zs(std::size_t(cfg.n));
  for (int i = 0; i < cfg.n; ++i)
    zs[std::size_t(i)] = (changes[std::size_t(i)] - mean) / sd;
  std::vector<double> sorted = zs;
  std::sort(sorted.begin(), sorted.end());
  const int k = std::clamp<int>(
      cfg.n - int(std::llround(cfg.effect.prevalence * cfg.n)), 1, cfg.n - 1);
  plan.z_threshold = 0.5 * (sorted[std::size_t(k - 1)] + sorted[std::size_t(k)]);

  for (int i = 0; i < cfg.n; ++i) {
    PatientRecord rec = random_covariates(cfg, i);
    PatientOracle oracle;
    oracle.id = rec.id;
    oracle.regional_volume_change = changes[std::size_t(i)];
    oracle.z = zs[std::size_t(i)];
    const double arg =
        cfg.effect.strength * (oracle.z - plan.z_threshold);
    oracle.p_label = 1.0 / (1.0 + std::exp(-arg));
    Rng lrng = Rng(cfg.seed).split(std::uint64_t(i) * 131 + 977);
    oracle.label = lrng.bernoulli(oracle.p_label) ? 1 : 0;

    // effect drives the target toxicity; the others stay background noise
    const bool bg1 = lrng.bernoulli(0.2);
    const bool bg2 = lrng.bernoulli(0.2);
    const bool bg3 = lrng.bernoulli(0.2);
    rec.labels.ng_tube = cfg.effect.toxicity == "ng_tube" ? oracle.label : bg1;
    rec.labels.hospitalization =
        cfg.effect.toxicity == "hospitalization" ? oracle.label : bg2;
    rec.labels.radionecrosis =
        cfg.effect.toxicity == "radionecrosis" ? oracle.label : bg3;

    plan.records.push_back(std::move(rec));
    plan.oracle.push_back(oracle);
  }
  return plan;
}

PatientBundle generate_patient(const CohortPlan& plan, int index) {
  const CohortConfig& cfg = plan.cfg;
  require(index >= 0 && index < cfg.n, "domain", "patient index out of range");
  const PatientPlanInternal p = plan_patient_geometry(cfg, index);

  PatientBundle bundle;
  bundle.record = plan.records[std::size_t(index)];
  bundle.phantom.pct = rasterize_anatomy(p.anat, nullptr);
  for (const int t : cfg.fractions) {
    FractionData fd;
    fd.fraction = t;
    const auto bumps = cohort_fraction_bumps(cfg, p, index, t);
    fd.gt_dvf = rasterize_field(p.anat, bumps);
    fd.cbct = rasterize_anatomy(p.anat, &bumps);
    Rng app = Rng(cfg.seed).split(std::uint64_t(index) * 2003 +
                                  std::uint64_t(t) * 13 + 5);
    apply_cbct_appearance(fd.cbct, cfg.noise_sigma, cfg.bias_amplitude, app);
    fd.landmarks = solve_landmarks(p.anat, bumps, 4);
    bundle.phantom.fractions.push_back(std::move(fd));
  }
  return bundle;
}

void write_landmarks(const std::vector<LandmarkPair>& lm,
                     const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "io", "cannot write landmarks " + path.string());
  f << "id,fixed_x_mm,fixed_y_mm,fixed_z_mm,moving_x_mm,moving_y_mm,"
       "moving_z_mm\n";
  f.precision(17);
  for (std::size_t i = 0; i < lm.size(); ++i)
    f << i << ',' << lm[i].fixed_mm[0] << ',' << lm[i].fixed_mm[1] << ','
      << lm[i].fixed_mm[2] << ',' << lm[i].moving_mm[0] << ','
      << lm[i].moving_mm[1] << ',' << lm[i].moving_mm[2] << "\n";
  require(f.good(), "io", "short write to " + path.string());
}

std::vector<LandmarkPair> read_landmarks(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(f.good(), "io", "cannot open landmarks " + path.string());
  std::string line;
  std::getline(f, line);  // header
  std::vector<LandmarkPair> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    LandmarkPair lm;
    int id = 0;
    const int got = std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf",
                                &id, &lm.fixed_mm[0], &lm.fixed_mm[1],
                                &lm.fixed_mm[2], &lm.moving_mm[0],
                                &lm.moving_mm[1], &lm.moving_mm[2]);
    require(got == 7, "format", "malformed landmark row in " + path.string());
    out.push_back(lm);
  }
  return out;
}

void write_oracle(const CohortPlan& plan, const std::filesystem::path& path) {
  nlohmann::json j;
  j["strength"] = plan.cfg.effect.strength;
  j["prevalence"] = plan.cfg.effect.prevalence;
  j["time_profile"] = plan.cfg.effect.time_profile;
  j["toxicity"] = plan.cfg.effect.toxicity;
  j["z_threshold"] = plan.z_threshold;
  j["region_center_mm"] = plan.region_center_mm;
  j["region_radius_mm"] = plan.region_radius_mm;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : plan.oracle)
    rows.push_back({{"id", o.id},
                    {"regional_volume_change", o.regional_volume_change},
                    {"z", o.z},
                    {"p_label", o.p_label},
                    {"label", o.label}});
  j["patients"] = rows;
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "io", "cannot write oracle " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace cbctox::cohort
