#include "nom/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nom {

namespace {

constexpr double kTau = 2.0 * M_PI;

double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Smooth random field: a few low-wavenumber Fourier modes.
struct Modes {
  struct Mode {
    double px, py, phase, amp;
  };
  std::vector<Mode> modes;

  double eval(double x, double y) const {
    double v = 0.0;
    for (const auto& m : modes) v += m.amp * std::sin(kTau * (m.px * x + m.py * y) + m.phase);
    return v;
  }

  static Modes random(std::mt19937_64& rng, int count, double amplitude) {
    Modes f;
    for (int k = 0; k < count; ++k) {
      Mode m;
      m.px = std::floor(next_uniform(rng) * 3.0) + 1.0;
      m.py = std::floor(next_uniform(rng) * 3.0) + 1.0;
      m.phase = next_uniform(rng) * kTau;
      m.amp = amplitude * (0.5 + next_uniform(rng)) / static_cast<double>(count);
      f.modes.push_back(m);
    }
    return f;
  }
};

struct Gyre {
  double strength;
  int cycle;

  double psi(double x, double y, int day) const {
    const double t = static_cast<double>(day) / static_cast<double>(cycle);
    const double amp = 1.0 + 0.3 * std::cos(kTau * t);
    return strength * amp *
           (std::sin(kTau * (x - t)) * std::sin(kTau * y) +
            0.6 * std::sin(2.0 * kTau * (y + 0.5 * t) + 1.3) * std::sin(kTau * x));
  }

  // Pattern normalized by strength (used for the height target).
  double shape(double x, double y, int day) const {
    return strength == 0.0 ? 0.0 : psi(x, y, day) / strength;
  }
};

}  // namespace

FieldSeries generate_synthetic(uint64_t seed, int n_days, const SynthParams& p) {
  if (n_days < 2 * p.cycle)
    throw std::runtime_error("generate_synthetic: need at least two seasonal cycles (" +
                             std::to_string(2 * p.cycle) + " days), got " + std::to_string(n_days));
  const int H = p.n_lat, W = p.n_lon;
  const int cells = H * W;
  const double dx = 1.0 / W, dy = 1.0 / H;
  const double dt = 1.0 / p.substeps;

  std::mt19937_64 rng(seed);

  // Land mask: threshold of a smooth blob at the requested fraction.
  std::vector<uint8_t> land(static_cast<size_t>(cells), 0);
  {
    Modes blob = Modes::random(rng, 8, 1.0);
    std::vector<double> v(static_cast<size_t>(cells));
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix)
        v[static_cast<size_t>(iy * W + ix)] = blob.eval((ix + 0.5) * dx, (iy + 0.5) * dy);
    if (p.land_fraction > 0.0) {
      std::vector<double> sorted = v;
      const auto k = static_cast<size_t>(std::clamp(
          (1.0 - p.land_fraction) * cells, 0.0, static_cast<double>(cells - 1)));
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<int64_t>(k), sorted.end());
      const double tau = sorted[k];
      for (int i = 0; i < cells; ++i) land[static_cast<size_t>(i)] = v[static_cast<size_t>(i)] > tau ? 1 : 0;
    }
  }

  Modes temp_pattern = Modes::random(rng, 5, 0.6);
  Modes pressure_pattern = Modes::random(rng, 5, 0.4);
  Modes init_noise = Modes::random(rng, 6, 1.0);

  const Gyre gyre{p.zero_velocity ? 0.0 : p.gyre_strength, p.cycle};

  auto air_temp_at = [&](double x, double y, int day) {
    const double season = std::sin(kTau * static_cast<double>(day % p.cycle) / p.cycle);
    return season * (0.8 * std::sin(kTau * y) + temp_pattern.eval(x, y)) + 0.3 * std::cos(kTau * y);
  };

  // Four advected scalars: three tracer layers and the height analog.
  constexpr int kScalars = 4;
  const double kappa_mult[kScalars] = {1.0, 0.7, 0.5, 0.8};
  const double base[kScalars] = {2.0, 2.2, 2.4, 1.5};
  const double coupling[kScalars] = {0.5, 0.35, 0.2, 0.0};

  auto target_at = [&](int s, double x, double y, int day) {
    if (s < 3) return base[s] + coupling[s] * air_temp_at(x, y, day);
    const double season = std::sin(kTau * static_cast<double>(day % p.cycle) / p.cycle);
    return base[3] + 0.3 * gyre.shape(x, y, day) + 0.1 * season;
  };

  std::vector<std::vector<double>> state(kScalars, std::vector<double>(static_cast<size_t>(cells)));
  for (int s = 0; s < kScalars; ++s) {
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        const double x = (ix + 0.5) * dx, y = (iy + 0.5) * dy;
        const double stationary = p.relax_rate > 0 ? p.noise_amp / std::sqrt(2.0 * p.relax_rate) : 0.0;
        state[static_cast<size_t>(s)][static_cast<size_t>(iy * W + ix)] =
            target_at(s, x, y, 0) + stationary * init_noise.eval(x + 0.13 * s, y + 0.29 * s);
      }
  }
  auto zero_land = [&](std::vector<double>& f) {
    for (int i = 0; i < cells; ++i)
      if (land[static_cast<size_t>(i)]) f[static_cast<size_t>(i)] = 0.0;
  };
  for (auto& f : state) zero_land(f);

  // Corner streamfunction -> staggered face velocities (discretely
  // divergence-free, so flux-form advection conserves the integral).
  std::vector<double> psi_c(static_cast<size_t>(cells));
  auto face_velocities = [&](int day, std::vector<double>& uf, std::vector<double>& vf) {
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix)
        psi_c[static_cast<size_t>(iy * W + ix)] = gyre.psi(ix * dx, iy * dy, day);
    auto pc = [&](int iy, int ix) {
      return psi_c[static_cast<size_t>(((iy % H + H) % H) * W + ((ix % W + W) % W))];
    };
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        uf[static_cast<size_t>(iy * W + ix)] = (pc(iy + 1, ix + 1) - pc(iy, ix + 1)) / dy;
        vf[static_cast<size_t>(iy * W + ix)] = -(pc(iy + 1, ix + 1) - pc(iy + 1, ix)) / dx;
      }
  };

  FieldSeries out;
  out.n_lat = H;
  out.n_lon = W;
  out.channels = all_channels();
  out.land = land;

  std::vector<double> uf(static_cast<size_t>(cells)), vf(static_cast<size_t>(cells));
  std::vector<double> next(static_cast<size_t>(cells));
  const size_t n_ch = out.channels.size();

  for (int day = 0; day < n_days; ++day) {
    // Record the state and forcings of this day.
    std::vector<float> rec(n_ch * static_cast<size_t>(cells));
    auto ch = [&](int c) { return rec.data() + static_cast<size_t>(c) * static_cast<size_t>(cells); };
    for (int s = 0; s < 3; ++s)
      for (int i = 0; i < cells; ++i) ch(s)[i] = static_cast<float>(state[static_cast<size_t>(s)][static_cast<size_t>(i)]);
    face_velocities(day, uf, vf);
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        const int i = iy * W + ix;
        const int ixm = (ix - 1 + W) % W;
        const int iym = (iy - 1 + H) % H;
        const double uc = 0.5 * (uf[static_cast<size_t>(i)] + uf[static_cast<size_t>(iy * W + ixm)]);
        const double vc = 0.5 * (vf[static_cast<size_t>(i)] + vf[static_cast<size_t>(iym * W + ix)]);
        ch(3)[i] = land[static_cast<size_t>(i)] ? 0.0f : static_cast<float>(uc);
        ch(4)[i] = land[static_cast<size_t>(i)] ? 0.0f : static_cast<float>(vc);
        ch(6)[i] = static_cast<float>(uc * 50.0);
        ch(7)[i] = static_cast<float>(vc * 50.0);
      }
    for (int i = 0; i < cells; ++i)
      ch(5)[i] = static_cast<float>(state[3][static_cast<size_t>(i)]);
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        const double x = (ix + 0.5) * dx, y = (iy + 0.5) * dy;
        const int i = iy * W + ix;
        ch(8)[i] = static_cast<float>(air_temp_at(x, y, day));
        ch(9)[i] = static_cast<float>(
            0.4 * std::cos(kTau * (static_cast<double>(day % p.cycle) / p.cycle + x)) +
            pressure_pattern.eval(x, y));
      }
    out.day_index.push_back(day);
    out.records.push_back(std::move(rec));
    if (day + 1 == n_days) break;

    // Advance to day+1: advection-diffusion substeps, then relaxation + noise.
    double umax = 0.0;
    for (int i = 0; i < cells; ++i)
      umax = std::max({umax, std::abs(uf[static_cast<size_t>(i)]), std::abs(vf[static_cast<size_t>(i)])});
    const double adv_cfl = umax * dt / std::min(dx, dy);
    const double dif_cfl = p.diffusivity * 2.0 * dt * (1.0 / (dx * dx) + 1.0 / (dy * dy));
    if (adv_cfl + dif_cfl > 0.9) {
      const int need = static_cast<int>(std::ceil(
          (umax / std::min(dx, dy) + p.diffusivity * 2.0 * (1.0 / (dx * dx) + 1.0 / (dy * dy))) / 0.9));
      throw CflError("generate_synthetic: CFL violation on day " + std::to_string(day) +
                         " (advective " + std::to_string(adv_cfl) + ", diffusive " +
                         std::to_string(dif_cfl) + "); use at least " + std::to_string(need) +
                         " substeps",
                     need);
    }

    for (int s = 0; s < kScalars; ++s) {
      auto& c = state[static_cast<size_t>(s)];
      const double kappa = p.diffusivity * kappa_mult[s];
      for (int sub = 0; sub < p.substeps; ++sub) {
        for (int iy = 0; iy < H; ++iy) {
          const int iyp = (iy + 1) % H, iym = (iy - 1 + H) % H;
          for (int ix = 0; ix < W; ++ix) {
            const int ixp = (ix + 1) % W, ixm = (ix - 1 + W) % W;
            const int i = iy * W + ix;
            const double ce = c[static_cast<size_t>(iy * W + ixp)];
            const double cw = c[static_cast<size_t>(iy * W + ixm)];
            const double cn = c[static_cast<size_t>(iyp * W + ix)];
            const double cs = c[static_cast<size_t>(iym * W + ix)];
            const double cc = c[static_cast<size_t>(i)];
            const double flux_e = uf[static_cast<size_t>(i)] * 0.5 * (cc + ce);
            const double flux_w = uf[static_cast<size_t>(iy * W + ixm)] * 0.5 * (cw + cc);
            const double flux_n = vf[static_cast<size_t>(i)] * 0.5 * (cc + cn);
            const double flux_s = vf[static_cast<size_t>(iym * W + ix)] * 0.5 * (cs + cc);
            const double adv = (flux_e - flux_w) / dx + (flux_n - flux_s) / dy;
            const double lap = (ce + cw - 2.0 * cc) / (dx * dx) + (cn + cs - 2.0 * cc) / (dy * dy);
            next[static_cast<size_t>(i)] = cc + dt * (-adv + kappa * lap);
          }
        }
        std::swap(c, next);
      }
    }

    if (!p.zero_forcing) {
      for (int s = 0; s < kScalars; ++s) {
        Modes noise = Modes::random(rng, 4, p.noise_amp);
        auto& c = state[static_cast<size_t>(s)];
        for (int iy = 0; iy < H; ++iy)
          for (int ix = 0; ix < W; ++ix) {
            const double x = (ix + 0.5) * dx, y = (iy + 0.5) * dy;
            const int i = iy * W + ix;
            c[static_cast<size_t>(i)] += p.relax_rate * (target_at(s, x, y, day + 1) - c[static_cast<size_t>(i)]) +
                                         noise.eval(x, y);
          }
      }
    }
    for (auto& f : state) zero_land(f);
  }
  return out;
}

}  // namespace nom
