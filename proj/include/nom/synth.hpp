#pragma once

// Synthetic slow-changing dataset: scalar fields advected by a seasonally
// rotating gyre on a doubly-periodic grid, relaxed toward air-temperature
// driven targets, with small smooth day-to-day noise. Velocity and forcing
// channels are prescribed analytically and repeat with the seasonal cycle,
// so the next state is (up to noise) a function of state and forcings.

#include <cstdint>

#include "nom/field.hpp"

namespace nom {

struct CflError : std::runtime_error {
  int suggested_substeps;
  CflError(const std::string& msg, int suggested)
      : std::runtime_error(msg), suggested_substeps(suggested) {}
};

struct SynthParams {
  int n_lat = 32;
  int n_lon = 64;
  int cycle = 64;  // seasonal period P in days
  int substeps = 2;
  double gyre_strength = 6e-4;    // streamfunction amplitude
  double diffusivity = 2e-5;      // base kappa; per-layer multipliers applied
  double relax_rate = 0.05;       // per-day pull toward the forcing target
  double noise_amp = 0.004;       // daily smooth-noise amplitude
  double land_fraction = 0.25;    // 0 disables the land mask
  bool zero_velocity = false;     // test hook: null dynamics
  bool zero_forcing = false;      // test hook: no relaxation, no noise
};

// Deterministic per seed. Day indices run 0..n_days-1.
FieldSeries generate_synthetic(uint64_t seed, int n_days, const SynthParams& params);

}  // namespace nom
