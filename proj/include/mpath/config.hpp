#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "mpath/scenario.hpp"

namespace mpath {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSON schema (all fields optional; "preset" selects the base scenario,
// "dense", "dense_dnr25" or "geometric"):
//   name, preset, mode ("fully_synthetic" | "stochastic_ceda" | "geometric_ceda"),
//   anchors [[x, y], ...], steps, dt, realizations, seed, threshold_db (amplitude dB, 20 log10),
//   trajectory {waypoints, speed, speed_variation, speed_period, corner_radius},
//   olos [{first, last, anchors}],
//   truth {snr_db (power dB per anchor), dnr_db (power dB), rise, fall, bias, los_prob},
//   signal {num_samples, sample_interval, rolloff, symbol_time, noise_sigma},
//   nlos_count ("poisson" | "fixed"), walls [[x1, y1, x2, y2], ...], max_order,
//   path_loss {snr_ref_db, ref_distance, reflection_loss_db},
//   tracker {particles, large_particles, initial_particles, accel_std, velocity_std, init_proposal,
//           init_likelihood},
//   lost {error, after, recovery_steps}
ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string scenario_to_json_text(const ScenarioConfig& cfg);
void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path);

double amplitude_db_to_linear(double db);  // 10^(db/20)
double power_db_to_linear(double db);      // 10^(db/10)

}  // namespace mpath
