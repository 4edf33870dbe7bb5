#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mpath/scenario.hpp"

namespace mpath {

// Binary snapshot file, little-endian:
//   "MPSN" | u32 version=1 | u32 num_samples | u32 count |
//   count x { i32 n | i32 anchor | f64 sigma | num_samples x (f64 re, f64 im) }
struct TaggedSnapshot {
    int n = 0;
    int anchor = 0;
    Snapshot snapshot;
};

void write_snapshots(const std::filesystem::path& path, const std::vector<TaggedSnapshot>& snaps);
std::vector<TaggedSnapshot> read_snapshots(const std::filesystem::path& path);

// Measurement CSV: n,anchor,distance_m,amplitude
void write_measurements_csv(std::ostream& os, const std::vector<MeasurementSet>& z);
std::vector<MeasurementSet> read_measurements_csv(std::istream& is);

// One JSON object per line: {n, p_hat, v_hat, gamma_r_hat, anchors: [{u, omega, b, gamma_f, q}], ess}
void write_estimates_jsonl(std::ostream& os, const std::vector<StepEstimate>& steps);

// variant,n,rmse_m
void write_rmse_csv(std::ostream& os, const std::vector<VariantResult>& variants);
// variant,rmse_m,cdf
void write_cdf_csv(std::ostream& os, const std::vector<VariantResult>& variants);

}  // namespace mpath
