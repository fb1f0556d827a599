#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "potrec/potentials.hpp"
#include "potrec/reconstruct.hpp"

namespace potrec {

enum class ExperimentKind {
    recover_smooth,
    recover_rough,
    rate_study,
    divergence_study,
    scattering_roundtrip,
    boundary_recovery_check
};

std::string to_string(ExperimentKind k);

// Thresholds checked after a run; an absent entry is not checked.
struct Assertions {
    std::optional<double> max_rel_error;    // recover_*: relative error at the largest k
    std::optional<double> max_abs_error;    // recover_*: used where V(x) = 0
    std::optional<double> rate_low, rate_high;
    std::optional<double> growth_margin;    // divergence: growth slope >= (1 - beta) - margin
    std::optional<double> tail_margin;      // divergence: tail slope <= epsilon + margin
    std::optional<double> min_area_fraction;
    std::optional<double> max_trace_error;  // boundary_recovery_check
    std::optional<double> max_dn_error;     // scattering_roundtrip, operator-norm relative
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::recover_smooth;
    std::string name = "experiment";
    std::size_t grid_n = 512;
    double grid_side = 2.0;
    std::size_t boundary_nodes = 256;
    std::size_t interior_n = 256;
    PotentialSpec potential{};
    std::vector<double> k_schedule;  // explicit; otherwise dyadic 2^lo..2^hi capped by resolution
    int k_exp_lo = 4;
    int k_exp_hi = 6;
    std::vector<Point> points;
    double kappa = 2.0;
    std::size_t angular_n = 32;
    double tol_abs = 1e-3;
    double tol_rel = 1e-2;
    double solver_tol = 1e-12;
    DivergenceConfig divergence{};
    Assertions checks{};
    std::uint64_t seed = 1;
    std::string output_dir;  // empty: CLI --out or the environment default
};

// Validates and fills defaults; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

struct RunOutcome {
    bool passed = true;
    std::vector<std::string> failures;
    nlohmann::json manifest;
    std::filesystem::path manifest_path;
};

// Writes artifacts and manifest.json into out_dir. Removes partial artifacts when a stage throws.
RunOutcome run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir);

// Plain tab-separated tables derived from a manifest's artifacts; returns the files written.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& manifest_path);

}  // namespace potrec
