#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icl/curves.hpp"
#include "icl/instance.hpp"
#include "icl/learned.hpp"

namespace icl {

/// A solver entry in an experiment roster. Valid names: ista, fista,
/// lista_fixed, lista_cp_fixed, lista_meta, lista_cp_meta, lista_vm_meta,
/// lista_vm_ss_meta, lista_vm_theory.
struct SolverSpec {
    std::string name;
    double alpha = 0.1;
    int iterations = 12;
};

struct ExperimentConfig {
    std::string experiment; // fig1a | fig1b | fig1c | convergence_k | coherence_decay | meta_train_compare
    InstanceConfig instance;
    std::vector<SolverSpec> roster;
    int seeds = 0;           // 0: experiment-specific default
    std::uint64_t seed = 0;  // base seed
    std::string output_dir = "out";
    double desk_scale = 1.0;
    TrainConfig train;       // shared training budget for the learned entries

    // fig1c / convergence_k knobs
    double gamma = 0.0;      // 0: experiment default
    double sigma_d = 0.0;    // 0: experiment default
    std::vector<int> sweep;  // prefix sweep (fig1c) or row counts (coherence_decay)

    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& config);

struct ManifestEntry {
    std::string path;
    std::string hash; // fnv1a64 of the file content, hex
};

struct Manifest {
    std::vector<ManifestEntry> files;
    std::vector<std::pair<std::string, double>> summary;
};

/// Runs the configured experiment, writes CSV/SVG/meta outputs plus
/// manifest.json under output_dir and returns the manifest.
Manifest run_experiment(const ExperimentConfig& config);

std::string hash_file(const std::string& path);

} // namespace icl
