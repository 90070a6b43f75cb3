#pragma once

#include "treewave/evolution.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace treewave {

// Graph description in JSON syntax:
//   {"vertices": [0, 1],
//    "edges": [{"id": 1, "tail": 0, "head": 1, "length": 3.0,
//               "density": {"type": "constant", "params": [1.0]}}]}
// density types: "constant" params [value], "linear" params [intercept,
// slope], "sampled" with knot arrays "x" and "rho". A missing density means
// the unit profile.
GraphSpec parse_graph_text(const std::string& text, const std::string& origin);
GraphSpec parse_graph_file(const std::string& path);

// canonical testbeds: "interval" (one edge of length pi), "star3" (three
// unit edges), "weighted-star3" (lengths 1, 2, 3 with densities 1, 2.25, 4)
GraphSpec preset_graph(const std::string& name);
bool is_preset_graph(const std::string& name);

struct RunConfig {
    std::string command; // geometry | spectrum | basis-report | synthesize | simulate | verify
    std::string graph = "interval"; // preset name or file path
    int modes = 10;                 // K
    int mesh = 0;                   // elements per edge; 0 derives from K
    double horizon = 0.0;           // T or tau; 0 picks the critical time
    int exclude_vertex = -1;        // boundary vertex left uncontrolled; -1 = none
    std::string equation = "wave";  // wave | heat | schrodinger
    std::string target = "first-mode"; // preset (first-mode | random) or file
    std::string out_dir = ".";
    std::uint64_t seed = 1;
};

// exit codes, one per error family
inline constexpr int exit_ok = 0;
inline constexpr int exit_verify_failed = 1;
inline constexpr int exit_invalid_input = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_resolution = 4;
inline constexpr int exit_internal = 5;

// runs one command, writes its artifacts under config.out_dir, logs a
// deterministic summary, and returns the exit code
int run(const RunConfig& config, std::ostream& log);

// artifact files; every floating-point value is written with 17 significant
// digits so a reload reproduces the exact bits
void write_spectrum(const SpectralData& sd, const std::string& path);
SpectralData load_spectrum(const std::string& path); // phi and nodes stay empty
void write_control(const BoundaryControl& ctl, const std::string& path);
BoundaryControl load_control(const std::string& path); // sample-grid form
void write_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

// coefficient file {"a": [[re, im], ...], "b": [[re, im], ...]}, b optional
ModalState parse_target_file(const std::string& path);

} // namespace treewave
