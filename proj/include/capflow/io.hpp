#pragma once

#include "capflow/flow.hpp"
#include "capflow/trajectory.hpp"
#include "capflow/verify.hpp"

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

namespace capflow {

using json = nlohmann::json;

json to_json(const HemisphereGrid& g);
json to_json(const FlowConfig& cfg);
json to_json(const RunContext& ctx);
json to_json(const TrajectoryMeta& meta);
json to_json(const MonotonicityReport& r);
json to_json(const ConvergenceReport& r);
json to_json(const EstimateReport& r);
json to_json(const ConsistencyReport& r);
json to_json(const DiscBudget& b);

// parsers throw InvalidInput naming the offending field
FlowConfig config_from_json(const json& j);
RunContext context_from_json(const json& j);

struct Checkpoint {
  FlowConfig config;
  FlowState state;
  RunContext context;
  std::string config_hash;
};

json checkpoint_json(const FlowConfig& cfg, const FlowState& state, const RunContext& ctx);
void write_checkpoint(const std::string& path, const FlowConfig& cfg, const FlowState& state, const RunContext& ctx);
Checkpoint checkpoint_from_json(const json& j);
Checkpoint read_checkpoint(const std::string& path);

// t, dt, maxF, kappa_min, W0..Wn, dist_to_cap, then step, dissipation, xe_nu_min, shell_violation
std::string trajectory_header(int n);
std::string trajectory_line(const TrajectoryRow& row);
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows, int n);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

// appends rows as they are produced
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, int n);
  void append(const TrajectoryRow& row);

 private:
  std::ofstream out_;
};

struct InitialSpec {
  std::string kind = "cap";  // cap | flat | perturbed_cap | file
  double radius = 1.0;
  double amplitude = 0.1;
  int wavenumber = 1;
  double phase = 0.0;
  std::string path;  // checkpoint file for kind = file
};

struct RunManifest {
  FlowConfig config;
  InitialSpec initial;
  std::string out_dir = "capflow_out";
  std::uint64_t seed = 0;

  void validate() const;
};

json to_json(const InitialSpec& s);
json to_json(const RunManifest& m);
InitialSpec initial_from_json(const json& j);
RunManifest manifest_from_json(const json& j);
RunManifest read_manifest(const std::string& path);

GraphState initial_state(const InitialSpec& spec, const FlowConfig& cfg);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace capflow
