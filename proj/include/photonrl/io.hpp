// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "photonrl/hybrid.hpp"
#include "photonrl/mesh.hpp"
#include "photonrl/snn.hpp"
#include "photonrl/spgd.hpp"
#include "photonrl/td3.hpp"

namespace photonrl::io {

// Actor weight snapshot:
//   {arch: [d_s, h, h, d_a], T, lif: {lif1, lif2, reset}, W1..b3, action_scale}
// with matrices as row-major nested arrays. The interchange format between
// training, calibration and inference.
nlohmann::json actor_to_json(const snn::ActorNet& net);
snn::ActorNet actor_from_json(const nlohmann::json& j);
void save_actor(const snn::ActorNet& net, const std::string& path);
snn::ActorNet load_actor(const std::string& path);

// Hybrid snapshot: the actor plus the extracted layer-2 target, its scale
// and the recorded input/output test set.
nlohmann::json weight_snapshot_to_json(const hybrid::WeightSnapshot& snap);
hybrid::WeightSnapshot weight_snapshot_from_json(const nlohmann::json& j);
void save_weight_snapshot(const hybrid::WeightSnapshot& snap, const std::string& path);
hybrid::WeightSnapshot load_weight_snapshot(const std::string& path);

// Voltage table CSV: header `shifter_id,kind,voltage`, kind in {mzi, diag},
// shifter_id is the index within its kind (layout order for units, port
// order for the attenuator stages).
void save_voltages(const mesh::VoltageTable& table, const std::string& path);
mesh::VoltageTable load_voltages(const std::string& path);

// Topology descriptor JSON: {n, layout: [[layer, top_mode], ...]}.
void save_topology(const mesh::MeshTopology& topo, const std::string& path);
mesh::MeshTopology load_topology(const std::string& path);

// Calibration trace CSV: `iteration,objective,similarity`.
void save_calibration_csv(const spgd::CalibrationRecord& record, const std::string& path);

// Reward trace CSV: `step,episode,return,eval_mean,eval_std` with empty
// fields where a row carries no value.
void save_trace_csv(const std::vector<td3::TraceRow>& trace, const std::string& path);
std::vector<td3::TraceRow> load_trace_csv(const std::string& path);

// Deviation report: aggregate JSON plus the per-transmission series CSV
// `sample,channel,target,measured,error` (sample indexes transmitted vectors,
// i.e. rollout sample x time step).
void save_deviation_report(const hybrid::DeviationReport& report, const std::string& json_path,
                           const std::string& csv_path);

// Convergence comparison JSON.
nlohmann::json convergence_to_json(const hybrid::ConvergenceReport& report);

}  // namespace photonrl::io
