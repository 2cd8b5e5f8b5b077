// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: seeded, file-driven commands covering the full pipeline
//   train     -> actor snapshot + weight snapshot (with test set) + reward CSV
//   calibrate -> voltage table + calibration trace + summary
//   compare   -> hardware-vs-software deviation report
//   cotrain   -> fine-tuned snapshot with the hardware layer frozen + CSV
//   report    -> convergence comparison across runs
// Every command writes resolved-config.json into the output directory so a
// run can be replayed exactly.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "photonrl/envs.hpp"
#include "photonrl/errors.hpp"
#include "photonrl/hybrid.hpp"
#include "photonrl/io.hpp"
#include "photonrl/mesh.hpp"
#include "photonrl/remote_env.hpp"
#include "photonrl/snn.hpp"
#include "photonrl/spgd.hpp"
#include "photonrl/td3.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace photonrl;

namespace {

struct ExperimentConfig {
    std::string task = "pendulum";  // pendulum | remote
    std::string endpoint;           // tcp:<host>:<port> or stdio:<command>
    int actor_hidden = 16;
    int actor_steps = 1;            // unrolling length T
    snn::LifConfig lif1, lif2;
    td3::Td3Config td3;
    int mesh_n = 16;
    mesh::PhaseVoltageMap map;
    mesh::NoiseModel noise;
    spgd::SpgdConfig spgd;
    bool gain_trim = true;
    bool route_through_mesh = false;
    int test_samples = 1000;
    std::uint64_t seed = 0;
    std::string out = "run";
};

void get_if(const json& j, const char* key, double& v) {
    if (j.contains(key)) v = j.at(key).get<double>();
}
void get_if(const json& j, const char* key, int& v) {
    if (j.contains(key)) v = j.at(key).get<int>();
}
void get_if(const json& j, const char* key, long& v) {
    if (j.contains(key)) v = j.at(key).get<long>();
}
void get_if(const json& j, const char* key, bool& v) {
    if (j.contains(key)) v = j.at(key).get<bool>();
}
void get_if(const json& j, const char* key, std::string& v) {
    if (j.contains(key)) v = j.at(key).get<std::string>();
}
void get_if(const json& j, const char* key, std::uint64_t& v) {
    if (j.contains(key)) v = j.at(key).get<std::uint64_t>();
}

void parse_lif(const json& j, snn::LifConfig& cfg) {
    get_if(j, "decay", cfg.decay);
    get_if(j, "threshold", cfg.threshold);
    get_if(j, "surrogate_width", cfg.surrogate_width);
}

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed JSON config in " + path);

    get_if(j, "task", cfg.task);
    get_if(j, "endpoint", cfg.endpoint);
    get_if(j, "seed", cfg.seed);
    get_if(j, "out", cfg.out);
    get_if(j, "test_samples", cfg.test_samples);
    if (j.contains("actor")) {
        const auto& a = j["actor"];
        get_if(a, "hidden", cfg.actor_hidden);
        get_if(a, "T", cfg.actor_steps);
        if (a.contains("lif1")) parse_lif(a["lif1"], cfg.lif1);
        if (a.contains("lif2")) parse_lif(a["lif2"], cfg.lif2);
    }
    if (j.contains("td3")) {
        const auto& t = j["td3"];
        get_if(t, "gamma", cfg.td3.gamma);
        get_if(t, "tau", cfg.td3.tau);
        get_if(t, "policy_delay", cfg.td3.policy_delay);
        get_if(t, "explore_sigma", cfg.td3.explore_sigma);
        get_if(t, "target_sigma", cfg.td3.target_sigma);
        get_if(t, "target_clip", cfg.td3.target_clip);
        get_if(t, "batch_size", cfg.td3.batch_size);
        get_if(t, "warmup_steps", cfg.td3.warmup_steps);
        get_if(t, "total_steps", cfg.td3.total_steps);
        get_if(t, "buffer_capacity", cfg.td3.buffer_capacity);
        get_if(t, "actor_lr", cfg.td3.actor_lr);
        get_if(t, "critic_lr", cfg.td3.critic_lr);
        get_if(t, "critic_hidden", cfg.td3.critic_hidden);
        get_if(t, "eval_every", cfg.td3.eval_every);
        get_if(t, "eval_episodes", cfg.td3.eval_episodes);
        get_if(t, "bootstrap_through_truncation", cfg.td3.bootstrap_through_truncation);
    }
    if (j.contains("mesh")) {
        const auto& m = j["mesh"];
        get_if(m, "n", cfg.mesh_n);
        if (m.contains("map")) {
            const auto& pm = m["map"];
            get_if(pm, "alpha", cfg.map.alpha);
            get_if(pm, "phi0", cfg.map.phi0);
            get_if(pm, "v_min", cfg.map.v_min);
            get_if(pm, "v_max", cfg.map.v_max);
            std::string mode = "linear";
            get_if(pm, "mode", mode);
            if (mode == "linear")
                cfg.map.mode = mesh::PhaseMode::Linear;
            else if (mode == "quadratic")
                cfg.map.mode = mesh::PhaseMode::Quadratic;
            else
                throw ConfigError("mesh.map.mode must be linear or quadratic");
        }
        if (m.contains("noise")) {
            get_if(m["noise"], "phase_jitter_sigma", cfg.noise.phase_jitter_sigma);
            get_if(m["noise"], "readout_sigma", cfg.noise.readout_sigma);
        }
        get_if(m, "gain_trim", cfg.gain_trim);
        get_if(m, "route_through_mesh", cfg.route_through_mesh);
    }
    if (j.contains("spgd")) {
        const auto& s = j["spgd"];
        get_if(s, "gain", cfg.spgd.gain);
        get_if(s, "perturb_amp", cfg.spgd.perturb_amp);
        get_if(s, "max_iters", cfg.spgd.max_iters);
        get_if(s, "target_similarity", cfg.spgd.target_similarity);
        get_if(s, "gain_decay_exponent", cfg.spgd.gain_decay_exponent);
        get_if(s, "perturb_decay_exponent", cfg.spgd.perturb_decay_exponent);
        get_if(s, "decay_offset", cfg.spgd.decay_offset);
        get_if(s, "init_jitter", cfg.spgd.init_jitter);
        get_if(s, "restarts", cfg.spgd.restarts);
        std::string objective = "cosine";
        get_if(s, "objective", objective);
        if (objective == "cosine")
            cfg.spgd.objective = spgd::Objective::Cosine;
        else if (objective == "neg_mse")
            cfg.spgd.objective = spgd::Objective::NegMse;
        else
            throw ConfigError("spgd.objective must be cosine or neg_mse");
    }
    return cfg;
}

json resolved_config(const ExperimentConfig& cfg, const std::string& command) {
    json j;
    j["command"] = command;
    j["task"] = cfg.task;
    j["endpoint"] = cfg.endpoint;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out;
    j["test_samples"] = cfg.test_samples;
    j["actor"] = {{"hidden", cfg.actor_hidden},
                  {"T", cfg.actor_steps},
                  {"lif1",
                   {{"decay", cfg.lif1.decay},
                    {"threshold", cfg.lif1.threshold},
                    {"surrogate_width", cfg.lif1.surrogate_width}}},
                  {"lif2",
                   {{"decay", cfg.lif2.decay},
                    {"threshold", cfg.lif2.threshold},
                    {"surrogate_width", cfg.lif2.surrogate_width}}}};
    j["td3"] = {{"gamma", cfg.td3.gamma},
                {"tau", cfg.td3.tau},
                {"policy_delay", cfg.td3.policy_delay},
                {"explore_sigma", cfg.td3.explore_sigma},
                {"target_sigma", cfg.td3.target_sigma},
                {"target_clip", cfg.td3.target_clip},
                {"batch_size", cfg.td3.batch_size},
                {"warmup_steps", cfg.td3.warmup_steps},
                {"total_steps", cfg.td3.total_steps},
                {"buffer_capacity", cfg.td3.buffer_capacity},
                {"actor_lr", cfg.td3.actor_lr},
                {"critic_lr", cfg.td3.critic_lr},
                {"critic_hidden", cfg.td3.critic_hidden},
                {"eval_every", cfg.td3.eval_every},
                {"eval_episodes", cfg.td3.eval_episodes},
                {"bootstrap_through_truncation", cfg.td3.bootstrap_through_truncation}};
    j["mesh"] = {{"n", cfg.mesh_n},
                 {"map",
                  {{"alpha", cfg.map.alpha},
                   {"phi0", cfg.map.phi0},
                   {"mode", cfg.map.mode == mesh::PhaseMode::Linear ? "linear" : "quadratic"},
                   {"v_min", cfg.map.v_min},
                   {"v_max", cfg.map.v_max}}},
                 {"noise",
                  {{"phase_jitter_sigma", cfg.noise.phase_jitter_sigma},
                   {"readout_sigma", cfg.noise.readout_sigma}}},
                 {"gain_trim", cfg.gain_trim},
                 {"route_through_mesh", cfg.route_through_mesh}};
    j["spgd"] = {{"gain", cfg.spgd.gain},
                 {"perturb_amp", cfg.spgd.perturb_amp},
                 {"max_iters", cfg.spgd.max_iters},
                 {"target_similarity", cfg.spgd.target_similarity},
                 {"objective",
                  cfg.spgd.objective == spgd::Objective::Cosine ? "cosine" : "neg_mse"},
                 {"gain_decay_exponent", cfg.spgd.gain_decay_exponent},
                 {"perturb_decay_exponent", cfg.spgd.perturb_decay_exponent},
                 {"decay_offset", cfg.spgd.decay_offset},
                 {"init_jitter", cfg.spgd.init_jitter},
                 {"restarts", cfg.spgd.restarts}};
    return j;
}

std::unique_ptr<envs::Environment> make_env(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.task == "pendulum")
        return std::make_unique<envs::PendulumEnv>(envs::PendulumParams{}, seed);
    if (cfg.task == "remote") {
        if (cfg.endpoint.empty())
            throw ConfigError("task 'remote' needs an endpoint (tcp:... or stdio:...)");
        envs::RemoteEnvEndpoint endpoint;
        endpoint.transport = cfg.endpoint;
        return std::make_unique<envs::RemoteEnv>(endpoint);
    }
    throw ConfigError("unknown task '" + cfg.task + "' (expected pendulum or remote)");
}

snn::ActorNet make_actor(const ExperimentConfig& cfg, const envs::EnvSpec& spec) {
    if ((spec.action_high + spec.action_low).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("asymmetric action ranges are not supported");
    Rng rng(derive_seed(cfg.seed, 0xAC7));
    auto actor = snn::ActorNet::init(spec.state_dim, cfg.actor_hidden, spec.action_dim,
                                     cfg.actor_steps, spec.action_high, rng);
    actor.lif1 = cfg.lif1;
    actor.lif2 = cfg.lif2;
    return actor;
}

hybrid::MeshConfig make_mesh(const ExperimentConfig& cfg) {
    hybrid::MeshConfig mesh_cfg;
    mesh_cfg.topology = mesh::MeshTopology::rectangular(cfg.mesh_n);
    mesh_cfg.map = cfg.map;
    mesh_cfg.noise = cfg.noise;
    return mesh_cfg;
}

hybrid::HardwareLayer rebuild_layer(const ExperimentConfig& cfg,
                                    const hybrid::WeightSnapshot& snap,
                                    const std::string& voltages_path) {
    hybrid::HardwareLayer layer;
    layer.config = make_mesh(cfg);
    layer.voltages = io::load_voltages(voltages_path);
    mesh::validate_voltages(layer.config.topology, layer.config.map, layer.voltages);
    layer.scale = snap.scale;
    Rng rng(0);
    layer.w_eff_scaled =
        snap.scale * mesh::effective_weight(layer.config.topology, layer.config.map,
                                            layer.voltages, mesh::NoiseModel{}, rng);
    layer.route_through_mesh = cfg.route_through_mesh;
    layer.noise_seed = derive_seed(cfg.seed, 0x307);
    return layer;
}

fs::path prepare_out(const ExperimentConfig& cfg, const std::string& command) {
    fs::path dir(cfg.out);
    fs::create_directories(dir);
    std::ofstream out(dir / "resolved-config.json");
    out << resolved_config(cfg, command).dump(2) << "\n";
    return dir;
}

int cmd_train(const ExperimentConfig& cfg) {
    fs::path dir = prepare_out(cfg, "train");
    auto env = make_env(cfg, derive_seed(cfg.seed, 0xE0));
    auto eval_env = make_env(cfg, derive_seed(cfg.seed, 0xE1));
    auto actor = make_actor(cfg, env->spec());

    td3::Td3Config tcfg = cfg.td3;
    tcfg.seed = cfg.seed;
    std::cout << "training " << cfg.task << " for " << tcfg.total_steps << " steps (seed "
              << cfg.seed << ")\n";
    auto result = td3::train(*env, *eval_env, actor, tcfg, nullptr,
                             [](long step, double mean, const snn::ActorNet&,
                                snn::LinearBackend&) {
                                 std::cout << "  step " << step << "  eval " << mean << "\n";
                                 return false;
                             });

    io::save_actor(result.actor, (dir / "actor.json").string());
    io::save_trace_csv(result.trace, (dir / "trace.csv").string());

    auto sample_env = make_env(cfg, derive_seed(cfg.seed, 0xE2));
    auto snap = hybrid::extract_l2(result.actor, *sample_env, cfg.test_samples,
                                   derive_seed(cfg.seed, 0xE3));
    io::save_weight_snapshot(snap, (dir / "snapshot.json").string());
    std::cout << "wrote " << (dir / "actor.json").string() << ", snapshot.json, trace.csv\n";
    return 0;
}

int cmd_calibrate(const ExperimentConfig& cfg, const std::string& snapshot_path) {
    fs::path dir = prepare_out(cfg, "calibrate");
    auto snap = io::load_weight_snapshot(snapshot_path);

    spgd::SpgdConfig scfg = cfg.spgd;
    scfg.seed = cfg.seed;
    std::cout << "calibrating " << snap.actor.hidden_dim() << "x" << snap.actor.hidden_dim()
              << " layer, budget " << scfg.max_iters << " iterations\n";
    auto result = hybrid::map_to_hardware(snap, make_mesh(cfg), scfg, cfg.gain_trim);

    io::save_voltages(result.record.best_voltages, (dir / "voltages.csv").string());
    io::save_calibration_csv(result.record, (dir / "calibration.csv").string());
    json summary;
    summary["best_similarity"] = result.record.best_similarity;
    summary["converged"] = result.record.converged;
    summary["degenerate"] = result.record.degenerate;
    summary["iterations"] = result.record.history.empty()
                                ? 0
                                : result.record.history.back().iteration;
    std::ofstream out(dir / "calibration-summary.json");
    out << summary.dump(2) << "\n";
    std::cout << "best similarity " << result.record.best_similarity
              << (result.record.converged ? " (converged)" : " (budget exhausted)") << "\n";
    return 0;
}

int cmd_compare(const ExperimentConfig& cfg, const std::string& snapshot_path,
                const std::string& voltages_path) {
    fs::path dir = prepare_out(cfg, "compare");
    auto snap = io::load_weight_snapshot(snapshot_path);
    auto layer = rebuild_layer(cfg, snap, voltages_path);

    auto report = hybrid::offline_compare(snap, layer);
    io::save_deviation_report(report, (dir / "deviation.json").string(),
                              (dir / "deviation.csv").string());
    std::cout << "mean action deviation " << report.mean_pct << "% (max " << report.max_pct
              << "%), layer-2 error std " << report.err_std << "\n";
    return 0;
}

int cmd_cotrain(const ExperimentConfig& cfg, const std::string& snapshot_path,
                const std::string& voltages_path) {
    fs::path dir = prepare_out(cfg, "cotrain");
    auto snap = io::load_weight_snapshot(snapshot_path);
    auto layer = rebuild_layer(cfg, snap, voltages_path);

    auto env = make_env(cfg, derive_seed(cfg.seed, 0xC0));
    auto eval_env = make_env(cfg, derive_seed(cfg.seed, 0xC1));
    td3::Td3Config tcfg = cfg.td3;
    tcfg.seed = cfg.seed;
    std::cout << "co-training with the hardware layer frozen, " << tcfg.total_steps
              << " steps\n";
    auto result = hybrid::cotrain(snap, layer, *env, *eval_env, tcfg);

    io::save_actor(result.actor, (dir / "actor-cotrained.json").string());
    io::save_trace_csv(result.trace, (dir / "trace.csv").string());
    std::cout << "wrote " << (dir / "actor-cotrained.json").string() << ", trace.csv\n";
    return 0;
}

int cmd_report(const ExperimentConfig& cfg, double threshold,
               const std::vector<std::string>& software,
               const std::vector<std::string>& cotrain) {
    fs::path dir = prepare_out(cfg, "report");
    auto load_runs = [](const std::vector<std::string>& paths) {
        std::vector<std::pair<std::string, std::vector<td3::TraceRow>>> runs;
        for (const auto& p : paths) runs.emplace_back(p, io::load_trace_csv(p));
        return runs;
    };
    auto report = hybrid::convergence_report(load_runs(software), load_runs(cotrain), threshold);

    std::ofstream out(dir / "convergence.json");
    out << io::convergence_to_json(report).dump(2) << "\n";

    std::ofstream csv(dir / "convergence.csv");
    csv << "kind,label,converged,steps_to_threshold\n";
    for (const auto& e : report.software)
        csv << "software," << e.label << "," << (e.converged ? 1 : 0) << ","
            << (e.converged ? std::to_string(e.steps_to_threshold) : "") << "\n";
    for (const auto& e : report.cotrain)
        csv << "cotrain," << e.label << "," << (e.converged ? 1 : 0) << ","
            << (e.converged ? std::to_string(e.steps_to_threshold) : "") << "\n";

    std::cout << "software mean steps-to-threshold " << report.mean_software_steps
              << ", cotrain " << report.mean_cotrain_steps << ", reduction "
              << report.reduction_percent << "% (" << report.excluded
              << " non-convergent runs excluded)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photonic spiking reinforcement-learning experiment runner"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_override, endpoint_override, task_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config JSON");
    app.add_option("--seed", seed_override, "master seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out", out_override, "output directory");

    auto* train = app.add_subcommand("train", "train the spiking policy");
    long steps_override = -1;
    train->add_option("--task", task_override, "pendulum | remote");
    train->add_option("--endpoint", endpoint_override, "remote env endpoint");
    train->add_option("--steps", steps_override, "environment steps");
    int samples_override = -1;
    train->add_option("--samples", samples_override, "test-set size extracted after training");

    auto* calibrate = app.add_subcommand("calibrate", "map layer 2 onto the mesh");
    std::string snapshot_path;
    calibrate->add_option("--snapshot", snapshot_path, "weight snapshot JSON")->required();
    double target_similarity = -1.0;
    int iters_override = -1;
    calibrate->add_option("--target-similarity", target_similarity, "stop threshold");
    calibrate->add_option("--iters", iters_override, "iteration budget");

    auto* compare = app.add_subcommand("compare", "offline hardware-vs-software comparison");
    std::string cmp_snapshot, cmp_voltages;
    compare->add_option("--snapshot", cmp_snapshot, "weight snapshot JSON")->required();
    compare->add_option("--voltages", cmp_voltages, "calibrated voltage table CSV")->required();

    auto* cotrain = app.add_subcommand("cotrain", "resume training with the layer frozen");
    std::string cot_snapshot, cot_voltages;
    long cot_steps = -1;
    cotrain->add_option("--snapshot", cot_snapshot, "weight snapshot JSON")->required();
    cotrain->add_option("--voltages", cot_voltages, "calibrated voltage table CSV")->required();
    cotrain->add_option("--steps", cot_steps, "environment steps");
    cotrain->add_option("--task", task_override, "pendulum | remote");
    cotrain->add_option("--endpoint", endpoint_override, "remote env endpoint");

    auto* report = app.add_subcommand("report", "convergence comparison across runs");
    double threshold = -200.0;
    std::vector<std::string> sw_traces, ct_traces;
    report->add_option("--threshold", threshold, "evaluation-return threshold");
    report->add_option("--software", sw_traces, "software reward trace CSVs")->expected(-1);
    report->add_option("--cotrain", ct_traces, "cotrain reward trace CSVs")->expected(-1);

    try {
        app.parse(argc, argv);

        ExperimentConfig cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed_override;
        if (!out_override.empty()) cfg.out = out_override;
        if (!task_override.empty()) cfg.task = task_override;
        if (!endpoint_override.empty()) cfg.endpoint = endpoint_override;
        if (steps_override >= 0) cfg.td3.total_steps = steps_override;
        if (cot_steps >= 0) cfg.td3.total_steps = cot_steps;
        if (samples_override > 0) cfg.test_samples = samples_override;
        if (target_similarity > 0.0) cfg.spgd.target_similarity = target_similarity;
        if (iters_override > 0) cfg.spgd.max_iters = iters_override;
        cfg.td3.validate();
        cfg.spgd.validate();

        if (train->parsed()) return cmd_train(cfg);
        if (calibrate->parsed()) return cmd_calibrate(cfg, snapshot_path);
        if (compare->parsed()) return cmd_compare(cfg, cmp_snapshot, cmp_voltages);
        if (cotrain->parsed()) return cmd_cotrain(cfg, cot_snapshot, cot_voltages);
        if (report->parsed()) return cmd_report(cfg, threshold, sw_traces, ct_traces);
        throw ConfigError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
