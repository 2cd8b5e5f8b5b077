// SPDX-License-Identifier: Apache-2.0

#include "photonrl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "photonrl/errors.hpp"

namespace photonrl::io {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(std::string("snapshot field '") + name + "' must be a nested array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ConfigError(std::string("snapshot field '") + name + "' is ragged");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j, const char* name) {
    if (!j.is_array())
        throw ConfigError(std::string("snapshot field '") + name + "' must be an array");
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json lif_to_json(const snn::LifConfig& cfg) {
    return json{{"decay", cfg.decay},
                {"threshold", cfg.threshold},
                {"surrogate_width", cfg.surrogate_width}};
}

snn::LifConfig lif_from_json(const json& j) {
    snn::LifConfig cfg;
    cfg.decay = j.at("decay").get<double>();
    cfg.threshold = j.at("threshold").get<double>();
    cfg.surrogate_width = j.at("surrogate_width").get<double>();
    cfg.validate();
    return cfg;
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed JSON in " + path);
    return j;
}

void write_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

json actor_to_json(const snn::ActorNet& net) {
    json j;
    j["arch"] = {net.state_dim(), net.hidden_dim(), net.hidden_dim(), net.action_dim()};
    j["T"] = net.steps;
    j["lif"] = {{"lif1", lif_to_json(net.lif1)},
                {"lif2", lif_to_json(net.lif2)},
                {"reset", "hard_zero"}};
    j["W1"] = matrix_to_json(net.w1);
    j["b1"] = vector_to_json(net.b1);
    j["W2"] = matrix_to_json(net.w2);
    j["b2"] = vector_to_json(net.b2);
    j["W3"] = matrix_to_json(net.w3);
    j["b3"] = vector_to_json(net.b3);
    j["action_scale"] = vector_to_json(net.action_scale);
    return j;
}

snn::ActorNet actor_from_json(const json& j) {
    snn::ActorNet net;
    net.w1 = matrix_from_json(j.at("W1"), "W1");
    net.b1 = vector_from_json(j.at("b1"), "b1");
    net.w2 = matrix_from_json(j.at("W2"), "W2");
    net.b2 = vector_from_json(j.at("b2"), "b2");
    net.w3 = matrix_from_json(j.at("W3"), "W3");
    net.b3 = vector_from_json(j.at("b3"), "b3");
    net.action_scale = vector_from_json(j.at("action_scale"), "action_scale");
    net.steps = j.at("T").get<int>();
    if (j.contains("lif")) {
        net.lif1 = lif_from_json(j["lif"].at("lif1"));
        net.lif2 = lif_from_json(j["lif"].at("lif2"));
    }
    if (j.contains("arch")) {
        const auto arch = j["arch"];
        if (arch.size() != 4 || arch[0].get<int>() != net.state_dim() ||
            arch[1].get<int>() != net.hidden_dim() || arch[3].get<int>() != net.action_dim())
            throw ConfigError("snapshot arch does not match the stored matrices");
    }
    net.validate();
    return net;
}

void save_actor(const snn::ActorNet& net, const std::string& path) {
    write_file(actor_to_json(net), path);
}

snn::ActorNet load_actor(const std::string& path) { return actor_from_json(parse_file(path)); }

json weight_snapshot_to_json(const hybrid::WeightSnapshot& snap) {
    json j;
    j["actor"] = actor_to_json(snap.actor);
    j["l2_target"] = matrix_to_json(snap.l2_target);
    j["scale"] = snap.scale;
    json samples = json::array();
    for (const auto& s : snap.test_set) {
        json item;
        item["obs"] = vector_to_json(s.obs);
        item["action"] = vector_to_json(s.action);
        json inputs = json::array(), outputs = json::array();
        for (const auto& v : s.inputs) inputs.push_back(vector_to_json(v));
        for (const auto& v : s.outputs) outputs.push_back(vector_to_json(v));
        item["inputs"] = std::move(inputs);
        item["outputs"] = std::move(outputs);
        samples.push_back(std::move(item));
    }
    j["test_set"] = std::move(samples);
    return j;
}

hybrid::WeightSnapshot weight_snapshot_from_json(const json& j) {
    hybrid::WeightSnapshot snap;
    snap.actor = actor_from_json(j.at("actor"));
    snap.l2_target = matrix_from_json(j.at("l2_target"), "l2_target");
    snap.scale = j.at("scale").get<double>();
    for (const auto& item : j.at("test_set")) {
        hybrid::TestSample s;
        s.obs = vector_from_json(item.at("obs"), "obs");
        s.action = vector_from_json(item.at("action"), "action");
        for (const auto& v : item.at("inputs")) s.inputs.push_back(vector_from_json(v, "inputs"));
        for (const auto& v : item.at("outputs"))
            s.outputs.push_back(vector_from_json(v, "outputs"));
        snap.test_set.push_back(std::move(s));
    }
    return snap;
}

void save_weight_snapshot(const hybrid::WeightSnapshot& snap, const std::string& path) {
    write_file(weight_snapshot_to_json(snap), path);
}

hybrid::WeightSnapshot load_weight_snapshot(const std::string& path) {
    return weight_snapshot_from_json(parse_file(path));
}

void save_voltages(const mesh::VoltageTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "shifter_id,kind,voltage\n";
    for (Eigen::Index k = 0; k < table.mzi.size(); ++k)
        out << k << ",mzi," << fmt(table.mzi[k]) << "\n";
    for (Eigen::Index i = 0; i < table.diag.size(); ++i)
        out << i << ",diag," << fmt(table.diag[i]) << "\n";
}

mesh::VoltageTable load_voltages(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("shifter_id,kind,voltage", 0) != 0)
        throw ConfigError(path + " is not a voltage table (bad header)");

    std::vector<std::pair<long, double>> mzi, diag;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id_s, kind, volt_s;
        if (!std::getline(row, id_s, ',') || !std::getline(row, kind, ',') ||
            !std::getline(row, volt_s, ','))
            throw ConfigError("malformed voltage row: " + line);
        const long id = std::stol(id_s);
        const double v = std::stod(volt_s);
        if (kind == "mzi")
            mzi.emplace_back(id, v);
        else if (kind == "diag")
            diag.emplace_back(id, v);
        else
            throw ConfigError("unknown shifter kind '" + kind + "'");
    }
    auto build = [](std::vector<std::pair<long, double>>& rows, const char* kind) {
        std::sort(rows.begin(), rows.end());
        Eigen::VectorXd v(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].first != static_cast<long>(i))
                throw ConfigError(std::string("non-contiguous ") + kind + " shifter ids");
            v[static_cast<Eigen::Index>(i)] = rows[i].second;
        }
        return v;
    };
    mesh::VoltageTable table;
    table.mzi = build(mzi, "mzi");
    table.diag = build(diag, "diag");
    return table;
}

void save_topology(const mesh::MeshTopology& topo, const std::string& path) {
    json j;
    j["n"] = topo.n;
    json layout = json::array();
    for (const auto& p : topo.layout) layout.push_back({p.layer, p.top_mode});
    j["layout"] = std::move(layout);
    write_file(j, path);
}

mesh::MeshTopology load_topology(const std::string& path) {
    json j = parse_file(path);
    mesh::MeshTopology topo;
    topo.n = j.at("n").get<int>();
    for (const auto& p : j.at("layout"))
        topo.layout.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    topo.validate();
    return topo;
}

void save_calibration_csv(const spgd::CalibrationRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "iteration,objective,similarity\n";
    for (const auto& row : record.history)
        out << row.iteration << "," << fmt(row.objective) << "," << fmt(row.similarity) << "\n";
}

void save_trace_csv(const std::vector<td3::TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "step,episode,return,eval_mean,eval_std\n";
    for (const auto& row : trace) {
        out << row.step << "," << row.episode << ",";
        if (row.has_return) out << fmt(row.episode_return);
        out << ",";
        if (row.has_eval) out << fmt(row.eval_mean);
        out << ",";
        if (row.has_eval) out << fmt(row.eval_std);
        out << "\n";
    }
}

std::vector<td3::TraceRow> load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,episode,return,eval_mean,eval_std", 0) != 0)
        throw ConfigError(path + " is not a reward trace (bad header)");
    std::vector<td3::TraceRow> trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string step_s, ep_s, ret_s, mean_s, std_s;
        std::getline(row, step_s, ',');
        std::getline(row, ep_s, ',');
        std::getline(row, ret_s, ',');
        std::getline(row, mean_s, ',');
        std::getline(row, std_s, ',');
        td3::TraceRow r;
        r.step = std::stol(step_s);
        r.episode = std::stol(ep_s);
        if (!ret_s.empty()) {
            r.episode_return = std::stod(ret_s);
            r.has_return = true;
        }
        if (!mean_s.empty()) {
            r.eval_mean = std::stod(mean_s);
            r.eval_std = std_s.empty() ? 0.0 : std::stod(std_s);
            r.has_eval = true;
        }
        trace.push_back(r);
    }
    return trace;
}

void save_deviation_report(const hybrid::DeviationReport& report, const std::string& json_path,
                           const std::string& csv_path) {
    json j;
    j["mean_deviation_pct"] = report.mean_pct;
    j["max_deviation_pct"] = report.max_pct;
    j["l2_error_mean"] = report.err_mean;
    j["l2_error_std"] = report.err_std;
    j["channel_error_mean"] = report.channel_err_mean;
    j["channel_error_std"] = report.channel_err_std;
    j["samples"] = report.samples.size();
    j["transmitted_values"] = report.series_target.size();
    write_file(j, json_path);

    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot write " + csv_path);
    out << "sample,channel,target,measured,error\n";
    for (Eigen::Index s = 0; s < report.series_target.cols(); ++s) {
        for (Eigen::Index c = 0; c < report.series_target.rows(); ++c) {
            const double target = report.series_target(c, s);
            const double measured = report.series_measured(c, s);
            out << s << "," << c << "," << fmt(target) << "," << fmt(measured) << ","
                << fmt(measured - target) << "\n";
        }
    }
}

json convergence_to_json(const hybrid::ConvergenceReport& report) {
    json j;
    j["threshold"] = report.threshold;
    auto entries = [](const std::vector<hybrid::ConvergenceEntry>& list) {
        json arr = json::array();
        for (const auto& e : list) {
            json item;
            item["label"] = e.label;
            item["converged"] = e.converged;
            if (e.converged)
                item["steps_to_threshold"] = e.steps_to_threshold;
            else
                item["steps_to_threshold"] = nullptr;
            arr.push_back(std::move(item));
        }
        return arr;
    };
    j["software"] = entries(report.software);
    j["cotrain"] = entries(report.cotrain);
    j["mean_software_steps"] = report.mean_software_steps;
    j["mean_cotrain_steps"] = report.mean_cotrain_steps;
    j["reduction_percent"] = report.reduction_percent;
    j["excluded_runs"] = report.excluded;
    return j;
}

}  // namespace photonrl::io
