#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "flowgnn/eval.hpp"
#include "flowgnn/graph.hpp"
#include "flowgnn/ingest.hpp"
#include "flowgnn/manifest.hpp"
#include "flowgnn/pipeline.hpp"
#include "flowgnn/synth.hpp"

using namespace flowgnn;
using nlohmann::json;

namespace {

struct timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// seeded order-preserving subsample
std::vector<flow_record> subsample(std::vector<flow_record> records, size_t max_flows, uint64_t seed) {
    if (max_flows == 0 || records.size() <= max_flows) return records;
    std::vector<size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng gen(seed, "subsample");
    gen.shuffle(idx);
    idx.resize(max_flows);
    std::sort(idx.begin(), idx.end());
    std::vector<flow_record> out;
    out.reserve(max_flows);
    for (size_t i : idx) out.push_back(std::move(records[i]));
    return out;
}

std::vector<double> parse_grid(const std::string& spec) {
    double lo, hi;
    int steps;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 2 || hi <= lo)
        throw std::runtime_error("bad grid spec '" + spec + "', expected lo:hi:steps");
    std::vector<double> g(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) g[static_cast<size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
    return g;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open output: " + path);
    os << j.dump(2) << "\n";
}

key_mode parse_key_mode(const std::string& s) {
    if (s == "addr") return key_mode::addr;
    if (s == "addr+port") return key_mode::addr_port;
    throw std::runtime_error("bad --key value '" + s + "' (addr or addr+port)");
}

// training-side preparation shared by train/evaluate/compare-splits: fits the
// vocabulary and scaler on the training records only, transforms everything
struct prepared_data {
    feature_schema schema;
    scaler scale;
    tensor2 features;
};

prepared_data prepare_features(const std::vector<flow_record>& records, const feature_schema& base,
                               const std::vector<uint64_t>& train_idx) {
    prepared_data p;
    p.schema = base;
    std::vector<flow_record> train_records;
    train_records.reserve(train_idx.size());
    for (uint64_t i : train_idx) train_records.push_back(records[i]);
    fit_vocabularies(train_records, p.schema);
    p.scale = fit_scaler(train_records);
    p.features = transform(records, p.scale, p.schema);
    return p;
}

std::vector<uint64_t> all_indices(size_t n) {
    std::vector<uint64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// trailing windows become the validation set
void split_validation(std::vector<window_graph>& windows, double val_fraction,
                      std::vector<window_graph>& val_out) {
    val_out.clear();
    if (windows.size() < 2 || val_fraction <= 0.0) return;
    size_t n_val = static_cast<size_t>(std::max(1.0, val_fraction * static_cast<double>(windows.size())));
    if (n_val >= windows.size()) n_val = windows.size() - 1;
    for (size_t i = windows.size() - n_val; i < windows.size(); ++i) val_out.push_back(std::move(windows[i]));
    windows.resize(windows.size() - n_val);
}

json curve_to_json(const train_result& tr) {
    json curve = json::array();
    for (size_t e = 0; e < tr.curve.size(); ++e) {
        json row{{"epoch", e}, {"loss", tr.curve[e].loss}, {"val_f1", tr.curve[e].val_f1}};
        if (tr.curve[e].val_auc) row["val_auc"] = *tr.curve[e].val_auc;
        curve.push_back(std::move(row));
    }
    return curve;
}

struct trained {
    model net;
    train_result result;
};

trained run_training(const std::vector<flow_record>& records, const tensor2& features,
                     const std::vector<uint64_t>& train_idx, const model_config& cfg) {
    auto windows = make_windows(records, features, train_idx, cfg);
    std::vector<window_graph> val;
    split_validation(windows, cfg.val_fraction, val);
    trained t;
    t.net.init(features.cols, cfg);
    t.result = train_model(t.net, windows, val);
    return t;
}

json evaluate_on(const std::vector<flow_record>& records, const feature_schema& base_schema,
                 const split_plan& plan, const model_config& cfg, const std::string& roc_path,
                 const std::string& sweep_spec, model* trained_out, scaler* scaler_out,
                 feature_schema* schema_out) {
    auto train_idx = plan.side_indices(split_side::train);
    auto test_idx = plan.side_indices(split_side::test);
    if (train_idx.empty() || test_idx.empty())
        throw std::runtime_error("split leaves an empty train or test side");

    prepared_data prep = prepare_features(records, base_schema, train_idx);
    trained t = run_training(records, prep.features, train_idx, cfg);

    auto test_windows = make_windows(records, prep.features, test_idx, cfg);
    auto scored = classify_windows(t.net, test_windows, cfg.threshold);
    eval_report rep = compute_metrics(scored);
    if (!sweep_spec.empty()) rep.sweep = threshold_sweep(scored, parse_grid(sweep_spec));
    if (!roc_path.empty()) write_roc_csv(roc_path, rep.roc);

    json out;
    out["config"] = cfg.to_json();
    out["split"] = plan.to_json();
    out["metrics"] = rep.to_json();
    out["train"] = {{"epochs_run", t.result.epochs_run},
                    {"best_epoch", t.result.best_epoch},
                    {"best_val_f1", t.result.best_val_f1},
                    {"curve", curve_to_json(t.result)}};
    if (trained_out) *trained_out = std::move(t.net);
    if (scaler_out) *scaler_out = prep.scale;
    if (schema_out) *schema_out = prep.schema;
    return out;
}

split_plan build_plan(const std::string& kind, const std::vector<flow_record>& records, double fraction,
                      uint64_t seed, bool allow_type_overlap) {
    if (kind == "random") return random_split(records, fraction, seed);
    if (kind == "ip") {
        ip_split_options opts;
        opts.train_fraction = fraction;
        opts.allow_type_overlap = allow_type_overlap;
        return make_ip_split(records, attacker_flow_counts(records), seed, opts);
    }
    throw std::runtime_error("unknown split kind '" + kind + "' (ip or random)");
}

long read_vm_hwm_kb() {
    std::ifstream in("/proc/self/status");
    std::string key;
    long value;
    std::string unit;
    while (in >> key >> value >> unit) {
        if (key == "VmHWM:") return value;
    }
    return -1;
}

// ---- subcommand bodies ----

int cmd_synth(const std::string& preset, const std::string& script_path, uint64_t seed,
              const std::string& out, size_t campaigns, size_t flows_per_step, size_t benign,
              size_t benign_endpoints, size_t features, double separation, double campaign_jitter,
              double noise, size_t attackers, size_t flows_per_attacker, const std::string& emit_script) {
    timer tm;
    scenario_script script;
    if (!script_path.empty()) {
        script = scenario_script::load(script_path);
    } else if (preset == "multi-step") {
        script = multi_step_script(features, separation, noise);
        script.benign.flows = benign;
        script.benign.endpoints = benign_endpoints;
        script.benign.jitter = 0.3 * separation;
    } else if (preset == "campaigns") {
        script = campaigns_script(campaigns, flows_per_step, benign, benign_endpoints, features, separation,
                                  campaign_jitter, noise, seed);
    } else if (preset == "leakage") {
        script = leakage_script(attackers, flows_per_attacker, benign_endpoints,
                                benign / std::max<size_t>(1, benign_endpoints), features, separation, seed);
    } else {
        throw std::runtime_error("unknown preset '" + preset + "' (multi-step, campaigns, leakage)");
    }

    auto [records, truth] = generate(script, seed);
    write_csv(out, records, truth, script.n_features);
    if (!emit_script.empty()) write_json_file(emit_script, script.to_json());

    size_t malicious = 0;
    for (const auto& r : records)
        if (r.label == flow_label::malicious) ++malicious;
    std::cout << "synth: " << records.size() << " flows (" << malicious << " malicious) -> " << out << "\n";

    run_manifest man;
    man.subcommand = "synth";
    man.flags = {{"preset", preset},     {"script", script_path},
                 {"seed", seed},         {"out", out},
                 {"campaigns", campaigns}, {"flows_per_step", flows_per_step},
                 {"benign", benign},     {"benign_endpoints", benign_endpoints},
                 {"features", features}, {"separation", separation},
                 {"campaign_jitter", campaign_jitter}, {"noise", noise},
                 {"attackers", attackers}, {"flows_per_attacker", flows_per_attacker}};
    if (!script_path.empty()) man.add_input(script_path);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_ingest(const std::string& data, const std::string& schema_path, double ratio, uint64_t seed,
               const std::string& out) {
    timer tm;
    feature_schema schema = feature_schema::load(schema_path);
    dataset ds = parse_dataset(data, schema);

    std::cerr << "ingest: " << ds.report.rows_kept << " rows kept, " << ds.report.rows_rejected
              << " rejected\n";
    for (const auto& [line, msg] : ds.report.errors) {
        std::cerr << "  line " << line << ": " << msg << "\n";
    }

    size_t before = ds.records.size();
    if (ratio > 0.0 && !ds.schema.label_column.empty()) {
        ds.records = undersample(ds.records, ratio, seed);
        if (ds.records.size() != before)
            std::cerr << "ingest: undersampled " << before << " -> " << ds.records.size() << " rows\n";
    }
    write_table(out, ds.records, ds.schema);
    std::cout << "ingest: wrote " << ds.records.size() << " records -> " << out << "\n";

    run_manifest man;
    man.subcommand = "ingest";
    man.flags = {{"data", data},
                 {"schema", schema_path},
                 {"undersample_ratio", ratio},
                 {"seed", seed},
                 {"out", out},
                 {"rows_read", ds.report.rows_read},
                 {"rows_rejected", ds.report.rows_rejected},
                 {"rows_written", ds.records.size()}};
    man.add_input(data);
    man.add_input(schema_path);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

// whole-table feature preparation for graph/bench (no split context)
prepared_data prepare_whole_table(dataset& ds) {
    return prepare_features(ds.records, ds.schema, all_indices(ds.records.size()));
}

int cmd_graph_build(const std::string& data, const std::string& mode, size_t window, size_t window_index,
                    const std::string& key, bool weighted, const std::string& out, const std::string& format,
                    const std::string& stats_path) {
    timer tm;
    dataset ds = read_table(data);
    key_mode km = parse_key_mode(key);
    prepared_data prep = prepare_whole_table(ds);

    // pick the requested window of records
    std::vector<flow_record> recs;
    tensor2 feats;
    if (window == 0 || window >= ds.records.size()) {
        recs = ds.records;
        feats = prep.features;
        window_index = 0;
    } else {
        size_t start = window_index * window;
        if (start >= ds.records.size()) throw std::runtime_error("--window-index beyond the table");
        size_t end = std::min(ds.records.size(), start + window);
        recs.assign(ds.records.begin() + static_cast<ptrdiff_t>(start),
                    ds.records.begin() + static_cast<ptrdiff_t>(end));
        feats = tensor2(end - start, prep.features.cols);
        for (size_t i = start; i < end; ++i)
            std::copy(prep.features.row(i), prep.features.row(i) + prep.features.cols, feats.row(i - start));
    }

    flow_graph g;
    if (mode == "flow") {
        g = build_flow_graph(recs, feats, km);
    } else if (mode == "classic" || mode == "line") {
        classic_graph cg = build_classic_graph(recs, km);
        if (mode == "classic") {
            json j;
            j["nodes"] = cg.nodes;
            json edges = json::array();
            for (size_t e = 0; e < cg.edges.size(); ++e)
                edges.push_back({cg.edges[e].first, cg.edges[e].second, cg.provenance[e]});
            j["edges"] = std::move(edges);
            write_json_file(out, j);
            std::cout << "graph: classic, " << cg.nodes.size() << " nodes, " << cg.edges.size()
                      << " edges -> " << out << "\n";
            run_manifest man;
            man.subcommand = "graph";
            man.flags = {{"data", data}, {"mode", mode},     {"window", window},
                         {"key", key},   {"weighted", weighted}, {"out", out}};
            man.add_input(data);
            man.outputs = {out};
            man.seconds = tm.seconds();
            man.write(out + ".manifest.json");
            return 0;
        }
        std::vector<flow_label> labels;
        for (const auto& r : recs) labels.push_back(r.label);
        g = line_graph(cg, feats, labels);
    } else {
        throw std::runtime_error("unknown --mode '" + mode + "' (flow, classic, line)");
    }

    if (format == "json") write_graph_json(out, g);
    else if (format == "bin") write_graph_binary(out, g);
    else throw std::runtime_error("unknown --format '" + format + "' (json or bin)");

    graph_summary st = graph_stats(g);
    if (!stats_path.empty()) {
        json sj;
        sj["nodes"] = st.nodes;
        sj["edges"] = st.edges;
        sj["components"] = st.components;
        json hist = json::object();
        for (const auto& [d, c] : st.degree_histogram) hist[std::to_string(d)] = c;
        sj["degree_histogram"] = std::move(hist);
        sj["build_seconds"] = st.build_seconds;
        sj["weighted"] = weighted;
        write_json_file(stats_path, sj);
    }
    std::cout << "graph: " << mode << ", " << st.nodes << " nodes, " << st.edges << " edges, "
              << st.components << " components -> " << out << "\n";

    run_manifest man;
    man.subcommand = "graph";
    man.flags = {{"data", data}, {"mode", mode},         {"window", window},
                 {"window_index", window_index},         {"key", key},
                 {"weighted", weighted}, {"out", out},   {"format", format}};
    man.add_input(data);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

model_config config_from_flags(const std::string& config_path, const CLI::App* cmd, uint64_t seed,
                               size_t epochs, double lr, size_t window, bool weighted, bool zeta,
                               double threshold, double val_fraction, const std::string& key) {
    model_config cfg;
    if (!config_path.empty()) cfg = model_config::load(config_path);
    // flags win over the config file
    if (cmd->count("--seed")) cfg.seed = seed;
    if (cmd->count("--epochs")) cfg.epochs = epochs;
    if (cmd->count("--lr")) cfg.learning_rate = lr;
    if (cmd->count("--window")) cfg.window = window;
    if (cmd->count("--weighted")) cfg.weighted_adjacency = weighted;
    if (cmd->count("--zeta")) cfg.attention_uses_weights = zeta;
    if (cmd->count("--threshold")) cfg.threshold = threshold;
    if (cmd->count("--val-fraction")) cfg.val_fraction = val_fraction;
    if (cmd->count("--key")) cfg.keying = parse_key_mode(key);
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& data, const model_config& cfg, const std::string& out,
              const std::string& curve_path, const std::string& config_path) {
    timer tm;
    dataset ds = read_table(data);
    for (const auto& r : ds.records) {
        if (r.label == flow_label::unknown)
            throw std::runtime_error("train: table contains unlabeled records");
    }
    auto idx = all_indices(ds.records.size());
    prepared_data prep = prepare_features(ds.records, ds.schema, idx);
    trained t = run_training(ds.records, prep.features, idx, cfg);
    save_checkpoint(out, t.net, prep.schema, prep.scale);

    if (!curve_path.empty()) {
        std::ofstream os(curve_path);
        if (!os) throw std::runtime_error("cannot open curve output: " + curve_path);
        os << "epoch,loss,val_f1,val_auc\n";
        for (size_t e = 0; e < t.result.curve.size(); ++e) {
            const auto& c = t.result.curve[e];
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e, c.loss, c.val_f1,
                          c.val_auc ? *c.val_auc : std::nan(""));
            os << buf;
        }
    }
    std::cout << "train: " << t.result.epochs_run << " epochs, best val f1 " << t.result.best_val_f1
              << " at epoch " << t.result.best_epoch << " -> " << out << "\n";

    run_manifest man;
    man.subcommand = "train";
    man.flags = {{"data", data}, {"config", config_path}, {"out", out}};
    man.flags["resolved_config"] = cfg.to_json();
    man.add_input(data);
    if (!config_path.empty()) man.add_input(config_path);
    man.outputs = {out};
    if (!curve_path.empty()) man.outputs.push_back(curve_path);
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_classify(const std::string& ckpt_path, const std::string& data, double threshold,
                 const std::string& report_path, const std::string& summary_path) {
    timer tm;
    checkpoint ck = load_checkpoint(ckpt_path);
    dataset ds = read_table(data);
    tensor2 features = transform(ds.records, ck.scale, ck.schema);
    auto windows = make_windows(ds.records, features, all_indices(ds.records.size()), ck.net.cfg);
    auto scored = classify_windows(ck.net, windows, threshold);

    std::ofstream os(report_path);
    if (!os) throw std::runtime_error("cannot open report output: " + report_path);
    size_t alerts = 0;
    for (const auto& s : scored) {
        const auto& r = ds.records[s.provenance];
        json row{{"flow", s.provenance}, {"src", r.src_addr},      {"sport", r.src_port},
                 {"dst", r.dst_addr},    {"dport", r.dst_port},    {"ts", r.timestamp},
                 {"score", s.score},
                 {"decision", s.decision == flow_label::malicious ? "malicious" : "benign"}};
        if (s.truth != flow_label::unknown) row["label"] = label_name(s.truth);
        if (!r.attack_type.empty()) row["attack_type"] = r.attack_type;
        os << row.dump() << "\n";
        if (s.decision == flow_label::malicious) ++alerts;
    }
    std::cout << "classify: " << alerts << " alerts over " << scored.size() << " flows (threshold "
              << threshold << ") -> " << report_path << "\n";

    bool labeled = !scored.empty() && scored.front().truth != flow_label::unknown;
    if (!summary_path.empty()) {
        json summary{{"flows", scored.size()}, {"alerts", alerts}, {"threshold", threshold}};
        if (labeled) summary["metrics"] = compute_metrics(scored).to_json();
        write_json_file(summary_path, summary);
    }

    run_manifest man;
    man.subcommand = "classify";
    man.flags = {{"ckpt", ckpt_path}, {"data", data}, {"threshold", threshold}, {"report", report_path}};
    man.add_input(ckpt_path);
    man.add_input(data);
    man.outputs = {report_path};
    if (!summary_path.empty()) man.outputs.push_back(summary_path);
    man.seconds = tm.seconds();
    man.write(report_path + ".manifest.json");
    return 0;
}

int cmd_evaluate(const std::string& data, const std::string& config_path, const model_config& cfg,
                 const std::string& split_kind, double fraction, bool allow_type_overlap, size_t max_flows,
                 const std::string& out, const std::string& roc_path, const std::string& plan_path,
                 const std::string& sweep_spec, bool reference_compare, const std::string& ckpt_out) {
    timer tm;
    dataset ds = read_table(data);
    ds.records = subsample(std::move(ds.records), max_flows, cfg.seed);

    split_plan plan = build_plan(split_kind, ds.records, fraction, cfg.seed, allow_type_overlap);
    model net;
    scaler sc;
    feature_schema schema;
    json report = evaluate_on(ds.records, ds.schema, plan, cfg, roc_path, sweep_spec, &net, &sc, &schema);
    report["data"] = {{"table", data}, {"flows", ds.records.size()}, {"max_flows", max_flows}};
    if (reference_compare) {
        report["reference_comparison"] = {
            {"reference",
             {{"f1", 0.937}, {"auc", 0.965}, {"recall", 0.991}, {"precision", 0.886}, {"fpr", 0.057}}},
            {"indicative_only", true},
            {"note", "reference values come from the original full-dataset evaluation; "
                     "desk-scale runs are not expected to reproduce them"}};
    }
    write_json_file(out, report);
    if (!plan_path.empty()) write_json_file(plan_path, plan.to_json());
    if (!ckpt_out.empty()) save_checkpoint(ckpt_out, net, schema, sc);

    std::cout << "evaluate (" << split_kind << " split): f1 " << report["metrics"]["f1"] << ", fpr "
              << report["metrics"]["fpr"] << ", auc " << report["metrics"]["auc"] << " -> " << out << "\n";

    run_manifest man;
    man.subcommand = "evaluate";
    man.flags = {{"data", data},       {"config", config_path}, {"split", split_kind},
                 {"fraction", fraction}, {"max_flows", max_flows}, {"out", out},
                 {"reference_compare", reference_compare}};
    man.flags["resolved_config"] = cfg.to_json();
    man.add_input(data);
    if (!config_path.empty()) man.add_input(config_path);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& data, const std::string& grid_spec,
              const std::string& out) {
    timer tm;
    checkpoint ck = load_checkpoint(ckpt_path);
    dataset ds = read_table(data);
    for (const auto& r : ds.records) {
        if (r.label == flow_label::unknown) throw std::runtime_error("sweep: table must carry labels");
    }
    tensor2 features = transform(ds.records, ck.scale, ck.schema);
    auto windows = make_windows(ds.records, features, all_indices(ds.records.size()), ck.net.cfg);
    auto scored = classify_windows(ck.net, windows, ck.net.cfg.threshold);
    auto rows = threshold_sweep(scored, parse_grid(grid_spec));
    json out_j = json::array();
    for (const auto& r : rows) {
        out_j.push_back({{"threshold", r.threshold},
                         {"alerts", r.alerts},
                         {"precision", r.precision},
                         {"recall", r.recall},
                         {"fpr", r.fpr},
                         {"f1", r.f1}});
    }
    write_json_file(out, json{{"sweep", out_j}});
    std::cout << "sweep: " << rows.size() << " thresholds -> " << out << "\n";

    run_manifest man;
    man.subcommand = "sweep";
    man.flags = {{"ckpt", ckpt_path}, {"data", data}, {"grid", grid_spec}, {"out", out}};
    man.add_input(ckpt_path);
    man.add_input(data);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_compare_splits(const std::string& data, const std::string& config_path, const model_config& cfg,
                       double fraction, bool allow_type_overlap, const std::string& out) {
    timer tm;
    dataset ds = read_table(data);

    split_plan random_plan = build_plan("random", ds.records, fraction, cfg.seed, allow_type_overlap);
    json random_rep = evaluate_on(ds.records, ds.schema, random_plan, cfg, "", "", nullptr, nullptr, nullptr);

    split_plan ip_plan = build_plan("ip", ds.records, fraction, cfg.seed, allow_type_overlap);
    json ip_rep = evaluate_on(ds.records, ds.schema, ip_plan, cfg, "", "", nullptr, nullptr, nullptr);

    double f1_random = random_rep["metrics"]["f1"].get<double>();
    double f1_ip = ip_rep["metrics"]["f1"].get<double>();
    json report;
    report["config"] = cfg.to_json();
    report["random_split"] = std::move(random_rep);
    report["ip_split"] = std::move(ip_rep);
    report["f1_gap"] = f1_random - f1_ip;
    write_json_file(out, report);

    std::cout << "compare-splits: random f1 " << f1_random << " vs ip f1 " << f1_ip << " (gap "
              << f1_random - f1_ip << ") -> " << out << "\n";

    run_manifest man;
    man.subcommand = "compare-splits";
    man.flags = {{"data", data}, {"config", config_path}, {"fraction", fraction}, {"out", out}};
    man.flags["resolved_config"] = cfg.to_json();
    man.add_input(data);
    if (!config_path.empty()) man.add_input(config_path);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

int cmd_bench(const std::string& data, size_t window, const std::string& key, bool weighted,
              const std::string& out) {
    timer tm;
    dataset ds = read_table(data);
    key_mode km = parse_key_mode(key);
    prepared_data prep = prepare_whole_table(ds);

    std::vector<flow_record> recs = ds.records;
    tensor2 feats = prep.features;
    if (window > 0 && window < recs.size()) {
        recs.resize(window);
        tensor2 cut(window, feats.cols);
        for (size_t i = 0; i < window; ++i)
            std::copy(feats.row(i), feats.row(i) + feats.cols, cut.row(i));
        feats = std::move(cut);
    }

    json modes = json::object();
    {
        timer t;
        flow_graph g = build_flow_graph(recs, feats, km);
        double build = t.seconds();
        timer t2;
        csr_matrix adj = normalized_adjacency(g, weighted);
        double norm = t2.seconds();
        size_t bytes = g.edges.size() * (8 + 8) + g.node_features.size() * 8 + adj.val.size() * (8 + 4);
        modes["flow"] = {{"nodes", g.n_nodes},          {"edges", g.edges.size()},
                         {"build_seconds", build},      {"normalize_seconds", norm},
                         {"approx_bytes", bytes}};
    }
    {
        timer t;
        classic_graph cg = build_classic_graph(recs, km);
        double build = t.seconds();
        size_t bytes = cg.edges.size() * 16 + cg.nodes.size() * 32;
        modes["classic"] = {{"nodes", cg.nodes.size()},
                            {"edges", cg.edges.size()},
                            {"build_seconds", build},
                            {"approx_bytes", bytes}};
        timer t2;
        std::vector<flow_label> labels;
        for (const auto& r : recs) labels.push_back(r.label);
        flow_graph lg = line_graph(cg, feats, labels);
        double lbuild = t2.seconds();
        size_t lbytes = lg.edges.size() * 16 + lg.node_features.size() * 8;
        modes["line"] = {{"nodes", lg.n_nodes},
                         {"edges", lg.edges.size()},
                         {"build_seconds", lbuild},
                         {"approx_bytes", lbytes}};
    }
    json report{{"flows", recs.size()}, {"key", key}, {"weighted", weighted}, {"modes", modes},
                {"peak_rss_kb", read_vm_hwm_kb()}, {"threads", max_threads()}};
    write_json_file(out, report);
    std::cout << "bench -> " << out << "\n" << report["modes"].dump(2) << "\n";

    run_manifest man;
    man.subcommand = "bench";
    man.flags = {{"data", data}, {"window", window}, {"key", key}, {"weighted", weighted}, {"out", out}};
    man.add_input(data);
    man.outputs = {out};
    man.seconds = tm.seconds();
    man.write(out + ".manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-graph intrusion detection toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic flow CSV");
    std::string sy_preset = "campaigns", sy_script, sy_out = "flows.csv", sy_emit;
    uint64_t sy_seed = 1;
    size_t sy_campaigns = 6, sy_fps = 16, sy_benign = 2000, sy_bep = 24, sy_feat = 8;
    size_t sy_attackers = 8, sy_fpa = 150;
    double sy_sep = 3.0, sy_jitter = 1.0, sy_noise = 0.5;
    synth_cmd->add_option("--preset", sy_preset, "multi-step, campaigns, or leakage");
    synth_cmd->add_option("--script", sy_script, "scenario script JSON (overrides --preset)");
    synth_cmd->add_option("--seed", sy_seed, "generation seed");
    synth_cmd->add_option("--out", sy_out, "output CSV")->required();
    synth_cmd->add_option("--campaigns", sy_campaigns, "campaign count (campaigns preset)");
    synth_cmd->add_option("--flows-per-step", sy_fps, "flow count scale per step");
    synth_cmd->add_option("--benign", sy_benign, "background flow count");
    synth_cmd->add_option("--benign-endpoints", sy_bep, "background endpoint pool size");
    synth_cmd->add_option("--features", sy_feat, "numeric feature count");
    synth_cmd->add_option("--separation", sy_sep, "malicious/benign template separation");
    synth_cmd->add_option("--campaign-jitter", sy_jitter, "per-campaign template offset");
    synth_cmd->add_option("--noise", sy_noise, "per-flow feature noise");
    synth_cmd->add_option("--attackers", sy_attackers, "attacker count (leakage preset)");
    synth_cmd->add_option("--flows-per-attacker", sy_fpa, "flows per attacker (leakage preset)");
    synth_cmd->add_option("--emit-script", sy_emit, "also write the generated script JSON");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "parse a flow CSV into a binary table");
    std::string in_data, in_schema, in_out = "flows.table";
    double in_ratio = 4.0;
    uint64_t in_seed = 1;
    ingest_cmd->add_option("--data", in_data, "input CSV")->required();
    ingest_cmd->add_option("--schema", in_schema, "schema config JSON")->required();
    ingest_cmd->add_option("--undersample-ratio", in_ratio, "target normal:malicious ratio (0 disables)");
    ingest_cmd->add_option("--seed", in_seed, "undersampling seed");
    ingest_cmd->add_option("--out", in_out, "output table")->required();

    // graph build
    auto* graph_cmd = app.add_subcommand("graph", "graph construction");
    auto* build_cmd = graph_cmd->add_subcommand("build", "build and export a graph");
    std::string gb_data, gb_mode = "flow", gb_key = "addr", gb_out = "graph.json", gb_format = "json", gb_stats;
    size_t gb_window = 0, gb_window_index = 0;
    bool gb_weighted = true;
    build_cmd->add_option("--data", gb_data, "input table")->required();
    build_cmd->add_option("--mode", gb_mode, "flow, classic, or line");
    build_cmd->add_option("--window", gb_window, "flows per batch (0 = whole table)");
    build_cmd->add_option("--window-index", gb_window_index, "which window to export");
    build_cmd->add_option("--key", gb_key, "endpoint keying: addr or addr+port");
    build_cmd->add_option("--weighted", gb_weighted, "use similarity weights in the normalized adjacency");
    build_cmd->add_option("--out", gb_out, "output path")->required();
    build_cmd->add_option("--format", gb_format, "json or bin");
    build_cmd->add_option("--stats", gb_stats, "also write a stats JSON");

    // shared model flags helper
    auto add_model_flags = [](CLI::App* cmd, std::string& config_path, uint64_t& seed, size_t& epochs,
                              double& lr, size_t& window, bool& weighted, bool& zeta, double& threshold,
                              double& val_fraction, std::string& key) {
        cmd->add_option("--config", config_path, "model config JSON");
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--window", window, "flows per window graph");
        cmd->add_option("--weighted", weighted, "weighted normalized adjacency");
        cmd->add_option("--zeta", zeta, "add similarity weights to attention scores");
        cmd->add_option("--threshold", threshold, "alert threshold");
        cmd->add_option("--val-fraction", val_fraction, "validation window fraction");
        cmd->add_option("--key", key, "endpoint keying: addr or addr+port");
    };

    // train
    auto* train_cmd = app.add_subcommand("train", "train on a flow table");
    std::string tr_data, tr_config, tr_out = "model.ckpt", tr_curve, tr_key = "addr";
    uint64_t tr_seed = 1;
    size_t tr_epochs = 100, tr_window = 1024;
    double tr_lr = 1e-4, tr_threshold = 0.0, tr_valfrac = 0.2;
    bool tr_weighted = true, tr_zeta = true;
    train_cmd->add_option("--data", tr_data, "input table")->required();
    train_cmd->add_option("--out", tr_out, "checkpoint output")->required();
    train_cmd->add_option("--curve", tr_curve, "loss-curve CSV output");
    add_model_flags(train_cmd, tr_config, tr_seed, tr_epochs, tr_lr, tr_window, tr_weighted, tr_zeta,
                    tr_threshold, tr_valfrac, tr_key);

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "score flows with a trained checkpoint");
    std::string cl_ckpt, cl_data, cl_report = "alerts.jsonl", cl_summary;
    double cl_threshold = 0.0;
    classify_cmd->add_option("--ckpt", cl_ckpt, "checkpoint")->required();
    classify_cmd->add_option("--data", cl_data, "input table")->required();
    classify_cmd->add_option("--threshold", cl_threshold, "alert threshold");
    classify_cmd->add_option("--report", cl_report, "JSONL alert report")->required();
    classify_cmd->add_option("--summary", cl_summary, "summary JSON output");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "split, train, and score the held-out side");
    std::string ev_data, ev_config, ev_split = "ip", ev_out = "report.json", ev_roc, ev_plan, ev_sweep,
                ev_ckpt_out, ev_key = "addr";
    double ev_fraction = 0.7, ev_lr = 1e-4, ev_threshold = 0.0, ev_valfrac = 0.2;
    uint64_t ev_seed = 1;
    size_t ev_epochs = 100, ev_window = 1024, ev_max_flows = 0;
    bool ev_weighted = true, ev_zeta = true, ev_allow_overlap = false, ev_reference = false;
    eval_cmd->add_option("--data", ev_data, "input table")->required();
    eval_cmd->add_option("--split", ev_split, "ip or random");
    eval_cmd->add_option("--fraction", ev_fraction, "train-side fraction");
    eval_cmd->add_flag("--allow-type-overlap", ev_allow_overlap,
                       "endpoint-only fallback when type disjointness is impossible");
    eval_cmd->add_option("--max-flows", ev_max_flows, "subsample the table to this many flows (0 = all)");
    eval_cmd->add_option("--out", ev_out, "report JSON output")->required();
    eval_cmd->add_option("--roc", ev_roc, "ROC points CSV output");
    eval_cmd->add_option("--split-plan", ev_plan, "split plan JSON output");
    eval_cmd->add_option("--sweep", ev_sweep, "threshold sweep grid lo:hi:steps");
    eval_cmd->add_flag("--reference-compare", ev_reference,
                       "attach published full-dataset reference metrics (indicative only)");
    eval_cmd->add_option("--ckpt-out", ev_ckpt_out, "also save the trained checkpoint");
    add_model_flags(eval_cmd, ev_config, ev_seed, ev_epochs, ev_lr, ev_window, ev_weighted, ev_zeta,
                    ev_threshold, ev_valfrac, ev_key);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "threshold sensitivity sweep for a checkpoint");
    std::string sw_ckpt, sw_data, sw_grid = "-2:8:21", sw_out = "sweep.json";
    sweep_cmd->add_option("--ckpt", sw_ckpt, "checkpoint")->required();
    sweep_cmd->add_option("--data", sw_data, "labeled table")->required();
    sweep_cmd->add_option("--grid", sw_grid, "grid lo:hi:steps");
    sweep_cmd->add_option("--out", sw_out, "sweep JSON output")->required();

    // compare-splits
    auto* cmp_cmd = app.add_subcommand("compare-splits",
                                       "train/evaluate under random and endpoint-disjoint splits");
    std::string cs_data, cs_config, cs_out = "compare.json", cs_key = "addr";
    double cs_fraction = 0.7, cs_lr = 1e-4, cs_threshold = 0.0, cs_valfrac = 0.2;
    uint64_t cs_seed = 1;
    size_t cs_epochs = 100, cs_window = 1024;
    bool cs_weighted = true, cs_zeta = true, cs_allow_overlap = false;
    cmp_cmd->add_option("--data", cs_data, "input table")->required();
    cmp_cmd->add_option("--fraction", cs_fraction, "train-side fraction");
    cmp_cmd->add_flag("--allow-type-overlap", cs_allow_overlap, "endpoint-only fallback");
    cmp_cmd->add_option("--out", cs_out, "report JSON output")->required();
    add_model_flags(cmp_cmd, cs_config, cs_seed, cs_epochs, cs_lr, cs_window, cs_weighted, cs_zeta,
                    cs_threshold, cs_valfrac, cs_key);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "time the graph representations");
    std::string be_data, be_key = "addr", be_out = "bench.json";
    size_t be_window = 0;
    bool be_weighted = true;
    bench_cmd->add_option("--data", be_data, "input table")->required();
    bench_cmd->add_option("--window", be_window, "limit to the first N flows (0 = all)");
    bench_cmd->add_option("--key", be_key, "endpoint keying");
    bench_cmd->add_option("--weighted", be_weighted, "weighted normalized adjacency");
    bench_cmd->add_option("--out", be_out, "report JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    set_threads(threads);

    std::string stage = "startup";
    try {
        if (synth_cmd->parsed()) {
            stage = "synth";
            return cmd_synth(sy_preset, sy_script, sy_seed, sy_out, sy_campaigns, sy_fps, sy_benign, sy_bep,
                             sy_feat, sy_sep, sy_jitter, sy_noise, sy_attackers, sy_fpa, sy_emit);
        }
        if (ingest_cmd->parsed()) {
            stage = "ingest";
            return cmd_ingest(in_data, in_schema, in_ratio, in_seed, in_out);
        }
        if (graph_cmd->parsed()) {
            stage = "graph";
            if (!build_cmd->parsed()) throw std::runtime_error("graph: expected the 'build' subcommand");
            return cmd_graph_build(gb_data, gb_mode, gb_window, gb_window_index, gb_key, gb_weighted, gb_out,
                                   gb_format, gb_stats);
        }
        if (train_cmd->parsed()) {
            stage = "train";
            model_config cfg = config_from_flags(tr_config, train_cmd, tr_seed, tr_epochs, tr_lr, tr_window,
                                                 tr_weighted, tr_zeta, tr_threshold, tr_valfrac, tr_key);
            return cmd_train(tr_data, cfg, tr_out, tr_curve, tr_config);
        }
        if (classify_cmd->parsed()) {
            stage = "classify";
            return cmd_classify(cl_ckpt, cl_data, cl_threshold, cl_report, cl_summary);
        }
        if (eval_cmd->parsed()) {
            stage = "evaluate";
            model_config cfg = config_from_flags(ev_config, eval_cmd, ev_seed, ev_epochs, ev_lr, ev_window,
                                                 ev_weighted, ev_zeta, ev_threshold, ev_valfrac, ev_key);
            return cmd_evaluate(ev_data, ev_config, cfg, ev_split, ev_fraction, ev_allow_overlap,
                                ev_max_flows, ev_out, ev_roc, ev_plan, ev_sweep, ev_reference, ev_ckpt_out);
        }
        if (sweep_cmd->parsed()) {
            stage = "sweep";
            return cmd_sweep(sw_ckpt, sw_data, sw_grid, sw_out);
        }
        if (cmp_cmd->parsed()) {
            stage = "compare-splits";
            model_config cfg = config_from_flags(cs_config, cmp_cmd, cs_seed, cs_epochs, cs_lr, cs_window,
                                                 cs_weighted, cs_zeta, cs_threshold, cs_valfrac, cs_key);
            return cmd_compare_splits(cs_data, cs_config, cfg, cs_fraction, cs_allow_overlap, cs_out);
        }
        if (bench_cmd->parsed()) {
            stage = "bench";
            return cmd_bench(be_data, be_window, be_key, be_weighted, be_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error (" << stage << "): " << e.what() << "\n";
        return 1;
    }
    return 2;
}
