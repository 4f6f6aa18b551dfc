#include "flowgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flowgnn/rng.hpp"

namespace flowgnn {

using nlohmann::json;

void scenario_script::validate() const {
    if (n_features == 0) throw std::invalid_argument("script: n_features must be positive");
    if (steps.empty() && benign.flows == 0) throw std::invalid_argument("script: empty script");
    double prev = -1e300;
    for (const auto& s : steps) {
        if (s.time < prev) throw std::invalid_argument("script: step times must be non-decreasing");
        prev = s.time;
        if (s.victims.empty()) throw std::invalid_argument("script: step without victims");
        if (s.flows == 0) throw std::invalid_argument("script: step with zero flows");
        if (s.mean.size() != n_features) throw std::invalid_argument("script: step mean length != n_features");
        if (s.label == flow_label::unknown) throw std::invalid_argument("script: step label must be set");
    }
}

scenario_script scenario_script::from_json(const json& j) {
    scenario_script s;
    s.n_features = j.at("n_features").get<size_t>();
    if (j.contains("noise")) s.noise = j.at("noise").get<double>();
    if (j.contains("benign")) {
        const auto& b = j.at("benign");
        s.benign.flows = b.value("flows", size_t{0});
        s.benign.endpoints = b.value("endpoints", size_t{8});
        s.benign.jitter = b.value("jitter", 0.0);
        s.benign.port = b.value("port", uint16_t{443});
    }
    for (const auto& js : j.value("steps", json::array())) {
        scenario_step st;
        st.time = js.at("time").get<double>();
        st.actor = js.at("actor").get<std::string>();
        st.victims = js.at("victims").get<std::vector<std::string>>();
        st.flows = js.at("flows").get<size_t>();
        st.mean = js.at("mean").get<std::vector<double>>();
        st.noise = js.value("noise", -1.0);
        st.label = js.value("label", std::string("malicious")) == "malicious" ? flow_label::malicious
                                                                              : flow_label::normal;
        st.attack_type = js.value("attack_type", std::string());
        st.campaign = js.value("campaign", 0);
        st.spoof_of = js.value("spoof_of", std::string());
        st.port = js.value("port", uint16_t{445});
        s.steps.push_back(std::move(st));
    }
    s.validate();
    return s;
}

json scenario_script::to_json() const {
    json j;
    j["n_features"] = n_features;
    j["noise"] = noise;
    j["benign"] = {{"flows", benign.flows},
                   {"endpoints", benign.endpoints},
                   {"jitter", benign.jitter},
                   {"port", benign.port}};
    json steps_j = json::array();
    for (const auto& s : steps) {
        json js{{"time", s.time},         {"actor", s.actor},
                {"victims", s.victims},   {"flows", s.flows},
                {"mean", s.mean},         {"noise", s.noise},
                {"label", s.label == flow_label::malicious ? "malicious" : "benign"},
                {"attack_type", s.attack_type},
                {"campaign", s.campaign}, {"port", s.port}};
        if (!s.spoof_of.empty()) js["spoof_of"] = s.spoof_of;
        steps_j.push_back(std::move(js));
    }
    j["steps"] = std::move(steps_j);
    return j;
}

scenario_script scenario_script::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open script file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

namespace {

std::vector<double> unit_direction(rng& gen, size_t n) {
    std::vector<double> d(n);
    double norm = 0.0;
    for (auto& v : d) {
        v = gen.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        d.assign(n, 0.0);
        d[0] = 1.0;
        return d;
    }
    for (auto& v : d) v /= norm;
    return d;
}

}  // namespace

std::pair<std::vector<flow_record>, std::vector<ground_truth_row>> generate(const scenario_script& script,
                                                                            uint64_t seed) {
    script.validate();
    rng gen(seed, "synth");

    std::vector<flow_record> records;
    std::vector<ground_truth_row> truth;

    auto push_flow = [&](const std::string& src, const std::string& dst, uint16_t dst_port, double ts,
                         const std::vector<double>& mean, double noise, flow_label label,
                         const std::string& type, int campaign, const char* proto) {
        flow_record r;
        r.src_addr = src;
        r.dst_addr = dst;
        r.src_port = static_cast<uint16_t>(1024 + gen.below(64512));
        r.dst_port = dst_port;
        r.timestamp = ts;
        r.features.resize(script.n_features);
        for (size_t k = 0; k < script.n_features; ++k) r.features[k] = mean[k] + noise * gen.normal();
        r.categorical = {proto};
        r.label = label;
        r.attack_type = label == flow_label::malicious ? type : std::string();
        records.push_back(std::move(r));
        truth.push_back({label, label == flow_label::malicious ? type : std::string(), campaign});
    };

    double t_min = 0.0, t_max = 1.0;
    if (!script.steps.empty()) {
        t_min = script.steps.front().time;
        t_max = script.steps.back().time + 1.0;
    }

    for (const auto& step : script.steps) {
        const double noise = step.noise >= 0.0 ? step.noise : script.noise;
        for (size_t k = 0; k < step.flows; ++k) {
            const std::string& victim = step.victims[k % step.victims.size()];
            push_flow(step.actor, victim, step.port, step.time + 1e-3 * static_cast<double>(k), step.mean,
                      noise, step.label, step.attack_type, step.campaign, "tcp");
        }
    }

    if (script.benign.flows > 0) {
        if (script.benign.endpoints < 2) throw std::invalid_argument("script: benign pool needs >= 2 endpoints");
        std::vector<std::string> pool;
        for (size_t i = 0; i < script.benign.endpoints; ++i) pool.push_back("10.1.0." + std::to_string(i + 1));
        for (const auto& s : script.steps) {
            for (const auto& name : pool) {
                if (s.actor == name || std::find(s.victims.begin(), s.victims.end(), name) != s.victims.end())
                    throw std::invalid_argument("script: background endpoint '" + name + "' collides with a step");
            }
        }
        std::vector<std::vector<double>> centroid(pool.size());
        for (auto& c : centroid) {
            c = unit_direction(gen, script.n_features);
            for (auto& v : c) v *= script.benign.jitter;
        }
        for (size_t k = 0; k < script.benign.flows; ++k) {
            size_t a = gen.below(pool.size());
            size_t b = gen.below(pool.size() - 1);
            if (b >= a) ++b;
            double ts = gen.uniform(t_min, t_max);
            const char* proto = gen.below(4) == 0 ? "udp" : "tcp";
            push_flow(pool[a], pool[b], script.benign.port, ts, centroid[a], script.noise, flow_label::normal,
                      "", -1, proto);
        }
    }

    // sort by timestamp, stable on emission order
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return records[a].timestamp < records[b].timestamp; });
    std::vector<flow_record> rec_sorted;
    std::vector<ground_truth_row> truth_sorted;
    rec_sorted.reserve(records.size());
    truth_sorted.reserve(truth.size());
    for (size_t i : order) {
        rec_sorted.push_back(std::move(records[i]));
        truth_sorted.push_back(std::move(truth[i]));
    }
    return {std::move(rec_sorted), std::move(truth_sorted)};
}

scenario_script multi_step_script(size_t n_features, double separation, double noise) {
    scenario_script s;
    s.n_features = n_features;
    s.noise = noise;

    const std::string attacker = "10.9.0.1";
    const std::string spoofed = "172.16.5.5";
    const std::vector<std::string> victims = {"10.0.0.101", "10.0.0.102", "10.0.0.103", "10.0.0.104"};

    auto step_mean = [&](size_t step_idx) {
        std::vector<double> m(n_features, separation / std::sqrt(static_cast<double>(n_features)));
        m[(step_idx + 1) % n_features] += 0.4 * separation;
        return m;
    };

    scenario_step recon;
    recon.time = 1.0;
    recon.actor = attacker;
    recon.victims = victims;
    recon.flows = 4;
    recon.mean = step_mean(0);
    recon.attack_type = "recon";
    recon.campaign = 0;
    recon.port = 445;

    scenario_step inject;
    inject.time = 2.0;
    inject.actor = attacker;
    inject.victims = {victims[0]};
    inject.flows = 3;
    inject.mean = step_mean(1);
    inject.attack_type = "sql-injection";
    inject.campaign = 0;
    inject.port = 1433;

    scenario_step crack;
    crack.time = 3.0;
    crack.actor = attacker;
    crack.victims = {victims[3]};
    crack.flows = 5;
    crack.mean = step_mean(2);
    crack.attack_type = "password-cracking";
    crack.campaign = 0;
    crack.port = 22;

    scenario_step retry = crack;
    retry.time = 4.0;
    retry.actor = spoofed;
    retry.spoof_of = attacker;
    retry.mean = step_mean(3);

    s.steps = {recon, inject, crack, retry};
    return s;
}

scenario_script campaigns_script(size_t campaigns, size_t flows_per_step, size_t benign_flows,
                                 size_t benign_endpoints, size_t n_features, double separation,
                                 double campaign_jitter, double noise, uint64_t seed) {
    if (campaigns == 0) throw std::invalid_argument("campaigns_script: need at least one campaign");
    rng gen(seed, "campaign-templates");
    scenario_script s;
    s.n_features = n_features;
    s.noise = noise;
    s.benign.flows = benign_flows;
    s.benign.endpoints = benign_endpoints;
    s.benign.jitter = 0.3 * separation;

    auto global_dir = unit_direction(gen, n_features);
    const char* types[3] = {"recon", "sql-injection", "password-cracking"};
    const uint16_t ports[3] = {445, 1433, 22};

    for (size_t c = 0; c < campaigns; ++c) {
        const std::string attacker = "10.9." + std::to_string(c) + ".1";
        const std::string spoofed = "172.16." + std::to_string(c) + ".5";
        std::vector<std::string> victims;
        for (int v = 0; v < 4; ++v)
            victims.push_back("10.0." + std::to_string(c) + "." + std::to_string(101 + v));
        auto campaign_dir = unit_direction(gen, n_features);

        auto mean_for = [&](size_t step_idx) {
            auto step_dir = unit_direction(gen, n_features);
            std::vector<double> m(n_features);
            for (size_t k = 0; k < n_features; ++k) {
                m[k] = separation * global_dir[k] + campaign_jitter * campaign_dir[k] +
                       0.15 * separation * step_dir[k];
            }
            (void)step_idx;
            return m;
        };

        const double base = 10.0 * static_cast<double>(c);
        const size_t f = flows_per_step;
        const size_t counts[4] = {f, std::max<size_t>(1, 3 * f / 4), 5 * f / 4, 5 * f / 4};
        for (int stp = 0; stp < 4; ++stp) {
            scenario_step st;
            st.time = base + 1.0 + static_cast<double>(stp);
            st.actor = stp == 3 ? spoofed : attacker;
            if (stp == 3) st.spoof_of = attacker;
            st.victims = stp == 0 ? victims
                         : stp == 1 ? std::vector<std::string>{victims[0]}
                                    : std::vector<std::string>{victims[3]};
            st.flows = counts[stp];
            st.mean = mean_for(static_cast<size_t>(stp));
            st.attack_type = types[stp == 3 ? 2 : stp];
            st.campaign = static_cast<int>(c);
            st.port = ports[stp == 3 ? 2 : stp];
            s.steps.push_back(std::move(st));
        }
    }
    return s;
}

scenario_script leakage_script(size_t attackers, size_t flows_per_attacker, size_t benign_endpoints,
                               size_t flows_per_benign, size_t n_features, double separation, uint64_t seed) {
    if (attackers < 2) throw std::invalid_argument("leakage_script: need at least two attackers");
    rng gen(seed, "leakage-templates");
    scenario_script s;
    s.n_features = n_features;
    // near-duplicate flows per endpoint: tiny within-endpoint noise, endpoint
    // centroids as far out as the attack templates
    s.noise = 0.02 * separation;
    s.benign.flows = benign_endpoints * flows_per_benign;
    s.benign.endpoints = benign_endpoints;
    s.benign.jitter = separation;

    for (size_t a = 0; a < attackers; ++a) {
        scenario_step st;
        st.time = 5.0 * static_cast<double>(a);
        st.actor = "10.66." + std::to_string(a) + ".1";
        st.victims = {"10.3.0." + std::to_string(1 + (a % 4)), "10.3.0." + std::to_string(5 + (a % 3))};
        st.flows = flows_per_attacker;
        auto dir = unit_direction(gen, n_features);
        st.mean.resize(n_features);
        for (size_t k = 0; k < n_features; ++k) st.mean[k] = separation * dir[k];
        st.attack_type = "type-" + std::to_string(a);
        st.campaign = static_cast<int>(a);
        st.port = 445;
        s.steps.push_back(std::move(st));
    }
    return s;
}

feature_schema synth_schema(size_t n_features) {
    feature_schema sc;
    sc.src_addr_column = "src_ip";
    sc.src_port_column = "src_port";
    sc.dst_addr_column = "dst_ip";
    sc.dst_port_column = "dst_port";
    sc.timestamp_column = "ts";
    for (size_t k = 0; k < n_features; ++k) sc.numeric_columns.push_back("f" + std::to_string(k));
    sc.categorical_columns = {"proto"};
    sc.vocabularies = {{}};
    sc.label_column = "label";
    sc.normal_values = {"benign"};
    sc.malicious_values = {"malicious"};
    sc.attack_type_column = "attack_type";
    return sc;
}

void write_csv(const std::string& path, const std::vector<flow_record>& records,
               const std::vector<ground_truth_row>& truth, size_t n_features) {
    if (!truth.empty() && truth.size() != records.size())
        throw std::invalid_argument("write_csv: truth rows do not match records");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open csv output: " + path);
    os << "src_ip,src_port,dst_ip,dst_port,ts,proto";
    for (size_t k = 0; k < n_features; ++k) os << ",f" << k;
    os << ",label,attack_type,campaign\n";
    char buf[64];
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.features.size() != n_features) throw std::invalid_argument("write_csv: feature arity mismatch");
        os << r.src_addr << ',' << r.src_port << ',' << r.dst_addr << ',' << r.dst_port << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.timestamp);
        os << buf << ',' << (r.categorical.empty() ? "tcp" : r.categorical[0].c_str());
        for (double v : r.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            os << ',' << buf;
        }
        os << ',' << (r.label == flow_label::malicious ? "malicious" : "benign");
        os << ',' << (r.attack_type.empty() ? "-" : r.attack_type.c_str());
        if (truth.empty()) os << ",-";
        else os << ',' << truth[i].campaign;
        os << '\n';
    }
    if (!os) throw std::runtime_error("failed writing csv: " + path);
}

}  // namespace flowgnn
