#include "flowgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "flowgnn/rng.hpp"

namespace flowgnn {

using nlohmann::json;

std::vector<uint64_t> split_plan::side_indices(split_side s) const {
    std::vector<uint64_t> out;
    for (size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == s) out.push_back(i);
    }
    return out;
}

json split_plan::to_json() const {
    json j;
    j["kind"] = kind;
    j["train_endpoints"] = train_endpoints;
    j["test_endpoints"] = test_endpoints;
    j["train_attack_types"] = train_attack_types;
    j["test_attack_types"] = test_attack_types;
    j["overlapping_types"] = overlapping_types;
    j["dropped"] = dropped;
    j["endpoint_overlap"] = endpoint_overlap;
    size_t train_n = 0, test_n = 0;
    for (auto a : assignment) {
        if (a == split_side::train) ++train_n;
        else if (a == split_side::test) ++test_n;
    }
    j["train_flows"] = train_n;
    j["test_flows"] = test_n;
    return j;
}

attacker_table attacker_flow_counts(const std::vector<flow_record>& records) {
    attacker_table t;
    for (const auto& r : records) {
        if (r.label != flow_label::malicious) continue;
        auto& st = t[r.src_addr];
        ++st.malicious_flows;
        if (!r.attack_type.empty()) st.types.insert(r.attack_type);
    }
    return t;
}

namespace {

struct component {
    std::vector<std::string> attackers;
    std::set<std::string> types;
    size_t malicious = 0;
};

// attackers sharing an attack type cannot be separated without type overlap,
// so they are grouped first
std::vector<component> attacker_components(const attacker_table& attackers) {
    std::vector<std::string> names;
    for (const auto& [addr, _] : attackers) names.push_back(addr);
    std::vector<size_t> parent(names.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::unordered_map<std::string, size_t> first_with_type;
    for (size_t i = 0; i < names.size(); ++i) {
        for (const auto& ty : attackers.at(names[i]).types) {
            auto [it, inserted] = first_with_type.emplace(ty, i);
            if (!inserted) parent[find(i)] = find(it->second);
        }
    }
    std::unordered_map<size_t, size_t> comp_of_root;
    std::vector<component> comps;
    for (size_t i = 0; i < names.size(); ++i) {
        size_t r = find(i);
        auto [it, inserted] = comp_of_root.emplace(r, comps.size());
        if (inserted) comps.emplace_back();
        component& c = comps[it->second];
        c.attackers.push_back(names[i]);
        const auto& st = attackers.at(names[i]);
        c.malicious += st.malicious_flows;
        c.types.insert(st.types.begin(), st.types.end());
    }
    return comps;
}

}  // namespace

split_plan make_ip_split(const std::vector<flow_record>& records, const attacker_table& attackers,
                         uint64_t seed, const ip_split_options& opts) {
    std::set<std::string> all_types;
    for (const auto& [_, st] : attackers) all_types.insert(st.types.begin(), st.types.end());
    if ((attackers.size() < 2 || all_types.size() < 2) && !opts.allow_type_overlap) {
        throw std::runtime_error(
            "make_ip_split: endpoint/type-disjoint split impossible (" + std::to_string(attackers.size()) +
            " attackers, " + std::to_string(all_types.size()) +
            " attack types); rerun with the endpoint-only fallback to split anyway");
    }

    split_plan plan;
    plan.kind = "ip";

    // 1. attacker side assignment, component by component
    auto comps = attacker_components(attackers);
    std::sort(comps.begin(), comps.end(), [](const component& a, const component& b) {
        if (a.malicious != b.malicious) return a.malicious > b.malicious;
        return a.attackers.front() < b.attackers.front();
    });
    size_t total_malicious = 0;
    for (const auto& c : comps) total_malicious += c.malicious;

    std::unordered_map<std::string, split_side> endpoint_side;
    double train_mal = 0.0, test_mal = 0.0;
    const double f = opts.train_fraction;
    auto assign_component_side = [&](const component& c) {
        double t_deficit = f * static_cast<double>(total_malicious) - train_mal;
        double s_deficit = (1.0 - f) * static_cast<double>(total_malicious) - test_mal;
        split_side side = t_deficit >= s_deficit ? split_side::train : split_side::test;
        for (const auto& a : c.attackers) endpoint_side[a] = side;
        (side == split_side::train ? train_mal : test_mal) += static_cast<double>(c.malicious);
        return side;
    };

    if (comps.size() == 1 && comps[0].attackers.size() >= 2) {
        // every attacker shares a type chain; split inside the component and
        // report the residual overlap instead of failing
        auto names = comps[0].attackers;
        std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
            size_t ca = attackers.at(a).malicious_flows, cb = attackers.at(b).malicious_flows;
            if (ca != cb) return ca > cb;
            return a < b;
        });
        for (const auto& a : names) {
            double t_deficit = f * static_cast<double>(total_malicious) - train_mal;
            double s_deficit = (1.0 - f) * static_cast<double>(total_malicious) - test_mal;
            split_side side = t_deficit >= s_deficit ? split_side::train : split_side::test;
            endpoint_side[a] = side;
            (side == split_side::train ? train_mal : test_mal) +=
                static_cast<double>(attackers.at(a).malicious_flows);
        }
    } else {
        for (const auto& c : comps) assign_component_side(c);
        // both sides must receive at least one attacker when possible
        bool has_train = false, has_test = false;
        for (const auto& [_, s] : endpoint_side) {
            has_train |= s == split_side::train;
            has_test |= s == split_side::test;
        }
        if (!comps.empty() && (!has_train || !has_test) && comps.size() >= 2) {
            // move the smallest component to the empty side
            const component* smallest = nullptr;
            for (const auto& c : comps) {
                if (!smallest || c.malicious < smallest->malicious) smallest = &c;
            }
            split_side target = !has_train ? split_side::train : split_side::test;
            for (const auto& a : smallest->attackers) endpoint_side[a] = target;
        }
    }

    // 2. remaining endpoints: seeded assignment balancing flow participation
    std::vector<std::string> others;
    std::unordered_map<std::string, size_t> participation;
    for (const auto& r : records) {
        for (const auto* addr : {&r.src_addr, &r.dst_addr}) {
            auto [it, inserted] = participation.emplace(*addr, 0);
            ++it->second;
            if (inserted && !endpoint_side.count(*addr)) others.push_back(*addr);
        }
    }
    std::sort(others.begin(), others.end());
    rng gen(seed, "ip-split");
    gen.shuffle(others);

    double train_w = 0.0, test_w = 0.0;
    for (const auto& [addr, side] : endpoint_side) {
        auto it = participation.find(addr);
        double w = it == participation.end() ? 0.0 : static_cast<double>(it->second);
        (side == split_side::train ? train_w : test_w) += w;
    }
    for (const auto& addr : others) {
        double w = static_cast<double>(participation[addr]);
        double total = train_w + test_w;
        split_side side = (total == 0.0 || train_w / total < f) ? split_side::train : split_side::test;
        endpoint_side[addr] = side;
        (side == split_side::train ? train_w : test_w) += w;
    }

    for (const auto& [addr, side] : endpoint_side) {
        (side == split_side::train ? plan.train_endpoints : plan.test_endpoints).insert(addr);
    }

    // 3. per-flow assignment: both endpoints on one side or dropped
    plan.assignment.resize(records.size(), split_side::dropped);
    for (size_t i = 0; i < records.size(); ++i) {
        split_side s = endpoint_side.at(records[i].src_addr);
        split_side d = endpoint_side.at(records[i].dst_addr);
        if (s == d) {
            plan.assignment[i] = s;
            if (records[i].label == flow_label::malicious && !records[i].attack_type.empty()) {
                (s == split_side::train ? plan.train_attack_types : plan.test_attack_types)
                    .insert(records[i].attack_type);
            }
        } else {
            ++plan.dropped;
        }
    }
    for (const auto& t : plan.train_attack_types) {
        if (plan.test_attack_types.count(t)) plan.overlapping_types.insert(t);
    }
    return plan;
}

split_plan random_split(const std::vector<flow_record>& records, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) throw std::invalid_argument("random_split: fraction in (0, 1)");
    split_plan plan;
    plan.kind = "random";
    plan.assignment.resize(records.size());
    rng gen(seed, "random-split");
    for (size_t i = 0; i < records.size(); ++i) {
        plan.assignment[i] = gen.uniform() < fraction ? split_side::train : split_side::test;
    }
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto& eps = plan.assignment[i] == split_side::train ? plan.train_endpoints : plan.test_endpoints;
        eps.insert(r.src_addr);
        eps.insert(r.dst_addr);
        if (r.label == flow_label::malicious && !r.attack_type.empty()) {
            (plan.assignment[i] == split_side::train ? plan.train_attack_types : plan.test_attack_types)
                .insert(r.attack_type);
        }
    }
    for (const auto& e : plan.train_endpoints) {
        if (plan.test_endpoints.count(e)) ++plan.endpoint_overlap;
    }
    for (const auto& t : plan.train_attack_types) {
        if (plan.test_attack_types.count(t)) plan.overlapping_types.insert(t);
    }
    return plan;
}

namespace {

struct counts {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

counts count_confusion(const std::vector<scored_flow>& scored, double threshold, bool use_stored_decision) {
    counts c;
    for (const auto& s : scored) {
        if (s.truth == flow_label::unknown)
            throw std::invalid_argument("metrics: every scored flow needs a true label");
        bool alert = use_stored_decision ? s.decision == flow_label::malicious : s.score > threshold;
        bool mal = s.truth == flow_label::malicious;
        if (alert && mal) ++c.tp;
        else if (alert && !mal) ++c.fp;
        else if (!alert && mal) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double precision_of(const counts& c) {
    if (c.tp + c.fp == 0) return (c.tp + c.fn == 0) ? 1.0 : 0.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall_of(const counts& c) {
    if (c.tp + c.fn == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double fpr_of(const counts& c) {
    if (c.fp + c.tn == 0) return 0.0;
    return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

eval_report compute_metrics(const std::vector<scored_flow>& scored) {
    eval_report rep;
    counts c = count_confusion(scored, 0.0, /*use_stored_decision=*/true);
    rep.tp = c.tp;
    rep.fp = c.fp;
    rep.tn = c.tn;
    rep.fn = c.fn;
    rep.precision = precision_of(c);
    rep.recall = recall_of(c);
    rep.f1 = f1_of(rep.precision, rep.recall);
    rep.fpr = fpr_of(c);

    const size_t pos = c.tp + c.fn;
    const size_t neg = c.fp + c.tn;
    if (pos > 0 && neg > 0) {
        // midrank AUC
        std::vector<size_t> order(scored.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return scored[a].score < scored[b].score; });
        double rank_sum_pos = 0.0;
        size_t i = 0;
        while (i < order.size()) {
            size_t j = i;
            while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
            double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
            for (size_t k = i; k < j; ++k) {
                if (scored[order[k]].truth == flow_label::malicious) rank_sum_pos += midrank;
            }
            i = j;
        }
        double p = static_cast<double>(pos), n = static_cast<double>(neg);
        rep.auc = (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);

        // ROC step curve: thresholds descending through the distinct scores
        std::vector<size_t> desc(order.rbegin(), order.rend());
        rep.roc.push_back({0.0, 0.0});
        size_t tp = 0, fp = 0;
        size_t k = 0;
        while (k < desc.size()) {
            size_t j = k;
            while (j < desc.size() && scored[desc[j]].score == scored[desc[k]].score) {
                if (scored[desc[j]].truth == flow_label::malicious) ++tp;
                else ++fp;
                ++j;
            }
            rep.roc.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p});
            k = j;
        }
    }
    return rep;
}

std::vector<sweep_row> threshold_sweep(const std::vector<scored_flow>& scored, const std::vector<double>& grid) {
    for (size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1]) throw std::invalid_argument("threshold_sweep: grid must ascend");
    }
    std::vector<sweep_row> rows;
    rows.reserve(grid.size());
    for (double s : grid) {
        counts c = count_confusion(scored, s, /*use_stored_decision=*/false);
        sweep_row r;
        r.threshold = s;
        r.alerts = c.tp + c.fp;
        r.precision = precision_of(c);
        r.recall = recall_of(c);
        r.fpr = fpr_of(c);
        r.f1 = f1_of(r.precision, r.recall);
        rows.push_back(r);
    }
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].recall > rows[i - 1].recall + 1e-15 || rows[i].fpr > rows[i - 1].fpr + 1e-15)
            throw std::logic_error("threshold_sweep: monotonicity violated");
    }
    return rows;
}

json eval_report::to_json() const {
    json j;
    j["counts"] = {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}};
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["fpr"] = fpr;
    if (auc) j["auc"] = *auc;
    else j["auc"] = nullptr;
    json roc_j = json::array();
    for (const auto& p : roc) roc_j.push_back({p.fpr, p.tpr});
    j["roc"] = std::move(roc_j);
    json sweep_j = json::array();
    for (const auto& r : sweep) {
        sweep_j.push_back({{"threshold", r.threshold},
                           {"alerts", r.alerts},
                           {"precision", r.precision},
                           {"recall", r.recall},
                           {"fpr", r.fpr},
                           {"f1", r.f1}});
    }
    j["sweep"] = std::move(sweep_j);
    return j;
}

std::string eval_report::table() const {
    std::ostringstream os;
    os << "          tp       fp       tn       fn\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "counts %7zu  %7zu  %7zu  %7zu\n", tp, fp, tn, fn);
    os << buf;
    std::snprintf(buf, sizeof(buf), "precision %.4f  recall %.4f  f1 %.4f  fpr %.4f", precision, recall, f1, fpr);
    os << buf;
    if (auc) {
        std::snprintf(buf, sizeof(buf), "  auc %.4f", *auc);
        os << buf;
    }
    os << "\n";
    return os.str();
}

void write_roc_csv(const std::string& path, const std::vector<roc_point>& roc) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open roc output: " + path);
    os << "fpr,tpr\n";
    for (const auto& p : roc) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.fpr, p.tpr);
        os << buf;
    }
}

}  // namespace flowgnn
