#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "flowgnn/csv.hpp"
#include "flowgnn/ingest.hpp"
#include "flowgnn/rng.hpp"

using namespace flowgnn;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / ("flowgnn_ingest_" + name);
    std::ofstream os(p);
    os << content;
    return p;
}

feature_schema small_schema(std::vector<std::string> numeric, std::vector<std::string> categorical = {}) {
    feature_schema s;
    s.src_addr_column = "src_ip";
    s.src_port_column = "src_port";
    s.dst_addr_column = "dst_ip";
    s.dst_port_column = "dst_port";
    s.timestamp_column = "ts";
    s.numeric_columns = std::move(numeric);
    s.categorical_columns = std::move(categorical);
    s.vocabularies.assign(s.categorical_columns.size(), {});
    s.label_column = "label";
    s.normal_values = {"benign"};
    s.malicious_values = {"malicious"};
    s.attack_type_column = "";
    return s;
}

std::vector<flow_record> labeled_records(size_t normal, size_t malicious) {
    std::vector<flow_record> recs;
    for (size_t i = 0; i < normal + malicious; ++i) {
        flow_record r;
        r.src_addr = "s" + std::to_string(i);
        r.dst_addr = "d";
        r.features = {static_cast<double>(i)};
        r.categorical = {};
        r.label = i < normal ? flow_label::normal : flow_label::malicious;
        recs.push_back(r);
    }
    return recs;
}

}  // namespace

TEST_CASE("csv splitter handles quotes and trims") {
    auto f = csv::split_line("a, b ,\"c,d\",\"e\"\"f\"");
    REQUIRE(f.size() == 4);
    CHECK(f[0] == "a");
    CHECK(f[1] == "b");
    CHECK(f[2] == "c,d");
    CHECK(f[3] == "e\"f");
}

TEST_CASE("parse: three rows with two numeric features") {
    auto p = write_temp("basic.csv",
                        "src_ip,src_port,dst_ip,dst_port,ts,a,b,label\n"
                        "1.1.1.1,10,2.2.2.2,20,1.0,0.5,1.5,benign\n"
                        "1.1.1.1,11,2.2.2.2,20,2.0,0.25,2.5,malicious\n"
                        "3.3.3.3,12,2.2.2.2,20,3.0,0.125,3.5,benign\n");
    dataset ds = parse_dataset(p.string(), small_schema({"a", "b"}));
    REQUIRE(ds.records.size() == 3);
    CHECK(ds.report.rows_rejected == 0);
    CHECK(ds.records[0].features == std::vector<double>{0.5, 1.5});
    CHECK(ds.records[1].label == flow_label::malicious);
    CHECK(ds.records[2].src_addr == "3.3.3.3");
    // row order preserved
    CHECK(ds.records[0].timestamp < ds.records[1].timestamp);
}

TEST_CASE("parse: out-of-range port rejects the row with its line number") {
    auto p = write_temp("port.csv",
                        "src_ip,src_port,dst_ip,dst_port,ts,a,label\n"
                        "1.1.1.1,70000,2.2.2.2,20,1.0,0.5,benign\n"
                        "1.1.1.1,10,2.2.2.2,20,2.0,0.5,benign\n");
    dataset ds = parse_dataset(p.string(), small_schema({"a"}));
    CHECK(ds.records.size() == 1);
    CHECK(ds.report.rows_rejected == 1);
    REQUIRE(ds.report.errors.size() == 1);
    CHECK(ds.report.errors[0].first == 2);
}

TEST_CASE("parse: missing schema column is a hard error naming the column") {
    auto p = write_temp("missing.csv", "src_ip,src_port,dst_ip,dst_port,ts,label\n");
    CHECK_THROWS_WITH_AS(parse_dataset(p.string(), small_schema({"nosuch"})),
                         doctest::Contains("nosuch"), std::runtime_error);
}

TEST_CASE("parse: non-numeric value skips and counts the row") {
    auto p = write_temp("nonnum.csv",
                        "src_ip,src_port,dst_ip,dst_port,ts,a,label\n"
                        "1.1.1.1,10,2.2.2.2,20,1.0,oops,benign\n"
                        "1.1.1.1,10,2.2.2.2,20,2.0,1.25,benign\n");
    dataset ds = parse_dataset(p.string(), small_schema({"a"}));
    CHECK(ds.records.size() == 1);
    CHECK(ds.report.rows_rejected == 1);
    CHECK(ds.report.errors[0].second.find("'a'") != std::string::npos);
}

TEST_CASE("parse: vocabulary sizes equal the distinct tokens per column") {
    // ToN-IoT-shaped slice: 4 numeric + 2 categorical columns, 10 rows
    const std::string csv_text =
        "src_ip,src_port,dst_ip,dst_port,ts,proto,service,duration,src_bytes,dst_bytes,missed_bytes,label,type\n"
        "192.168.1.30,1024,192.168.1.1,53,1.0,udp,dns,0.005,73,142,0,benign,-\n"
        "192.168.1.31,1025,192.168.1.1,53,2.0,udp,dns,0.004,70,130,0,benign,-\n"
        "192.168.1.30,1026,192.168.1.9,80,3.0,tcp,http,1.25,512,2048,0,malicious,scanning\n"
        "192.168.1.30,1027,192.168.1.9,80,4.0,tcp,http,1.5,511,2040,0,malicious,scanning\n"
        "192.168.1.32,1028,192.168.1.9,443,5.0,tcp,ssl,3.5,900,4096,12,benign,-\n"
        "192.168.1.33,1029,192.168.1.9,443,6.0,tcp,ssl,3.25,899,4000,0,benign,-\n"
        "192.168.1.30,1030,192.168.1.7,22,7.0,tcp,ssh,0.75,300,299,0,malicious,password\n"
        "192.168.1.34,1031,192.168.1.7,22,8.0,tcp,ssh,0.85,311,305,0,benign,-\n"
        "192.168.1.35,1032,192.168.1.1,123,9.0,udp,ntp,0.002,48,48,0,benign,-\n"
        "192.168.1.30,1033,192.168.1.7,22,10.0,tcp,ssh,0.65,290,280,0,malicious,password\n";
    auto p = write_temp("ton_slice.csv", csv_text);

    feature_schema schema = small_schema({"duration", "src_bytes", "dst_bytes", "missed_bytes"},
                                         {"proto", "service"});
    schema.attack_type_column = "type";
    dataset ds = parse_dataset(p.string(), schema);
    REQUIRE(ds.records.size() == 10);

    // independent oracle: count distinct tokens per column straight off the text
    std::istringstream is(csv_text);
    std::string line;
    std::getline(is, line);
    auto header = csv::split_line(line);
    size_t proto_i = 0, service_i = 0;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "proto") proto_i = i;
        if (header[i] == "service") service_i = i;
    }
    std::set<std::string> protos, services;
    while (std::getline(is, line)) {
        auto f = csv::split_line(line);
        protos.insert(f[proto_i]);
        services.insert(f[service_i]);
    }
    CHECK(ds.schema.vocabularies[0].size() == protos.size());
    CHECK(ds.schema.vocabularies[1].size() == services.size());
    CHECK(ds.records[2].attack_type == "scanning");
    CHECK(ds.records[0].attack_type.empty());
}

TEST_CASE("scaler: two-point symmetry") {
    std::vector<flow_record> recs(2);
    recs[0].features = {0.0};
    recs[1].features = {2.0};
    scaler s = fit_scaler(recs);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.stddev[0] == 1.0);
}

TEST_CASE("scaler: constant column passes through centered at zero") {
    std::vector<flow_record> recs(3);
    for (auto& r : recs) r.features = {5.0};
    scaler s = fit_scaler(recs);
    CHECK(s.mean[0] == 5.0);
    CHECK(s.stddev[0] == 1.0);
    feature_schema schema = small_schema({"a"});
    tensor2 t = transform(recs, s, schema);
    for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("scaler: population convention on 1..4") {
    std::vector<flow_record> recs(4);
    for (size_t i = 0; i < 4; ++i) recs[i].features = {static_cast<double>(i + 1)};
    scaler s = fit_scaler(recs);
    CHECK(s.mean[0] == doctest::Approx(2.5).epsilon(1e-15));
    // population std of {1,2,3,4} = sqrt(1.25)
    CHECK(s.stddev[0] == doctest::Approx(1.1180339887498949).epsilon(1e-15));
}

TEST_CASE("scaler: fewer than two records is a precondition error") {
    CHECK_THROWS_AS(fit_scaler({}), std::invalid_argument);
    CHECK_THROWS_AS(fit_scaler(std::vector<flow_record>(1)), std::invalid_argument);
}

TEST_CASE("transform: width arithmetic and unknown routing") {
    feature_schema schema = small_schema({"a"}, {"cat"});
    schema.vocabularies = {{"a", "b"}};
    CHECK(schema.feature_dim() == 1 + 3);

    std::vector<flow_record> recs(3);
    recs[0].features = {1.0};
    recs[0].categorical = {"a"};
    recs[1].features = {2.0};
    recs[1].categorical = {"b"};
    recs[2].features = {3.0};
    recs[2].categorical = {"c"};  // unseen
    scaler s = fit_scaler(recs);
    tensor2 t = transform(recs, s, schema);
    REQUIRE(t.cols == 4);
    CHECK(t.at(0, 1) == 1.0);
    CHECK(t.at(1, 2) == 1.0);
    CHECK(t.at(2, 3) == 1.0);  // unknown slot
    CHECK(t.at(2, 1) == 0.0);
    CHECK(t.at(2, 2) == 0.0);
}

TEST_CASE("transform: one-hot block sums to the categorical column count") {
    rng gen(33);
    feature_schema schema = small_schema({"a", "b"}, {"c1", "c2"});
    std::vector<flow_record> recs(100);
    for (auto& r : recs) {
        r.features = {gen.normal(), gen.normal()};
        r.categorical = {"t" + std::to_string(gen.below(5)), "u" + std::to_string(gen.below(3))};
    }
    fit_vocabularies(recs, schema);
    scaler s = fit_scaler(recs);
    tensor2 t = transform(recs, s, schema);
    for (size_t i = 0; i < t.rows; ++i) {
        double block = 0.0;
        for (size_t j = 2; j < t.cols; ++j) block += t.at(i, j);
        CHECK(block == 2.0);
    }
}

TEST_CASE("train statistics only: scaler is identical across calls") {
    rng gen(44);
    std::vector<flow_record> train(50), test(20);
    for (auto& r : train) r.features = {gen.normal(), 3.0 * gen.normal()};
    for (auto& r : test) r.features = {10.0 + gen.normal(), gen.normal()};
    feature_schema schema = small_schema({"a", "b"});

    scaler s1 = fit_scaler(train);
    transform(test, s1, schema);  // transforming test must not touch the stats
    scaler s2 = fit_scaler(train);
    CHECK(s1 == s2);

    // and the training columns standardize to mean 0, std 1
    tensor2 t = transform(train, s1, schema);
    for (size_t j = 0; j < 2; ++j) {
        double m = 0.0;
        for (size_t i = 0; i < t.rows; ++i) m += t.at(i, j);
        m /= static_cast<double>(t.rows);
        CHECK(std::abs(m) < 1e-12);
    }
}

TEST_CASE("undersample: no-op branch when the ratio is already met") {
    auto recs = labeled_records(100, 50);
    auto out = undersample(recs, 4.0, 7);
    CHECK(out.size() == recs.size());
}

TEST_CASE("undersample: ratio arithmetic keeps 4x malicious normals") {
    auto recs = labeled_records(1000, 100);
    auto out = undersample(recs, 4.0, 7);
    size_t normal = 0, malicious = 0;
    for (const auto& r : out) (r.label == flow_label::normal ? normal : malicious)++;
    CHECK(normal == 400);
    CHECK(malicious == 100);
}

TEST_CASE("undersample: deterministic, order preserving, malicious kept") {
    auto recs = labeled_records(500, 80);
    auto a = undersample(recs, 2.0, 11);
    auto b = undersample(recs, 2.0, 11);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].src_addr == b[i].src_addr);

    // kept records appear in original relative order
    size_t pos = 0;
    for (const auto& r : a) {
        while (pos < recs.size() && recs[pos].src_addr != r.src_addr) ++pos;
        CHECK(pos < recs.size());
    }

    size_t malicious = 0;
    for (const auto& r : a)
        if (r.label == flow_label::malicious) ++malicious;
    CHECK(malicious == 80);

    auto c = undersample(recs, 2.0, 12);
    bool differs = c.size() != a.size();
    for (size_t i = 0; !differs && i < a.size(); ++i) differs = a[i].src_addr != c[i].src_addr;
    CHECK(differs);
}

TEST_CASE("undersample: error paths") {
    CHECK_THROWS_AS(undersample(labeled_records(10, 0), 4.0, 1), std::runtime_error);
    CHECK_THROWS_AS(undersample(labeled_records(10, 5), 0.5, 1), std::invalid_argument);
    std::vector<flow_record> unlabeled(3);
    for (auto& r : unlabeled) r.features = {0.0};
    CHECK_THROWS_AS(undersample(unlabeled, 4.0, 1), std::invalid_argument);
}

TEST_CASE("binary table round trip") {
    rng gen(55);
    feature_schema schema = small_schema({"a", "b"}, {"proto"});
    std::vector<flow_record> recs(40);
    for (size_t i = 0; i < recs.size(); ++i) {
        auto& r = recs[i];
        r.src_addr = "10.0.0." + std::to_string(gen.below(6));
        r.dst_addr = "10.0.1." + std::to_string(gen.below(6));
        r.src_port = static_cast<uint16_t>(1024 + gen.below(1000));
        r.dst_port = 443;
        r.timestamp = gen.uniform(0, 100);
        r.features = {gen.normal(), gen.normal()};
        r.categorical = {gen.below(2) ? "tcp" : "udp"};
        r.label = gen.below(2) ? flow_label::malicious : flow_label::normal;
        if (r.label == flow_label::malicious) r.attack_type = "probe";
    }
    fs::path p = fs::temp_directory_path() / "flowgnn_ingest_table.bin";
    write_table(p.string(), recs, schema);
    dataset ds = read_table(p.string());
    REQUIRE(ds.records.size() == recs.size());
    for (size_t i = 0; i < recs.size(); ++i) CHECK(ds.records[i] == recs[i]);
    CHECK(ds.schema.numeric_columns == schema.numeric_columns);
    CHECK(ds.schema.categorical_columns == schema.categorical_columns);

    CHECK_THROWS_AS(read_table("/nonexistent/table.bin"), std::runtime_error);
}
