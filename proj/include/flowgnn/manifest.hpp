#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace flowgnn {

inline constexpr const char* kToolVersion = "0.1.0";

// audit record written next to every run's outputs
struct run_manifest {
    std::string subcommand;
    nlohmann::json flags;  // resolved flag values, defaults included
    std::vector<std::pair<std::string, std::string>> inputs;   // (path, sha256)
    std::vector<std::string> outputs;
    double seconds = 0.0;

    void add_input(const std::string& path);  // hashes the file
    void write(const std::string& path) const;
};

std::string sha256_file(const std::string& path);

}  // namespace flowgnn
