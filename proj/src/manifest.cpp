#include "flowgnn/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <stdexcept>

namespace flowgnn {

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("sha256: context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize n = in.gcount();
        if (n > 0) EVP_DigestUpdate(ctx, buf, static_cast<size_t>(n));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void run_manifest::add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }

void run_manifest::write(const std::string& path) const {
    nlohmann::json j;
    j["tool"] = "flowgnn";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["flags"] = flags;
    nlohmann::json ins = nlohmann::json::array();
    for (const auto& [p, h] : inputs) ins.push_back({{"path", p}, {"sha256", h}});
    j["inputs"] = std::move(ins);
    j["outputs"] = outputs;
    j["seconds"] = seconds;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write manifest: " + path);
    os << j.dump(2) << "\n";
}

}  // namespace flowgnn
