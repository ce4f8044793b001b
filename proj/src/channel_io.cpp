#include <fstream>

#include <json.hpp>

#include "covertkey/channel.hpp"

namespace covertkey {

namespace {

constexpr const char* kSliceKeys[4] = {"x0s0", "x1s0", "x0s1", "x1s1"};

// Parse one row-major probability list into a joint slice, renormalizing inputs
// that are within file-precision of a distribution and rejecting anything else.
JointPmf parse_slice(const nlohmann::json& list, int y_size, int z_size, const char* key) {
    if (!list.is_array() || static_cast<int>(list.size()) != y_size * z_size) {
        throw ParseError(std::string("channel file: slice ") + key + " must hold " +
                         std::to_string(y_size * z_size) + " probabilities");
    }
    Eigen::MatrixXd m(y_size, z_size);
    double total = 0.0;
    for (int y = 0; y < y_size; ++y) {
        for (int z = 0; z < z_size; ++z) {
            const auto& v = list[y * z_size + z];
            if (!v.is_number()) {
                throw ParseError(std::string("channel file: non-numeric entry in slice ") + key);
            }
            const double p = v.get<double>();
            if (!(p >= 0.0)) {
                throw ParseError(std::string("channel file: negative entry in slice ") + key);
            }
            m(y, z) = p;
            total += p;
        }
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ParseError(std::string("channel file: slice ") + key + " sums to " +
                         std::to_string(total) + ", not 1");
    }
    return JointPmf::normalized(std::move(m));
}

} // namespace

StateDmc load_channel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("channel file: cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("channel file " + path + ": " + e.what());
    }
    if (!doc.contains("y_size") || !doc.contains("z_size") || !doc.contains("slices")) {
        throw ParseError("channel file " + path + ": requires y_size, z_size, slices");
    }
    const int y_size = doc["y_size"].is_number_integer() ? doc["y_size"].get<int>() : 0;
    const int z_size = doc["z_size"].is_number_integer() ? doc["z_size"].get<int>() : 0;
    if (y_size < 2 || z_size < 2 || y_size > 4 || z_size > 4) {
        throw ParseError("channel file " + path + ": alphabet sizes must lie in [2, 4]");
    }
    const auto& slices = doc["slices"];
    for (const char* key : kSliceKeys) {
        if (!slices.contains(key)) {
            throw ParseError("channel file " + path + ": missing slice " + key);
        }
    }
    return StateDmc(parse_slice(slices[kSliceKeys[0]], y_size, z_size, kSliceKeys[0]),
                    parse_slice(slices[kSliceKeys[1]], y_size, z_size, kSliceKeys[1]),
                    parse_slice(slices[kSliceKeys[2]], y_size, z_size, kSliceKeys[2]),
                    parse_slice(slices[kSliceKeys[3]], y_size, z_size, kSliceKeys[3]));
}

void save_channel(const StateDmc& ch, const std::string& path) {
    nlohmann::ordered_json doc;
    doc["y_size"] = ch.y_size();
    doc["z_size"] = ch.z_size();
    nlohmann::ordered_json slices;
    for (int s = 0; s < 2; ++s) {
        for (int x = 0; x < 2; ++x) {
            std::vector<double> flat;
            flat.reserve(static_cast<std::size_t>(ch.y_size() * ch.z_size()));
            for (int y = 0; y < ch.y_size(); ++y) {
                for (int z = 0; z < ch.z_size(); ++z) {
                    flat.push_back(ch.joint_pq(x, s)(y, z));
                }
            }
            slices[kSliceKeys[2 * s + x]] = flat;
        }
    }
    doc["slices"] = std::move(slices);
    std::ofstream out(path);
    if (!out) throw ParseError("channel file: cannot write " + path);
    out << doc.dump(2) << "\n";
}

} // namespace covertkey
