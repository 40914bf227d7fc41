#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drgd/net.hpp"

namespace drgd {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "drgd-net-checkpoint";

json matrix_to_json(const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw FormatError(where + ": expected {rows, cols, data}");
    }
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() ||
        data.size() != static_cast<std::size_t>(rows * cols)) {
        throw FormatError(where + ": data length does not match rows*cols");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!data[i].is_number()) throw FormatError(where + ": non-numeric entry");
        m.data()[i] = data[i].get<double>();
    }
    return m;
}

}  // namespace

std::string checkpoint_to_string(const NetParams& params) {
    params.check_consistent();
    json j;
    j["format"] = kFormat;
    j["version"] = kCheckpointVersion;
    j["layers"] = params.layers;
    j["width"] = params.width;
    j["unroll_steps"] = params.unroll_steps;
    j["eta_prior"] = params.eta_prior;
    json tensors = json::object();
    for_each_tensor(params, [&](const std::string& name, const Matrix& t) {
        tensors[name] = matrix_to_json(t);
    });
    j["tensors"] = std::move(tensors);
    return j.dump(1) + "\n";
}

NetParams checkpoint_from_string(const std::string& text, const std::string& origin,
                                 std::optional<NetShape> expected) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(origin + ": corrupt checkpoint (" + e.what() + ")");
    }
    try {
        if (!j.is_object() || j.value("format", "") != kFormat) {
            throw FormatError(origin + ": not a network checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError(origin + ": checkpoint version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
        }
        NetParams p;
        p.layers = j.at("layers").get<int>();
        p.width = j.at("width").get<int>();
        p.unroll_steps = j.at("unroll_steps").get<int>();
        p.eta_prior = j.at("eta_prior").get<std::vector<double>>();
        if (p.layers < 1 || p.width < 1) throw FormatError(origin + ": invalid layers/width");
        if (expected && (expected->layers != p.layers || expected->width != p.width)) {
            std::ostringstream os;
            os << origin << ": shape mismatch, checkpoint has L=" << p.layers << " d=" << p.width
               << " but L=" << expected->layers << " d=" << expected->width << " was expected";
            throw FormatError(os.str());
        }
        p.layer.resize(p.layers);
        const auto& tensors = j.at("tensors");
        for_each_tensor(p, [&](const std::string& name, Matrix& t) {
            if (!tensors.contains(name)) throw FormatError(origin + ": missing tensor " + name);
            t = matrix_from_json(tensors.at(name), origin + ": tensor " + name);
        });
        try {
            p.check_consistent();
        } catch (const std::invalid_argument& e) {
            throw FormatError(origin + ": " + e.what());
        }
        return p;
    } catch (const json::exception& e) {
        throw FormatError(origin + ": malformed checkpoint field (" + e.what() + ")");
    }
}

void save_checkpoint(const NetParams& params, const std::filesystem::path& path) {
    const std::string text = checkpoint_to_string(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

NetParams load_checkpoint(const std::filesystem::path& path, std::optional<NetShape> expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str(), path.string(), expected);
}

}  // namespace drgd
