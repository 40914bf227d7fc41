#include "drgd/instance_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace drgd {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "drgd-qp-instance";
constexpr int kVersion = 1;

json number_or_sentinel(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

json vector_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number_or_sentinel(v[i]));
    return arr;
}

json matrix_json(const SparseMatrix& a) {
    return json{{"rows", a.rows()},
                {"cols", a.cols()},
                {"offsets", a.offsets()},
                {"indices", a.indices()},
                {"values", a.values()}};
}

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw FormatError(origin_ + ": field '" + field + "': " + what);
    }

    const json& get(const json& obj, const std::string& key, const std::string& path) const {
        if (!obj.is_object() || !obj.contains(key)) fail(path + key, "missing");
        return obj.at(key);
    }

    double number(const json& v, const std::string& field) const {
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf") return kInf;
            if (s == "-inf") return -kInf;
        }
        fail(field, "expected a number or \"inf\"/\"-inf\"");
    }

    Vector vector(const json& obj, const std::string& key, const std::string& path) const {
        const auto& arr = get(obj, key, path);
        if (!arr.is_array()) fail(path + key, "expected an array");
        Vector v(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            v[static_cast<Eigen::Index>(i)] =
                number(arr[i], path + key + "[" + std::to_string(i) + "]");
        }
        return v;
    }

    std::int64_t integer(const json& obj, const std::string& key, const std::string& path) const {
        const auto& v = get(obj, key, path);
        if (!v.is_number_integer()) fail(path + key, "expected an integer");
        return v.get<std::int64_t>();
    }

    SparseMatrix matrix(const json& obj, const std::string& key) const {
        const auto& m = get(obj, key, "");
        const std::string path = key + ".";
        try {
            auto offsets = get(m, "offsets", path).get<std::vector<std::int64_t>>();
            auto indices = get(m, "indices", path).get<std::vector<std::int64_t>>();
            std::vector<double> values;
            for (const auto& v : get(m, "values", path)) {
                values.push_back(number(v, path + "values"));
            }
            return SparseMatrix(integer(m, "rows", path), integer(m, "cols", path),
                                std::move(offsets), std::move(indices), std::move(values));
        } catch (const json::exception& e) {
            fail(key, e.what());
        } catch (const std::invalid_argument& e) {
            fail(key, e.what());
        }
    }

private:
    std::string origin_;
};

}  // namespace

std::string instance_to_string(const InstanceFile& inst) {
    const auto& qp = inst.qp;
    json doc{{"format", kFormat},
             {"version", kVersion},
             {"n", qp.n()},
             {"m_eq", qp.m_eq()},
             {"m_ineq", qp.m_ineq()},
             {"P", matrix_json(qp.P)},
             {"c", vector_json(qp.c)},
             {"A_eq", matrix_json(qp.A_eq)},
             {"b_eq", vector_json(qp.b_eq)},
             {"G", matrix_json(qp.G)},
             {"h", vector_json(qp.h)},
             {"l", vector_json(qp.l)},
             {"u", vector_json(qp.u)}};
    if (inst.label) {
        doc["label"] = json{{"x", vector_json(inst.label->x)}, {"y", vector_json(inst.label->y)}};
    }
    return doc.dump(1) + "\n";
}

InstanceFile instance_from_string(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(origin + ": " + e.what());
    }
    Reader rd(origin);
    const auto& fmt = rd.get(doc, "format", "");
    if (!fmt.is_string() || fmt.get<std::string>() != kFormat) rd.fail("format", "not a QP instance");
    if (rd.integer(doc, "version", "") != kVersion) rd.fail("version", "unsupported version");

    InstanceFile inst;
    auto& qp = inst.qp;
    qp.P = rd.matrix(doc, "P");
    qp.c = rd.vector(doc, "c", "");
    qp.A_eq = rd.matrix(doc, "A_eq");
    qp.b_eq = rd.vector(doc, "b_eq", "");
    qp.G = rd.matrix(doc, "G");
    qp.h = rd.vector(doc, "h", "");
    qp.l = rd.vector(doc, "l", "");
    qp.u = rd.vector(doc, "u", "");

    if (rd.integer(doc, "n", "") != qp.n()) rd.fail("n", "does not match length of c");
    if (rd.integer(doc, "m_eq", "") != qp.m_eq()) rd.fail("m_eq", "does not match length of b_eq");
    if (rd.integer(doc, "m_ineq", "") != qp.m_ineq()) rd.fail("m_ineq", "does not match length of h");

    if (doc.contains("label")) {
        const auto& lab = doc.at("label");
        inst.label = PrimalDual{rd.vector(lab, "x", "label."), rd.vector(lab, "y", "label.")};
    }
    try {
        qp.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(origin + ": invalid problem data: " + e.what());
    }
    return inst;
}

void write_instance(const std::filesystem::path& path, const InstanceFile& inst) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << instance_to_string(inst);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

InstanceFile read_instance(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return instance_from_string(ss.str(), path.string());
}

}  // namespace drgd
