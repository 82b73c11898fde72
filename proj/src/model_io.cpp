#include "maskaudit/model_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

#include "maskaudit/errors.hpp"

namespace maskaudit::io {

using nlohmann::json;
using nlohmann::ordered_json;

std::string encode_f64(double v) {
    if (!std::isfinite(v)) throw DomainError("encode_f64: non-finite value");
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return std::string(buf);
}

double decode_f64(const json& j, const std::string& context) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) {
        throw ParseError(context + ": expected a number or a hex-float string");
    }
    const std::string s = j.get<std::string>();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw ParseError(context + ": cannot parse \"" + s + "\" as a float");
    }
    return v;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

ordered_json encode_values(const std::vector<double>& values) {
    ordered_json arr = ordered_json::array();
    for (double v : values) arr.push_back(encode_f64(v));
    return arr;
}

std::vector<double> decode_values(const json& arr, std::size_t expected,
                                  const std::string& context) {
    if (!arr.is_array()) throw ParseError(context + ": expected an array");
    if (arr.size() != expected) {
        throw ParseError(context + ": expected " + std::to_string(expected) + " entries, got " +
                         std::to_string(arr.size()));
    }
    std::vector<double> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(decode_f64(arr[i], context + "[" + std::to_string(i) + "]"));
    }
    return out;
}

const json& require_field(const json& j, const char* key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(context + ": missing field \"" + key + "\"");
    return *it;
}

int require_int(const json& j, const char* key, const std::string& context) {
    const json& f = require_field(j, key, context);
    if (!f.is_number_integer()) {
        throw ParseError(context + ": field \"" + key + "\" must be an integer");
    }
    return f.get<int>();
}

ordered_json layer_to_json(const net::Layer& layer) {
    ordered_json j;
    std::visit(overloaded{
                   [&](const net::Dense& d) {
                       j["type"] = "dense";
                       j["rows"] = d.W.rows();
                       j["cols"] = d.W.cols();
                       j["W"] = encode_values(d.W.raw());
                       j["b"] = encode_values(d.b.raw());
                   },
                   [&](const net::Relu&) { j["type"] = "relu"; },
                   [&](const net::Sigmoid& s) {
                       j["type"] = "sigmoid";
                       j["gain"] = encode_f64(s.gain);
                   },
                   [&](const net::Staircase& s) {
                       j["type"] = "staircase";
                       j["levels"] = s.levels;
                   },
                   [&](const net::RampStaircase& r) {
                       j["type"] = "ramp_staircase";
                       j["levels"] = r.levels;
                       j["delta"] = encode_f64(r.delta);
                   },
                   [&](const net::Identity&) { j["type"] = "identity"; },
               },
               layer);
    return j;
}

net::Layer layer_from_json(const json& j, std::size_t index) {
    const std::string context = "layers[" + std::to_string(index) + "]";
    if (!j.is_object()) throw ParseError(context + ": expected an object");
    const json& t = require_field(j, "type", context);
    if (!t.is_string()) throw ParseError(context + ": \"type\" must be a string");
    const std::string type = t.get<std::string>();
    if (type == "dense") {
        const int rows = require_int(j, "rows", context);
        const int cols = require_int(j, "cols", context);
        if (rows < 1 || cols < 1) throw ParseError(context + ": rows/cols must be >= 1");
        const auto r = static_cast<std::size_t>(rows);
        const auto c = static_cast<std::size_t>(cols);
        Matrix W(r, c,
                      decode_values(require_field(j, "W", context), r * c, context + ".W"));
        Vector b(decode_values(require_field(j, "b", context), r, context + ".b"));
        return net::Dense{std::move(W), std::move(b)};
    }
    if (type == "relu") return net::Relu{};
    if (type == "sigmoid") {
        return net::Sigmoid{decode_f64(require_field(j, "gain", context), context + ".gain")};
    }
    if (type == "staircase") return net::Staircase{require_int(j, "levels", context)};
    if (type == "ramp_staircase") {
        return net::RampStaircase{
            require_int(j, "levels", context),
            decode_f64(require_field(j, "delta", context), context + ".delta")};
    }
    if (type == "identity") return net::Identity{};
    throw ParseError(context + ": unknown layer type \"" + type + "\"");
}

} // namespace

ordered_json model_to_json(const net::Model& m) {
    m.validate();
    ordered_json j;
    j["precision"] = m.precision == net::Precision::f32 ? "f32" : "f64";
    j["input_dim"] = m.input_dim;
    j["num_classes"] = m.num_classes;
    ordered_json layers = ordered_json::array();
    for (const net::Layer& layer : m.layers) layers.push_back(layer_to_json(layer));
    j["layers"] = std::move(layers);
    return j;
}

net::Model model_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("model: expected a JSON object");
    net::Model m;
    const json& prec = require_field(j, "precision", "model");
    if (!prec.is_string()) throw ParseError("model: \"precision\" must be a string");
    const std::string p = prec.get<std::string>();
    if (p == "f32") {
        m.precision = net::Precision::f32;
    } else if (p == "f64") {
        m.precision = net::Precision::f64;
    } else {
        throw ParseError("model: precision must be \"f64\" or \"f32\", got \"" + p + "\"");
    }
    const int input_dim = require_int(j, "input_dim", "model");
    const int num_classes = require_int(j, "num_classes", "model");
    if (input_dim < 1) throw ParseError("model: input_dim must be >= 1");
    if (num_classes < 2) throw ParseError("model: num_classes must be >= 2");
    m.input_dim = static_cast<std::size_t>(input_dim);
    m.num_classes = static_cast<std::size_t>(num_classes);
    const json& layers = require_field(j, "layers", "model");
    if (!layers.is_array()) throw ParseError("model: \"layers\" must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        m.layers.push_back(layer_from_json(layers[i], i));
    }
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw ParseError(std::string("model: invalid structure: ") + e.what());
    }
    return m;
}

std::string model_to_string(const net::Model& m) { return model_to_json(m).dump(2) + "\n"; }

net::Model model_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: JSON parse failure: ") + e.what());
    }
    return model_from_json(j);
}

void save_model_file(const net::Model& m, const std::string& path) {
    write_text_file(path, model_to_string(m));
}

net::Model load_model_file(const std::string& path) {
    return model_from_string(read_text_file(path));
}

Vector point_from_csv(const std::string& text) {
    const auto tail = text.find_last_not_of(" \t\r\n");
    if (tail != std::string::npos && text[tail] == ',') {
        throw ParseError("point: empty coordinate");
    }
    std::vector<double> values;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        // Trim surrounding whitespace.
        const auto first = token.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) throw ParseError("point: empty coordinate");
        const auto last = token.find_last_not_of(" \t\r\n");
        token = token.substr(first, last - first + 1);
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
            throw ParseError("point: cannot parse coordinate \"" + token + "\"");
        }
        values.push_back(v);
    }
    if (values.empty()) throw ParseError("point: no coordinates");
    return Vector(std::move(values));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArgumentError("cannot open file for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ArgumentError("write failure: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw ArgumentError("cannot rename " + tmp.string() + " to " + path);
}

} // namespace maskaudit::io
