#pragma once

#include <string>

#include "json.hpp"

#include "maskaudit/network.hpp"

// Model (de)serialization. Every real number is encoded as a C hex-float
// string ("%a" format), which round-trips IEEE-754 doubles exactly; decoding
// also accepts plain JSON numbers for hand-written files. Key order is fixed
// (ordered_json) so serialization is byte-deterministic.

namespace maskaudit::io {

// Hex-float encoding of a finite double, e.g. 0.2 -> "0x1.999999999999ap-3".
std::string encode_f64(double v);

// Decode from a hex-float/decimal string or a JSON number.
double decode_f64(const nlohmann::json& j, const std::string& context);

nlohmann::ordered_json model_to_json(const net::Model& m);
net::Model model_from_json(const nlohmann::json& j);

std::string model_to_string(const net::Model& m);
net::Model model_from_string(const std::string& text);

void save_model_file(const net::Model& m, const std::string& path);
net::Model load_model_file(const std::string& path);

// Comma-separated point, e.g. "0.5,1.25" (decimal or hex-float tokens).
Vector point_from_csv(const std::string& text);

// Whole-file helpers. Writes go to a temporary file in the same directory
// followed by an atomic rename.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace maskaudit::io
