#pragma once

// Text formats shared by the library and the command-line tool.

#include "json.hpp"

#include <string>
#include <string_view>
#include <vector>

#include "qsky/hilbert.hpp"

namespace qsky::io {

using json = nlohmann::json;

/// 17 significant digits, locale independent.
std::string format_double(double v);

/// Comma split without quoting support (the formats never quote).
std::vector<std::string> split_csv(std::string_view line);

json to_json(const hilbert::BasisLabel& l);
json to_json(const hilbert::Ket& k);
hilbert::BasisLabel label_from_json(const json& j);
hilbert::Ket ket_from_json(const json& j);

/// {"dim": n, "basis": [ket...], "entries": [[re, im], ...]} row-major.
json to_json(const hilbert::DensityMatrix& rho);
hilbert::DensityMatrix density_from_json(const json& j);

json to_json(const Eigen::VectorXd& v);

void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace qsky::io
