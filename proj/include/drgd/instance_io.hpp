#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "drgd/qp_model.hpp"

namespace drgd {

/// Malformed input file. The message names the file and the offending field
/// (or byte offset for syntax errors).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InstanceFile {
    StandardQP qp;
    std::optional<PrimalDual> label;  ///< conic-form (x*, y*)
};

/// Writes the instance as a JSON document. Numbers use the shortest decimal
/// form that parses back to the same double; infinite bounds are written as
/// the strings "inf" / "-inf".
void write_instance(const std::filesystem::path& path, const InstanceFile& inst);
InstanceFile read_instance(const std::filesystem::path& path);

std::string instance_to_string(const InstanceFile& inst);
InstanceFile instance_from_string(const std::string& text, const std::string& origin = "<string>");

}  // namespace drgd
