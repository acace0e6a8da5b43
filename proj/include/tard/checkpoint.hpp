#ifndef TARD_CHECKPOINT_HPP
#define TARD_CHECKPOINT_HPP

#include "tard/nn/dense.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tard {

class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct NamedMatrix {
    std::string name;
    Matrix value;

    bool operator==(const NamedMatrix&) const = default;
};

inline constexpr int kParameterFormatVersion = 1;

/// {"name", "rows", "cols", "data": row-major values}. Doubles are written in
/// shortest round-trip form, so decoding reproduces every bit.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json parameters_to_json(const std::vector<NamedMatrix>& tensors);
std::vector<NamedMatrix> parameters_from_json(const nlohmann::json& j);

void write_parameter_file(const std::filesystem::path& path, const std::vector<NamedMatrix>& tensors);
std::vector<NamedMatrix> read_parameter_file(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace tard

#endif // TARD_CHECKPOINT_HPP
