#include "tard/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace tard {

nlohmann::json matrix_to_json(const Matrix& m)
{
    if (!m.allFinite())
        throw FormatError("matrix_to_json: refusing to serialize non-finite values");
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Matrix matrix_from_json(const nlohmann::json& j)
{
    try {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto data = j.at("data").get<std::vector<double>>();
        if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
            throw FormatError("matrix record has " + std::to_string(data.size()) + " values for shape " +
                              std::to_string(rows) + "x" + std::to_string(cols));
        Matrix m(rows, cols);
        std::copy(data.begin(), data.end(), m.data());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed matrix record: ") + e.what());
    }
}

nlohmann::json parameters_to_json(const std::vector<NamedMatrix>& tensors)
{
    nlohmann::json j;
    j["format"] = "tard-parameters";
    j["version"] = kParameterFormatVersion;
    auto& list = j["tensors"] = nlohmann::json::array();
    for (const auto& t : tensors) {
        auto entry = matrix_to_json(t.value);
        entry["name"] = t.name;
        list.push_back(std::move(entry));
    }
    return j;
}

std::vector<NamedMatrix> parameters_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || j.value("format", "") != "tard-parameters")
        throw FormatError("not a parameter record");
    if (j.value("version", 0) != kParameterFormatVersion)
        throw FormatError("unsupported parameter format version " + std::to_string(j.value("version", 0)));
    std::vector<NamedMatrix> out;
    for (const auto& entry : j.at("tensors"))
        out.push_back({entry.at("name").get<std::string>(), matrix_from_json(entry)});
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

void write_parameter_file(const std::filesystem::path& path, const std::vector<NamedMatrix>& tensors)
{
    write_text_file(path, parameters_to_json(tensors).dump() + "\n");
}

std::vector<NamedMatrix> read_parameter_file(const std::filesystem::path& path)
{
    return parameters_from_json(read_json_file(path));
}

} // namespace tard
