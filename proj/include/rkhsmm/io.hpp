#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rkhsmm/gram.hpp"
#include "rkhsmm/kernel.hpp"
#include "rkhsmm/meta_model.hpp"

namespace rkhsmm::io {

/// A file could not be opened, read or written.
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file was readable but its content is malformed.
class parse_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* model_schema = "rkhsmm.metamodel";
inline constexpr int model_schema_version = 1;

/// Shortest decimal text that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);
double parse_double(std::string_view s);

/// Comma-separated numeric table, one row per line. Blank lines are ignored.
Eigen::MatrixXd read_csv(const std::filesystem::path& path, bool skip_header = false);
/// Single-column CSV as a vector.
Eigen::VectorXd read_vector_csv(const std::filesystem::path& path, bool skip_header = false);

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M, const std::vector<std::string>& header = {});
void write_text(const std::filesystem::path& path, const std::string& text);

/// Everything needed to reuse a fitted model: the coefficients, the kernel and
/// group structure, the training design (for predictions) and run provenance.
struct ModelFile {
    MetaModel<double> model;
    KernelKind kind = KernelKind::matern;
    int d = 0;
    int dmax = 0;
    Eigen::MatrixXd X;
    nlohmann::json provenance = nlohmann::json::object();

    GroupSet groups() const { return build_group_set(d, dmax); }
};

nlohmann::json model_to_json(const ModelFile& f);
ModelFile model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const ModelFile& f);
ModelFile load_model(const std::filesystem::path& path);

/// FNV-1a over the shape and the raw bytes of X.
std::uint64_t design_hash(const Eigen::MatrixXd& X);

/// Binary Gram cache keyed by kernel, dmax, correction settings and the design hash.
void save_gram_cache(const std::filesystem::path& path, const EigenGram<double>& g, const Eigen::MatrixXd& X);
/// Returns nothing when the file's key does not match the request.
std::optional<EigenGram<double>> load_gram_cache(const std::filesystem::path& path, const Eigen::MatrixXd& X,
                                                 KernelKind kind, int dmax, bool correction, double tol);

} // namespace rkhsmm::io
