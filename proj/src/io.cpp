#include "rkhsmm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace rkhsmm::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double x = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw parse_error("not a number: '" + std::string(s) + "'");
    return x;
}

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw io_error("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    return out;
}

json number(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

double number(const json& j, const char* field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw parse_error(std::string("field '") + field + "' holds a non-numeric value");
}

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

/// One JSON array per row.
json rows_json(const Eigen::MatrixXd& M) {
    json a = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) a.push_back(vector_json(M.row(i).transpose()));
    return a;
}

const json& field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) throw parse_error(std::string("model file lacks field '") + name + "'");
    return *it;
}

Eigen::VectorXd vector_from(const json& j, const char* name, Eigen::Index expect) {
    if (!j.is_array()) throw parse_error(std::string("field '") + name + "' must be an array");
    if (expect >= 0 && Eigen::Index(j.size()) != expect)
        throw parse_error(std::string("field '") + name + "' has " + std::to_string(j.size()) + " entries, expected " +
                          std::to_string(expect));
    Eigen::VectorXd v(Eigen::Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = number(j[i], name);
    return v;
}

Eigen::MatrixXd rows_from(const json& j, const char* name, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || Eigen::Index(j.size()) != rows)
        throw parse_error(std::string("field '") + name + "' must hold " + std::to_string(rows) + " rows");
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) M.row(i) = vector_from(j[std::size_t(i)], name, cols).transpose();
    return M;
}

template <typename T>
T get_as(const json& j, const char* name) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw parse_error(std::string("field '") + name + "' has the wrong type");
    }
}

} // namespace

Eigen::MatrixXd read_csv(const fs::path& path, bool skip_header) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool header_pending = skip_header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view cell(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
            try {
                row.push_back(parse_double(cell));
            } catch (const parse_error& e) {
                throw parse_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw parse_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (in.bad()) throw io_error("error while reading " + path.string());
    if (rows.empty()) throw parse_error(path.string() + ": no data rows");
    Eigen::MatrixXd M(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) M(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    return M;
}

Eigen::VectorXd read_vector_csv(const fs::path& path, bool skip_header) {
    const Eigen::MatrixXd M = read_csv(path, skip_header);
    if (M.cols() != 1)
        throw parse_error(path.string() + ": expected a single column, found " + std::to_string(M.cols()));
    return M.col(0);
}

void write_csv(const fs::path& path, const Eigen::MatrixXd& M, const std::vector<std::string>& header) {
    std::ostringstream os;
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    if (!header.empty()) os << '\n';
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << format_double(M(i, j));
        os << '\n';
    }
    write_text(path, os.str());
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    out.flush();
    if (!out) throw io_error("error while writing " + path.string());
}

json model_to_json(const ModelFile& f) {
    const auto& m = f.model;
    const GroupSet gs = f.groups();
    if (std::size_t(m.groups()) != gs.size())
        throw invalid_argument("model has " + std::to_string(m.groups()) + " groups, expected " +
                               std::to_string(gs.size()));
    if (f.X.rows() != m.n() || f.X.cols() != f.d) throw invalid_argument("training design does not match the model");
    json j;
    j["schema"] = model_schema;
    j["schema_version"] = model_schema_version;
    j["kernel"] = kernel_name(f.kind);
    j["d"] = f.d;
    j["Dmax"] = f.dmax;
    j["n"] = m.n();
    j["groups"] = gs.names();
    j["mu"] = number(m.mu);
    j["gamma"] = number(m.gamma);
    j["intercept"] = number(m.intercept);
    j["teta"] = rows_json(m.theta);
    j["fit.v"] = rows_json(m.fit_v.transpose());
    j["fitted"] = vector_json(m.fitted);
    j["Norm.n"] = vector_json(m.norm_n);
    j["Norm.H"] = vector_json(m.norm_H);
    json supp = json::array(), nsupp = json::array();
    for (int v : m.support) {
        supp.push_back(v + 1);
        nsupp.push_back(gs[std::size_t(v)].name);
    }
    j["supp"] = supp;
    j["Nsupp"] = nsupp;
    j["SCR"] = number(m.scr);
    j["crit"] = number(m.crit);
    j["gamma.v"] = vector_json(m.gamma_v);
    j["mu.v"] = vector_json(m.mu_v);
    j["iter"] = m.iter;
    j["convergence"] = m.converged;
    j["RelDiffCrit"] = number(m.rel_diff_crit);
    j["RelDiffPar"] = number(m.rel_diff_par);
    j["X"] = rows_json(f.X);
    j["provenance"] = f.provenance;
    return j;
}

ModelFile model_from_json(const json& j) {
    if (!j.is_object()) throw parse_error("model file is not a JSON object");
    if (get_as<std::string>(field(j, "schema"), "schema") != model_schema)
        throw parse_error("not a meta-model file (schema '" + field(j, "schema").dump() + "')");
    const int version = get_as<int>(field(j, "schema_version"), "schema_version");
    if (version != model_schema_version)
        throw parse_error("unsupported model schema version " + std::to_string(version) + " (expected " +
                          std::to_string(model_schema_version) + ")");
    ModelFile f;
    try {
        f.kind = parse_kernel(get_as<std::string>(field(j, "kernel"), "kernel"));
    } catch (const invalid_argument& e) {
        throw parse_error(e.what());
    }
    f.d = get_as<int>(field(j, "d"), "d");
    f.dmax = get_as<int>(field(j, "Dmax"), "Dmax");
    if (f.d < 1 || f.dmax < 1 || f.dmax > f.d) throw parse_error("invalid d/Dmax in model file");
    const GroupSet gs = f.groups();
    if (get_as<std::vector<std::string>>(field(j, "groups"), "groups") != gs.names())
        throw parse_error("group names do not match d and Dmax");
    const auto n = get_as<Eigen::Index>(field(j, "n"), "n");
    if (n < 1) throw parse_error("invalid n in model file");
    const auto V = Eigen::Index(gs.size());

    auto& m = f.model;
    m.mu = number(field(j, "mu"), "mu");
    m.gamma = number(field(j, "gamma"), "gamma");
    m.intercept = number(field(j, "intercept"), "intercept");
    m.theta = rows_from(field(j, "teta"), "teta", V, n);
    m.fit_v = rows_from(field(j, "fit.v"), "fit.v", V, n).transpose();
    m.fitted = vector_from(field(j, "fitted"), "fitted", n);
    m.norm_n = vector_from(field(j, "Norm.n"), "Norm.n", V);
    m.norm_H = vector_from(field(j, "Norm.H"), "Norm.H", V);
    const auto supp = get_as<std::vector<int>>(field(j, "supp"), "supp");
    const auto nsupp = get_as<std::vector<std::string>>(field(j, "Nsupp"), "Nsupp");
    if (supp.size() != nsupp.size()) throw parse_error("supp and Nsupp differ in length");
    for (std::size_t k = 0; k < supp.size(); ++k) {
        if (supp[k] < 1 || supp[k] > V || gs[std::size_t(supp[k] - 1)].name != nsupp[k])
            throw parse_error("support entry " + std::to_string(supp[k]) + " is inconsistent");
        if (k && supp[k] <= supp[k - 1]) throw parse_error("support must be strictly ascending");
        m.support.push_back(supp[k] - 1);
    }
    m.scr = number(field(j, "SCR"), "SCR");
    m.crit = number(field(j, "crit"), "crit");
    m.gamma_v = vector_from(field(j, "gamma.v"), "gamma.v", -1);
    m.mu_v = vector_from(field(j, "mu.v"), "mu.v", -1);
    m.iter = get_as<int>(field(j, "iter"), "iter");
    m.converged = get_as<bool>(field(j, "convergence"), "convergence");
    m.rel_diff_crit = number(field(j, "RelDiffCrit"), "RelDiffCrit");
    m.rel_diff_par = number(field(j, "RelDiffPar"), "RelDiffPar");
    f.X = rows_from(field(j, "X"), "X", n, f.d);
    if (const auto it = j.find("provenance"); it != j.end()) f.provenance = *it;
    return f;
}

void save_model(const fs::path& path, const ModelFile& f) { write_text(path, model_to_json(f).dump(1) + "\n"); }

ModelFile load_model(const fs::path& path) {
    auto in = open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw parse_error(path.string() + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const parse_error& e) {
        throw parse_error(path.string() + ": " + e.what());
    }
}

std::uint64_t design_hash(const Eigen::MatrixXd& X) {
    std::uint64_t h = 14695981039346656037ull;
    auto feed = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    const std::int64_t shape[2] = {X.rows(), X.cols()};
    feed(shape, sizeof shape);
    feed(X.data(), sizeof(double) * std::size_t(X.size()));
    return h;
}

namespace {

constexpr char cache_magic[8] = {'R', 'K', 'H', 'S', 'G', 'R', 'M', '1'};

struct CacheKey {
    std::int32_t kind;
    std::int32_t dmax;
    std::int32_t correction;
    std::int32_t d;
    std::int64_t n;
    double tol;
    std::uint64_t hash;

    bool operator==(const CacheKey&) const = default;
};

template <typename T>
void put(std::ostream& out, const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

template <typename T>
void get(std::istream& in, T& x, const fs::path& path) {
    in.read(reinterpret_cast<char*>(&x), sizeof x);
    if (!in) throw parse_error(path.string() + ": truncated Gram cache");
}

CacheKey make_key(const Eigen::MatrixXd& X, KernelKind kind, int dmax, bool correction, double tol) {
    return {std::int32_t(kind), dmax, correction ? 1 : 0, std::int32_t(X.cols()), X.rows(), tol, design_hash(X)};
}

} // namespace

void save_gram_cache(const fs::path& path, const EigenGram<double>& g, const Eigen::MatrixXd& X) {
    if (X.rows() != g.n || X.cols() != g.groups.d) throw invalid_argument("Gram cache: design does not match");
    auto out = open_out(path, std::ios::binary);
    out.write(cache_magic, sizeof cache_magic);
    const CacheKey key = make_key(X, g.kind, g.groups.dmax, g.correction, g.tol);
    put(out, key.kind);
    put(out, key.dmax);
    put(out, key.correction);
    put(out, key.d);
    put(out, key.n);
    put(out, key.tol);
    put(out, key.hash);
    for (const auto& ge : g.eig) {
        put(out, std::int32_t(ge.corrected));
        put(out, ge.epsilon);
        out.write(reinterpret_cast<const char*>(ge.values.data()), std::streamsize(sizeof(double) * ge.values.size()));
        out.write(reinterpret_cast<const char*>(ge.vectors.data()),
                  std::streamsize(sizeof(double) * ge.vectors.size()));
    }
    out.flush();
    if (!out) throw io_error("error while writing " + path.string());
}

std::optional<EigenGram<double>> load_gram_cache(const fs::path& path, const Eigen::MatrixXd& X, KernelKind kind,
                                                 int dmax, bool correction, double tol) {
    auto in = open_in(path, std::ios::binary);
    char magic[sizeof cache_magic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, cache_magic, sizeof magic) != 0)
        throw parse_error(path.string() + ": not a Gram cache file");
    CacheKey key{};
    get(in, key.kind, path);
    get(in, key.dmax, path);
    get(in, key.correction, path);
    get(in, key.d, path);
    get(in, key.n, path);
    get(in, key.tol, path);
    get(in, key.hash, path);
    if (!(key == make_key(X, kind, dmax, correction, tol))) return std::nullopt;

    EigenGram<double> g;
    g.kind = kind;
    g.groups = build_group_set(int(X.cols()), dmax);
    g.n = X.rows();
    g.correction = correction;
    g.tol = tol;
    const Eigen::Index n = g.n;
    for (std::size_t v = 0; v < g.groups.size(); ++v) {
        GroupEigen<double> ge;
        std::int32_t corrected = 0;
        get(in, corrected, path);
        get(in, ge.epsilon, path);
        ge.corrected = corrected != 0;
        ge.values.resize(n);
        ge.vectors.resize(n, n);
        in.read(reinterpret_cast<char*>(ge.values.data()), std::streamsize(sizeof(double) * n));
        in.read(reinterpret_cast<char*>(ge.vectors.data()), std::streamsize(sizeof(double) * n * n));
        if (!in) throw parse_error(path.string() + ": truncated Gram cache");
        g.eig.push_back(std::move(ge));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw parse_error(path.string() + ": trailing data in Gram cache");
    return g;
}

} // namespace rkhsmm::io
