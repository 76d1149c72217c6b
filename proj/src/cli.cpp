#include "rkhsmm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rkhsmm/io.hpp"
#include "rkhsmm/rkhsmm.hpp"

namespace rkhsmm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using io::format_double;
using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

constexpr const char* tool_version = "1.0.0";

struct Options {
    unsigned threads = default_thread_count();
    bool verbose = false;

    std::string x, y, xtest, ytest, model, out, gram_cache;
    bool skip_header = false;
    std::string kernel = "matern";
    int dmax = 0;  // 0: min(3, d)
    double gram_tol = 1e-8;

    int max_iter = 1000;
    double crit_tol = 1e-4;
    double par_tol = 1e-4;
    bool unscaled_zero_test = false;

    std::vector<double> frc{4, 8, 16, 32, 64};
    std::vector<double> gamma{0.2, 0.1, 0.01, 0.005, 0};
    std::vector<double> fit_gamma{0};
    std::vector<double> mu;
    bool two_step = false;
    bool step_two = false;
    int qmax = 3;
    double rat = 100;
    int num = 25;
    double min_index = 0;

    long n = 100;
    int d = 5;
    int reps = 10;
    long n_test = 0;
    long n_eval = 1000;
    double sigma = 0.2;
    std::string c = "standard";
    std::uint64_t seed = 1;
};

/// Parsed training data and everything derived from it.
struct Training {
    DesignData<double> data;
    KernelKind kind{};
    int dmax = 0;
    EigenGram<double> grams;
};

std::vector<double> descending(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

FitConfig<double> solver_config(const Options& o, std::ostream& err) {
    FitConfig<double> cfg;
    cfg.max_iter = o.max_iter;
    cfg.crit_tol = o.crit_tol;
    cfg.par_tol = o.par_tol;
    cfg.unscaled_zero_test = o.unscaled_zero_test;
    if (o.verbose) {
        auto mutex = std::make_shared<std::mutex>();
        cfg.on_sweep = [mutex, &err](const SweepInfo<double>& s) {
            std::ostringstream line;
            line << s.stage << " iter=" << s.iter << " active=" << s.active << " crit=" << format_double(s.crit)
                 << " RelDiffCrit=" << format_double(s.rel_diff_crit)
                 << " RelDiffPar=" << format_double(s.rel_diff_par) << '\n';
            std::lock_guard lock(*mutex);
            err << line.str();
        };
    }
    return cfg;
}

json solver_json(const Options& o) {
    return {{"max_iter", o.max_iter},
            {"crit_tol", o.crit_tol},
            {"par_tol", o.par_tol},
            {"unscaled_zero_test", o.unscaled_zero_test}};
}

Training load_training(const Options& o, bool need_y, std::ostream& err) {
    Training t;
    t.data.X = io::read_csv(o.x, o.skip_header);
    if (need_y) {
        t.data.Y = io::read_vector_csv(o.y, o.skip_header);
        validate_design(t.data);
    } else {
        validate_unit_cube(t.data.X, "design");
    }
    t.kind = parse_kernel(o.kernel);
    const int d = int(t.data.d());
    t.dmax = o.dmax > 0 ? o.dmax : std::min(3, d);

    const GroupSet groups = build_group_set(d, t.dmax);
    if (!o.gram_cache.empty() && fs::exists(o.gram_cache)) {
        if (auto g = io::load_gram_cache(o.gram_cache, t.data.X, t.kind, t.dmax, true, o.gram_tol)) {
            if (o.verbose) err << "gram: loaded " << o.gram_cache << '\n';
            t.grams = std::move(*g);
            return t;
        }
        if (o.verbose) err << "gram: cache key mismatch, recomputing\n";
    }
    t.grams = compute_gram(t.data.X, groups, t.kind, true, o.gram_tol, o.threads);
    if (o.verbose) {
        std::size_t corrected = 0;
        for (const auto& ge : t.grams.eig) corrected += ge.corrected;
        err << "gram: " << groups.size() << " groups, " << corrected << " corrected\n";
    }
    if (!o.gram_cache.empty()) io::save_gram_cache(o.gram_cache, t.grams, t.data.X);
    return t;
}

json provenance(const Options& o, const char* command, const Training& t) {
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << io::design_hash(t.data.X);
    return {{"tool", "rkhsmm"},
            {"version", tool_version},
            {"command", command},
            {"kernel", kernel_name(t.kind)},
            {"Dmax", t.dmax},
            {"inputs", {{"x", o.x}, {"y", o.y}, {"xtest", o.xtest}, {"ytest", o.ytest}, {"skip_header", o.skip_header}}},
            {"design_hash", hash.str()},
            {"gram_tol", o.gram_tol},
            {"solver", solver_json(o)}};
}

io::ModelFile model_file(const Training& t, MetaModel<double> m, json prov) {
    io::ModelFile f;
    f.model = std::move(m);
    f.kind = t.kind;
    f.d = int(t.data.d());
    f.dmax = t.dmax;
    f.X = t.data.X;
    f.provenance = std::move(prov);
    return f;
}

fs::path require_out_dir(const Options& o) {
    if (o.out.empty()) throw invalid_argument("--out is required");
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw io::io_error("cannot create directory " + o.out + ": " + ec.message());
    return fs::path(o.out);
}

std::string support_names(const MetaModel<double>& m, const GroupSet& gs) {
    std::string s;
    for (int v : m.support) s += (s.empty() ? "" : " ") + gs[std::size_t(v)].name;
    return s;
}

/// Rows are mu values, columns gamma values, with a header row and column.
std::string error_matrix_csv(const std::vector<double>& mus, const std::vector<double>& gammas, const MatD& e) {
    std::ostringstream os;
    os << "mu";
    for (double g : gammas) os << ",gamma=" << format_double(g);
    os << '\n';
    for (std::size_t i = 0; i < mus.size(); ++i) {
        os << format_double(mus[i]);
        for (std::size_t j = 0; j < gammas.size(); ++j) os << ',' << format_double(e(Eigen::Index(i), Eigen::Index(j)));
        os << '\n';
    }
    return os.str();
}

void emit(const Options& o, const std::string& text, std::ostream& out) {
    if (o.out.empty())
        out << text;
    else
        io::write_text(o.out, text);
}

int cmd_gram(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.out.empty()) throw invalid_argument("--out is required");
    Training t = load_training(o, false, err);
    io::save_gram_cache(o.out, t.grams, t.data.X);
    std::ostringstream os;
    os << "group,lambda_max,lambda_min,corrected,epsilon\n";
    for (std::size_t v = 0; v < t.grams.size(); ++v) {
        const auto& ge = t.grams[v];
        os << t.grams.groups[v].name << ',' << format_double(ge.values(0)) << ','
           << format_double(ge.values(ge.values.size() - 1)) << ',' << (ge.corrected ? 1 : 0) << ','
           << format_double(ge.epsilon) << '\n';
    }
    out << os.str();
    return success;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
    const fs::path dir = require_out_dir(o);
    Training t = load_training(o, true, err);
    const auto cfg = solver_config(o, err);
    const std::vector<double> mus =
        o.mu.empty() ? mu_grid(mu_max(t.data.Y, t.grams), t.grams.n, o.frc) : descending(o.mu);
    const TuningGrid<double> grid{mus, descending(o.fit_gamma)};
    auto path = fit_path(t.data.Y, t.grams, grid, cfg, o.threads);
    if (o.step_two)
        parallel_for(path.entries.size(), o.threads, [&](std::size_t k) {
            auto& e = path.entries[k];
            if (e.gamma > 0) e.model = rgs_fit(t.data.Y, t.grams, e.mu, e.gamma, e.model, cfg, true);
        });

    json prov = provenance(o, "fit", t);
    prov["grid"] = {{"mu", mus}, {"gamma", grid.gammas}, {"step_two", o.step_two}};
    std::ostringstream index;
    index << "mu,gamma,n_support,crit,iter,convergence,support,file\n";
    for (std::size_t i = 0; i < mus.size(); ++i)
        for (std::size_t j = 0; j < grid.gammas.size(); ++j) {
            const auto& e = path.at(i, j);
            const std::string file = "model_" + std::to_string(i) + "_" + std::to_string(j) + ".json";
            io::save_model(dir / file, model_file(t, e.model, prov));
            index << format_double(e.mu) << ',' << format_double(e.gamma) << ',' << e.model.n_support() << ','
                  << format_double(e.model.crit) << ',' << e.model.iter << ',' << (e.model.converged ? 1 : 0) << ','
                  << support_names(e.model, t.grams.groups) << ',' << file << '\n';
        }
    io::write_text(dir / "fits.csv", index.str());
    out << index.str();
    return success;
}

int cmd_tune(const Options& o, std::ostream& out, std::ostream& err) {
    const fs::path dir = require_out_dir(o);
    Training t = load_training(o, true, err);
    const MatD Xtest = io::read_csv(o.xtest, o.skip_header);
    const VecD Ytest = io::read_vector_csv(o.ytest, o.skip_header);
    const auto cfg = solver_config(o, err);
    json prov = provenance(o, "tune", t);
    prov["grid"] = {{"frc", o.frc}, {"gamma", descending(o.gamma)}, {"two_step", o.two_step}};

    json sel;
    MetaModel<double> chosen;
    if (o.two_step) {
        auto r = two_step_tune(t.data, t.grams, Xtest, Ytest, o.frc, o.gamma, cfg, o.threads);
        io::write_text(dir / "errors_step1.csv", error_matrix_csv(r.step1.mus, r.step1.gammas, r.errors1));
        io::write_text(dir / "errors.csv", error_matrix_csv(r.step2.mus, r.step2.gammas, r.errors2));
        const auto& e = r.step2.at(r.best.i, r.best.j);
        sel = {{"mu", e.mu}, {"gamma", e.gamma}, {"error", r.errors2(r.best.i, r.best.j)}};
        chosen = std::move(r.model);
    } else {
        const auto mus = mu_grid(mu_max(t.data.Y, t.grams), t.grams.n, o.frc);
        auto r = tune(t.data, t.grams, Xtest, Ytest, TuningGrid<double>{mus, descending(o.gamma)}, cfg, o.threads);
        io::write_text(dir / "errors.csv", error_matrix_csv(r.path.mus, r.path.gammas, r.errors));
        const auto& e = r.path.at(r.best.i, r.best.j);
        sel = {{"mu", e.mu}, {"gamma", e.gamma}, {"error", r.errors(r.best.i, r.best.j)}};
        chosen = std::move(r.model);
    }
    sel["support"] = support_names(chosen, t.grams.groups);
    io::save_model(dir / "model.json", model_file(t, chosen, prov));
    io::write_text(dir / "selection.json", sel.dump(1) + "\n");
    out << "selected mu=" << format_double(sel["mu"].get<double>())
        << " gamma=" << format_double(sel["gamma"].get<double>())
        << " error=" << format_double(sel["error"].get<double>()) << " support=" << sel["support"].get<std::string>()
        << '\n';
    return success;
}

int cmd_qmax(const Options& o, std::ostream& out, std::ostream& err) {
    const fs::path dir = require_out_dir(o);
    Training t = load_training(o, true, err);
    const auto cfg = solver_config(o, err);
    auto r = fit_qmax(t.data.Y, t.grams, o.gamma, o.qmax, o.rat, o.num, cfg, o.threads);
    json prov = provenance(o, "qmax", t);
    prov["grid"] = {{"gamma", r.path.gammas}, {"qmax", o.qmax}, {"rat", o.rat}, {"num", o.num}};

    std::ostringstream probes;
    probes << "probe,mu_g,q\n";
    for (std::size_t k = 0; k < r.mus.size(); ++k)
        probes << k + 1 << ',' << format_double(r.mus[k]) << ',' << r.qs[k] << '\n';
    io::write_text(dir / "probes.csv", probes.str());

    std::ostringstream index;
    index << "mu,gamma,n_support,support,file\n";
    for (std::size_t j = 0; j < r.path.entries.size(); ++j) {
        const auto& e = r.path.entries[j];
        const std::string file = "model_" + std::to_string(j) + ".json";
        io::save_model(dir / file, model_file(t, e.model, prov));
        index << format_double(e.mu) << ',' << format_double(e.gamma) << ',' << e.model.n_support() << ','
              << support_names(e.model, t.grams.groups) << ',' << file << '\n';
    }
    io::write_text(dir / "fits.csv", index.str());
    out << "found=" << (r.found ? "true" : "false") << " mu_qmax=" << format_double(r.mu_qmax) << '\n' << index.str();
    if (!r.found) err << "qmax: no probe reached exactly " << o.qmax << " active groups\n";
    return success;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    const auto f = io::load_model(o.model);
    const MatD Xtest = io::read_csv(o.xtest, o.skip_header);
    const GroupSet gs = f.groups();
    std::vector<bool> used(gs.size(), false);
    for (int v : f.model.support) used[std::size_t(v)] = true;
    const VecD yhat = predict(f.model, cross_gram(f.X, Xtest, gs, f.kind, &used));
    std::ostringstream os;
    os << "yhat\n";
    for (Eigen::Index j = 0; j < yhat.size(); ++j) os << format_double(yhat(j)) << '\n';
    emit(o, os.str(), out);
    if (!o.ytest.empty()) {
        const VecD Ytest = io::read_vector_csv(o.ytest, o.skip_header);
        if (Ytest.size() != yhat.size()) throw invalid_argument("--ytest length does not match --xtest rows");
        const std::string line = "mse," + format_double((Ytest - yhat).squaredNorm() / double(yhat.size())) + "\n";
        (o.out.empty() ? err : out) << line;
    }
    return success;
}

int cmd_sobol(const Options& o, std::ostream& out, std::ostream&) {
    const auto f = io::load_model(o.model);
    const GroupSet gs = f.groups();
    const auto rep = empirical_sobol(f.model, gs);
    std::ostringstream os;
    os << "group,cardinality,S\n";
    for (std::size_t v = 0; v < gs.size(); ++v)
        if (rep.indices(Eigen::Index(v)) >= o.min_index)
            os << gs[v].name << ',' << gs[v].vars.size() << ',' << format_double(rep.indices(Eigen::Index(v))) << '\n';
    os << "\nvariable,S_T\n";
    for (int a = 0; a < gs.d; ++a) os << 'x' << a + 1 << ',' << format_double(rep.total_by_var(a)) << '\n';
    emit(o, os.str(), out);
    return success;
}

std::vector<double> parse_coefficients(const std::string& c, int d) {
    if (c == "standard") return standard_coefficients<double>(d);
    std::vector<double> out;
    std::stringstream ss(c);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(io::parse_double(cell));
        } catch (const io::parse_error&) {
            throw invalid_argument("--c: '" + cell + "' is not a number");
        }
    }
    return out;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
    const fs::path dir = require_out_dir(o);
    BenchConfig<double> b;
    b.spec = {o.d, parse_coefficients(o.c, o.d), o.sigma, o.seed};
    b.n = o.n;
    b.n_test = o.n_test;
    b.n_eval = o.n_eval;
    b.dmax = o.dmax > 0 ? o.dmax : std::min(3, o.d);
    b.kind = parse_kernel(o.kernel);
    b.reps = o.reps;
    b.frc = o.frc;
    b.gammas = o.gamma;
    b.two_step = o.two_step;
    b.fit = solver_config(o, err);
    b.threads = o.threads;
    const auto r = run_benchmark(b);

    std::ostringstream metrics;
    metrics << "n,d,Dmax,kernel,reps,gpe,mse,mse_x1e4,re\n"
            << b.n << ',' << b.spec.d << ',' << b.dmax << ',' << kernel_name(b.kind) << ',' << b.reps << ','
            << format_double(r.metrics.gpe) << ',' << format_double(r.metrics.mse) << ','
            << format_double(r.metrics.mse * 1e4) << ',' << format_double(r.metrics.re) << '\n';
    io::write_text(dir / "metrics.csv", metrics.str());

    std::ostringstream sel;
    sel << "rep,mu,gamma,n_support,prediction_mse\n";
    for (std::size_t k = 0; k < r.reps.size(); ++k)
        sel << k + 1 << ',' << format_double(r.reps[k].mu) << ',' << format_double(r.reps[k].gamma) << ','
            << r.reps[k].n_support << ',' << format_double(r.reps[k].prediction_mse) << '\n';
    io::write_text(dir / "selections.csv", sel.str());

    std::ostringstream sob;
    sob << "group,cardinality,truth,mean_estimate";
    for (std::size_t k = 0; k < r.reps.size(); ++k) sob << ",rep" << k + 1;
    sob << '\n';
    for (std::size_t v = 0; v < r.groups.size(); ++v) {
        const auto V = Eigen::Index(v);
        sob << r.groups[v].name << ',' << r.groups[v].vars.size() << ',' << format_double(r.truth(V)) << ','
            << format_double(r.mean_sobol(V));
        for (const auto& rep : r.reps) sob << ',' << format_double(rep.sobol(V));
        sob << '\n';
    }
    io::write_text(dir / "sobol.csv", sob.str());

    out << "GPE=" << format_double(r.metrics.gpe) << " MSE=" << format_double(r.metrics.mse)
        << " (x1e4: " << format_double(r.metrics.mse * 1e4) << ") RE=" << format_double(r.metrics.re) << '\n';
    return success;
}

void add_data_options(CLI::App* sub, Options& o, bool with_y) {
    sub->add_option("--x", o.x, "Design CSV (n rows, d columns, values in [0,1])")->required()->check(CLI::ExistingFile);
    if (with_y) sub->add_option("--y", o.y, "Response CSV (one column)")->required()->check(CLI::ExistingFile);
    sub->add_flag("--skip-header", o.skip_header, "Ignore the first non-blank line of every CSV input");
    sub->add_option("--kernel", o.kernel, "linear, quad, brownian, matern or gaussian")->capture_default_str();
    sub->add_option("--dmax", o.dmax, "Largest interaction order (default min(3, d))")->check(CLI::PositiveNumber);
    sub->add_option("--gram-tol", o.gram_tol, "Relative eigenvalue floor for the Gram correction")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--gram-cache", o.gram_cache, "Binary Gram cache, reused when its key matches");
}

void add_solver_options(CLI::App* sub, Options& o) {
    sub->add_option("--max-iter", o.max_iter, "Sweep limit per fit")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--crit-tol", o.crit_tol, "Relative criterion change tolerance")->capture_default_str();
    sub->add_option("--par-tol", o.par_tol, "Relative coefficient change tolerance")->capture_default_str();
    sub->add_flag("--unscaled-zero-test", o.unscaled_zero_test,
                  "Ridge-group-sparse zero test against gamma instead of sqrt(n) gamma");
}

void report(std::ostream& err, const char* kind, const std::string& message, int code, const std::string& context = {}) {
    json rec = {{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!context.empty()) rec["context"] = context;
    err << rec.dump() << '\n';
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Sparse RKHS meta-models and Sobol sensitivity indices"};
    app.set_version_flag("--version", tool_version);
    app.set_config("--config", "", "TOML or INI file; subcommand keys go in a section named after the subcommand");
    app.add_option("--threads", o.threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", o.verbose, "Per-sweep progress on stderr");
    app.require_subcommand(1);
    app.fallthrough();

    auto* gram = app.add_subcommand("gram", "Compute and cache the corrected Gram eigendecompositions");
    add_data_options(gram, o, false);
    gram->add_option("--out", o.out, "Cache file to write")->required();

    auto* fit = app.add_subcommand("fit", "Fit meta-models on a (mu, gamma) grid");
    add_data_options(fit, o, true);
    add_solver_options(fit, o);
    fit->add_option("--mu", o.mu, "Ridge-group-sparse mu values (group lasso uses sqrt(n) mu)")->delimiter(',');
    fit->add_option("--frc", o.frc, "mu = mu_max / (sqrt(n) frc) when --mu is absent")
        ->delimiter(',')
        ->capture_default_str();
    fit->add_option("--gamma", o.fit_gamma, "gamma values; 0 gives the group lasso")
        ->delimiter(',')
        ->capture_default_str();
    fit->add_flag("--step-two", o.step_two, "Refine gamma > 0 fits over all groups");
    fit->add_option("--out", o.out, "Output directory")->required();

    auto* tun = app.add_subcommand("tune", "Fit a grid and select by test-set prediction error");
    add_data_options(tun, o, true);
    add_solver_options(tun, o);
    tun->add_option("--xtest", o.xtest, "Test design CSV")->required()->check(CLI::ExistingFile);
    tun->add_option("--ytest", o.ytest, "Test response CSV")->required()->check(CLI::ExistingFile);
    tun->add_option("--frc", o.frc, "Grid factors")->delimiter(',')->capture_default_str();
    tun->add_option("--gamma", o.gamma, "gamma values")->delimiter(',')->capture_default_str();
    tun->add_flag("--two-step", o.two_step, "Group-lasso path first, then gamma > 0 around the best mu");
    tun->add_option("--out", o.out, "Output directory")->required();

    auto* qm = app.add_subcommand("qmax", "Models with at most qmax active groups");
    add_data_options(qm, o, true);
    add_solver_options(qm, o);
    qm->add_option("--qmax", o.qmax, "Target number of active groups")->capture_default_str();
    qm->add_option("--rat", o.rat, "Lower end of the bisection is mu_max / rat")->capture_default_str();
    qm->add_option("--num", o.num, "Bisection iteration limit")->capture_default_str();
    qm->add_option("--gamma", o.gamma, "gamma values")->delimiter(',')->capture_default_str();
    qm->add_option("--out", o.out, "Output directory")->required();

    auto* pred = app.add_subcommand("predict", "Evaluate a saved model at new points");
    pred->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    pred->add_option("--xtest", o.xtest, "Points CSV")->required()->check(CLI::ExistingFile);
    pred->add_option("--ytest", o.ytest, "Optional responses; reports the mean squared error")
        ->check(CLI::ExistingFile);
    pred->add_flag("--skip-header", o.skip_header, "Ignore the first non-blank line of every CSV input");
    pred->add_option("--out", o.out, "Predictions CSV (default: stdout)");

    auto* sob = app.add_subcommand("sobol", "Empirical Sobol indices of a saved model");
    sob->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
    sob->add_option("--min", o.min_index, "Only list groups with an index at least this large")->capture_default_str();
    sob->add_option("--out", o.out, "CSV output (default: stdout)");

    auto* bench = app.add_subcommand("bench", "g-function benchmark");
    add_solver_options(bench, o);
    bench->add_option("--n", o.n, "Training size")->capture_default_str();
    bench->add_option("--n-test", o.n_test, "Selection set size (default n)");
    bench->add_option("--n-eval", o.n_eval, "Noiseless evaluation set size")->capture_default_str();
    bench->add_option("--d", o.d, "Number of inputs")->capture_default_str();
    bench->add_option("--dmax", o.dmax, "Largest interaction order (default min(3, d))");
    bench->add_option("--kernel", o.kernel, "Kernel")->capture_default_str();
    bench->add_option("--sigma", o.sigma, "Noise standard deviation")->capture_default_str();
    bench->add_option("--c", o.c, "'standard' (0.2, 0.6, 0.8, then 100) or a comma-separated list of d coefficients")->capture_default_str();
    bench->add_option("--reps", o.reps, "Repetitions")->capture_default_str();
    bench->add_option("--frc", o.frc, "Grid factors")->delimiter(',')->capture_default_str();
    bench->add_option("--gamma", o.gamma, "gamma values")->delimiter(',')->capture_default_str();
    bench->add_flag("--two-step", o.two_step, "Two-step selection");
    bench->add_option("--seed", o.seed, "Base seed")->capture_default_str();
    bench->add_option("--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        report(err, "usage", e.what(), usage_error);
        return usage_error;
    }

    try {
        if (*gram) return cmd_gram(o, out, err);
        if (*fit) return cmd_fit(o, out, err);
        if (*tun) return cmd_tune(o, out, err);
        if (*qm) return cmd_qmax(o, out, err);
        if (*pred) return cmd_predict(o, out, err);
        if (*sob) return cmd_sobol(o, out, err);
        if (*bench) return cmd_bench(o, out, err);
        report(err, "usage", "no subcommand", usage_error);
        return usage_error;
    } catch (const invalid_argument& e) {
        report(err, "invalid_argument", e.what(), usage_error);
        return usage_error;
    } catch (const io::io_error& e) {
        report(err, "io", e.what(), io_failure);
        return io_failure;
    } catch (const io::parse_error& e) {
        report(err, "parse", e.what(), parse_failure);
        return parse_failure;
    } catch (const numeric_failure& e) {
        report(err, "numeric_failure", e.what(), numeric_error, e.context());
        return numeric_error;
    } catch (const std::exception& e) {
        report(err, "internal", e.what(), internal_error);
        return internal_error;
    }
}

} // namespace rkhsmm::cli
