// Command-line front end. Talks to the engine only through the C interface.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sindex/sindex.h"

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(sindex_status s, const std::string& context)
{
    if (s != SINDEX_OK)
        throw CliError(context + ": " + sindex_status_name(s) + ": " + sindex_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<sindex_config, Deleter<sindex_config, sindex_config_free>>;
using EnginePtr = std::unique_ptr<sindex_engine, Deleter<sindex_engine, sindex_engine_free>>;
using BatchPtr = std::unique_ptr<sindex_batch, Deleter<sindex_batch, sindex_batch_free>>;
using ReportPtr = std::unique_ptr<sindex_report, Deleter<sindex_report, sindex_report_free>>;
using ListPtr = std::unique_ptr<sindex_report_list, Deleter<sindex_report_list, sindex_report_list_free>>;
using SourcePtr = std::unique_ptr<sindex_source, Deleter<sindex_source, sindex_source_free>>;
using SimPtr = std::unique_ptr<sindex_simulator, Deleter<sindex_simulator, sindex_simulator_free>>;
using ManifestPtr = std::unique_ptr<sindex_manifest, Deleter<sindex_manifest, sindex_manifest_free>>;
using LogPtr = std::unique_ptr<sindex_runlog, Deleter<sindex_runlog, sindex_runlog_free>>;

struct ModelOptions {
    int model = 1;
    std::string error = "gaussian";
    std::string cov; // empty: toeplitz:0.5 for model 1, identity for model 2
    std::size_t n_batch = 100;
    std::size_t m = 16;
    std::size_t p = 200;
    std::size_t s0 = 5;
    std::uint64_t seed = 0;

    std::string cov_or_default() const { return !cov.empty() ? cov : model == 1 ? "toeplitz:0.5" : "identity"; }
};

struct FitOptions {
    std::string config_file;
    std::string loss; // empty: huber, or logistic for simulated model 2
    std::string tau;
    std::string surrogate;
    std::string infer_at;
    std::optional<double> alpha;
    std::vector<std::string> extra; // key=value pairs
};

void add_model_flags(CLI::App* app, ModelOptions& o)
{
    app->add_option("--model", o.model, "Simulation model")->check(CLI::IsMember({1, 2}));
    app->add_option("--error", o.error, "Model 1 error distribution")
        ->check(CLI::IsMember({"gaussian", "lognormal", "t3", "weibull"}));
    app->add_option("--cov", o.cov, "identity or toeplitz:RHO (default toeplitz:0.5 for model 1, identity for 2)");
    app->add_option("--n-batch", o.n_batch, "Rows per batch")->check(CLI::PositiveNumber);
    app->add_option("--m", o.m, "Number of batches")->check(CLI::PositiveNumber);
    app->add_option("--p", o.p, "Covariate dimension")->check(CLI::PositiveNumber);
    app->add_option("--s0", o.s0, "Number of nonzero coefficients")->check(CLI::PositiveNumber);
    app->add_option("--seed", o.seed, "Generator seed");
}

void add_fit_flags(CLI::App* app, FitOptions& o)
{
    app->add_option("--config", o.config_file, "JSON object of engine settings; flags override it");
    app->add_option("--loss", o.loss, "Loss function")->check(CLI::IsMember({"huber", "logistic"}));
    app->add_option("--tau", o.tau, "Huber threshold: adaptive or a positive number");
    app->add_option("--alpha", o.alpha, "Significance level");
    app->add_option("--surrogate", o.surrogate, "Online objective form")
        ->check(CLI::IsMember({"gradient_corrected", "taylor"}));
    app->add_option("--infer-at", o.infer_at, "Comma separated steps with inference, or all");
    app->add_option("--set", o.extra, "Extra engine setting KEY=VALUE (repeatable)");
}

ConfigPtr make_config(const FitOptions& o, const std::string& default_loss)
{
    sindex_config* raw = nullptr;
    check(sindex_config_new(&raw), "config");
    ConfigPtr cfg(raw);
    if (!o.config_file.empty()) check(sindex_config_load_json(cfg.get(), o.config_file.c_str()), "--config");
    auto set = [&](const char* key, const std::string& v) {
        check(sindex_config_set(cfg.get(), key, v.c_str()), std::string("setting ") + key);
    };
    const std::string loss = !o.loss.empty() ? o.loss : default_loss;
    if (!loss.empty()) set("loss", loss);
    if (!o.tau.empty()) set("tau", o.tau);
    if (o.alpha) set("alpha", std::to_string(*o.alpha));
    if (!o.surrogate.empty()) set("surrogate", o.surrogate);
    if (!o.infer_at.empty()) set("infer_at", o.infer_at);
    for (const auto& kv : o.extra) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CliError("--set expects KEY=VALUE, got '" + kv + "'");
        set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    return cfg;
}

void prepare_output_dir(const fs::path& dir, bool force)
{
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw CliError(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir)) {
            if (!force) throw CliError("output directory " + dir.string() + " is not empty (use --force)");
            for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
        }
    }
    fs::create_directories(dir);
}

std::string batch_file_name(std::size_t s)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "batch_%05zu.csv", s);
    return buf;
}

std::string report_file_name(std::uint64_t step)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "report_step_%05" PRIu64 ".json", step);
    return buf;
}

SimPtr make_simulator(const ModelOptions& o)
{
    sindex_simulator* raw = nullptr;
    check(sindex_simulator_new(o.model, o.error.c_str(), o.cov_or_default().c_str(), o.p, o.s0, o.seed, &raw),
          "simulator");
    return SimPtr(raw);
}

int cmd_simulate(const ModelOptions& o, std::uint64_t replication, const fs::path& out, bool force)
{
    SimPtr sim = make_simulator(o);
    prepare_output_dir(out, force);
    for (std::size_t s = 1; s <= o.m; ++s) {
        sindex_batch* raw = nullptr;
        check(sindex_simulator_generate(sim.get(), o.n_batch, replication, s, &raw), "generate");
        BatchPtr b(raw);
        check(sindex_batch_write_csv(b.get(), (out / batch_file_name(s)).c_str()), "write batch");
    }
    check(sindex_simulator_write_manifest(sim.get(), replication, o.m, o.n_batch, (out / "manifest.json").c_str()),
          "manifest");
    return 0;
}

struct FitRun {
    std::string input;
    fs::path out;
    bool force = false;
    std::string resume;
    std::string save_state;
    long skip = -1; // -1: the resumed step count for directories, 0 for stdin
    bool write_reports = true;
};

int cmd_fit(const FitOptions& fo, const FitRun& run)
{
    const bool from_stdin = run.input == "-";
    if (!from_stdin && !fs::is_directory(run.input))
        throw CliError("input " + run.input + " is not a directory (use - for standard input)");

    ConfigPtr cfg = make_config(fo, "");
    sindex_engine* eraw = nullptr;
    if (run.resume.empty())
        check(sindex_engine_new(cfg.get(), &eraw), "engine");
    else
        check(sindex_engine_resume(cfg.get(), run.resume.c_str(), &eraw), "--resume " + run.resume);
    EnginePtr engine(eraw);

    const bool resuming = !run.resume.empty();
    if (!resuming) prepare_output_dir(run.out, run.force);
    else fs::create_directories(run.out);
    if (!from_stdin && fs::exists(fs::path(run.input) / "manifest.json"))
        fs::copy_file(fs::path(run.input) / "manifest.json", run.out / "manifest.json",
                      fs::copy_options::overwrite_existing);

    sindex_runlog* lraw = nullptr;
    check(sindex_runlog_open((run.out / "run.jsonl").c_str(), resuming ? 1 : 0, &lraw), "run log");
    LogPtr log(lraw);

    sindex_source* sraw = nullptr;
    if (from_stdin) check(sindex_source_open_stdin(&sraw), "stdin");
    else check(sindex_source_open_dir(run.input.c_str(), &sraw), "input");
    SourcePtr source(sraw);

    const std::uint64_t skip =
        run.skip >= 0 ? static_cast<std::uint64_t>(run.skip) : from_stdin ? 0 : sindex_engine_step(engine.get());

    auto save = [&] {
        if (!run.save_state.empty() && sindex_engine_step(engine.get()) > 0)
            check(sindex_engine_save_state(engine.get(), run.save_state.c_str()), "save state");
    };

    std::uint64_t seen = 0;
    try {
        for (;;) {
            sindex_batch* braw = nullptr;
            check(sindex_source_next(source.get(), &braw), "read batch");
            if (!braw) break;
            BatchPtr batch(braw);
            if (++seen <= skip) continue;
            sindex_report* rraw = nullptr;
            check(sindex_engine_ingest(engine.get(), batch.get(), &rraw),
                  "step " + std::to_string(sindex_engine_step(engine.get()) + 1));
            ReportPtr report(rraw);
            if (report) {
                check(sindex_runlog_append(log.get(), report.get()), "run log");
                if (run.write_reports)
                    check(sindex_report_write(report.get(),
                                              (run.out / report_file_name(sindex_report_step(report.get()))).c_str()),
                          "report");
            }
        }
    } catch (...) {
        // The engine still holds the last successful step.
        try {
            save();
        } catch (const CliError& e) {
            std::fprintf(stderr, "sindex: %s\n", e.what());
        }
        throw;
    }
    if (sindex_engine_step(engine.get()) == 0) throw CliError("input stream contained no batches");
    save();
    return 0;
}

struct Checkpoint {
    std::size_t runs = 0;
    std::size_t collapsed = 0; // runs whose averaged estimate is zero
    std::size_t sine_da_runs = 0;
    double sine_ave = 0.0;
    double sine_da = 0.0;
    std::vector<const sindex_report*> reports;
};

std::vector<double> report_field(const sindex_report* r, sindex_field f)
{
    std::vector<double> v(sindex_report_dim(r));
    check(sindex_report_get(r, f, v.data(), v.size()), "report field");
    return v;
}

// Empty for a zero estimate, which counts as a failed replication of the metric.
std::optional<double> sine(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    const sindex_status s = sindex_sine_distance(a.data(), b.data(), a.size(), &d);
    if (s == SINDEX_E_DOMAIN) return std::nullopt;
    check(s, "sine distance");
    return d;
}

// Aggregates run directories (each with manifest.json and run.jsonl) into one CSV row per step.
void write_metrics(const std::vector<fs::path>& runs, double alpha, std::ostream& out)
{
    if (runs.empty()) throw CliError("no runs to summarize");
    std::vector<ListPtr> lists;
    std::map<std::uint64_t, Checkpoint> steps;
    std::size_t s0 = 0;
    for (const auto& dir : runs) {
        const fs::path mpath = dir / "manifest.json";
        if (!fs::exists(mpath)) throw CliError("missing manifest " + mpath.string() + " (truth is required)");
        sindex_manifest* mraw = nullptr;
        check(sindex_manifest_read(mpath.c_str(), &mraw), "manifest");
        ManifestPtr man(mraw);
        const std::size_t p = sindex_manifest_dim(man.get());
        if (s0 == 0) s0 = sindex_manifest_s0(man.get());
        else if (s0 != sindex_manifest_s0(man.get())) throw CliError(mpath.string() + ": s0 differs between runs");
        std::vector<double> beta0(p);
        check(sindex_manifest_beta0(man.get(), beta0.data(), p), "manifest");

        sindex_report_list* lraw = nullptr;
        check(sindex_runlog_read((dir / "run.jsonl").c_str(), &lraw), "run log");
        lists.emplace_back(lraw);
        const sindex_report_list* list = lists.back().get();
        for (std::size_t i = 0; i < sindex_report_list_size(list); ++i) {
            const sindex_report* r = sindex_report_list_at(list, i);
            if (sindex_report_dim(r) != p)
                throw CliError((dir / "run.jsonl").string() + ": report has p=" +
                               std::to_string(sindex_report_dim(r)) + " but the manifest has p=" + std::to_string(p));
            Checkpoint& c = steps[sindex_report_step(r)];
            ++c.runs;
            if (const auto d = sine(report_field(r, SINDEX_FIELD_BETA_AVE), beta0))
                c.sine_ave += *d;
            else
                ++c.collapsed;
            if (const auto d = sine(report_field(r, SINDEX_FIELD_BETA_DA), beta0)) {
                c.sine_da += *d;
                ++c.sine_da_runs;
            }
            c.reports.push_back(r);
        }
    }
    out << "step,replications,collapsed,sine_distance_ave,sine_distance_debiased,fpr";
    for (std::size_t l = 1; l <= s0; ++l) out << ",tpr" << l;
    out << '\n';
    out.precision(6);
    for (auto& [step, c] : steps) {
        double fpr = 0.0;
        std::vector<double> tpr(s0);
        check(sindex_fpr_tpr(c.reports.data(), c.reports.size(), s0, alpha, &fpr, tpr.data()), "rates");
        const auto mean = [](double sum, std::size_t n) {
            return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
        };
        out << step << ',' << c.runs << ',' << c.collapsed << ',' << mean(c.sine_ave, c.runs - c.collapsed) << ','
            << mean(c.sine_da, c.sine_da_runs) << ',' << fpr;
        for (double t : tpr) out << ',' << t;
        out << '\n';
    }
}

// Simulates and fits `reps` independent replications in parallel, one subdirectory each.
std::vector<fs::path> run_replications(const ModelOptions& mo, const FitOptions& fo, std::size_t reps,
                                       const fs::path& out, bool force)
{
    prepare_output_dir(out, force);
    std::vector<fs::path> dirs(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "rep_%05zu", r);
        dirs[r] = out / name;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::string first_error;
    auto worker = [&] {
        for (std::size_t r; (r = next++) < reps;) {
            try {
                const fs::path data = out / ("data_" + dirs[r].filename().string());
                cmd_simulate(mo, r, data, false);
                FitRun run;
                run.input = data.string();
                run.out = dirs[r];
                run.force = true;
                run.write_reports = false;
                cmd_fit(fo, run);
                fs::remove_all(data);
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mutex);
                if (first_error.empty()) first_error = "replication " + std::to_string(r) + ": " + e.what();
                next = reps;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(sindex_thread_count(), static_cast<unsigned>(reps)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw CliError(first_error);
    return dirs;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Streaming Lasso estimation and debiased inference for single-index models"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    ModelOptions sim_opts;
    std::uint64_t sim_rep = 0;
    std::string sim_out;
    bool sim_force = false;
    auto* simulate = app.add_subcommand("simulate", "Write a simulated stream as CSV batches plus a manifest");
    add_model_flags(simulate, sim_opts);
    simulate->add_option("--replication", sim_rep, "Replication counter of the generator");
    simulate->add_option("--out", sim_out, "Output directory")->required();
    simulate->add_flag("--force", sim_force, "Replace a non-empty output directory");

    FitOptions fit_opts;
    FitRun fit_run;
    auto* fit = app.add_subcommand("fit", "Run online estimation and inference over a batch stream");
    fit->add_option("--input", fit_run.input, "Directory of CSV batches, or - for standard input")->required();
    add_fit_flags(fit, fit_opts);
    fit->add_option("--resume", fit_run.resume, "State file to continue from");
    fit->add_option("--save-state", fit_run.save_state, "Write the final (or last good) state here");
    fit->add_option("--skip", fit_run.skip,
                    "Batches to skip before ingesting (default: the resumed step for directories, 0 for stdin)");
    std::string fit_out;
    fit->add_option("--out", fit_out, "Output directory for reports and the run log")->required();
    fit->add_flag("--force", fit_run.force, "Replace a non-empty output directory");

    std::vector<std::string> metric_runs;
    double metric_alpha = 0.05;
    std::string metric_csv;
    std::size_t metric_reps = 0;
    std::string metric_dir;
    bool metric_force = false;
    ModelOptions metric_model;
    FitOptions metric_fit;
    auto* metrics = app.add_subcommand(
        "metrics", "Summarize run directories, or simulate and fit --replications runs first, as a CSV table");
    metrics->add_option("--runs", metric_runs, "Run directories holding manifest.json and run.jsonl");
    metrics->add_option("--replications", metric_reps, "Simulate and fit this many replications in parallel");
    metrics->add_option("--work-dir", metric_dir, "Where replication runs are written");
    metrics->add_flag("--force", metric_force, "Replace a non-empty work directory");
    metrics->add_option("--csv", metric_csv, "Write the table here instead of standard output");
    add_model_flags(metrics, metric_model);
    add_fit_flags(metrics, metric_fit);
    metrics->callback([&] { metric_alpha = metric_fit.alpha.value_or(0.05); });

    CLI11_PARSE(app, argc, argv);

    try {
        check(sindex_set_log_level(log_level.c_str()), "--log-level");
        if (*simulate) return cmd_simulate(sim_opts, sim_rep, sim_out, sim_force);
        if (*fit) {
            fit_run.out = fit_out;
            return cmd_fit(fit_opts, fit_run);
        }
        std::vector<fs::path> runs(metric_runs.begin(), metric_runs.end());
        if (metric_reps > 0) {
            if (!runs.empty()) throw CliError("--runs and --replications are exclusive");
            if (metric_dir.empty()) throw CliError("--replications needs --work-dir");
            if (metric_fit.loss.empty()) metric_fit.loss = metric_model.model == 2 ? "logistic" : "huber";
            runs = run_replications(metric_model, metric_fit, metric_reps, metric_dir, metric_force);
        }
        if (metric_csv.empty()) {
            write_metrics(runs, metric_alpha, std::cout);
        } else {
            std::ofstream out(metric_csv);
            if (!out) throw CliError("cannot write " + metric_csv);
            write_metrics(runs, metric_alpha, out);
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sindex: %s\n", e.what());
        return 1;
    }
}
