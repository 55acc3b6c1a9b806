#include "sindex/sindex.h"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "sindex/engine.hpp"
#include "sindex/error.hpp"
#include "sindex/io.hpp"
#include "sindex/parallel.hpp"
#include "sindex/simgen.hpp"
#include "sindex/state.hpp"

using namespace sindex;

struct sindex_config {
    EngineConfig engine;
};
struct sindex_engine {
    Engine engine;
};
struct sindex_batch {
    Batch batch;
};
struct sindex_report {
    InferenceReport report;
};
struct sindex_report_list {
    std::vector<sindex_report> reports;
};
struct sindex_source {
    std::unique_ptr<BatchSource> source;
};
struct sindex_simulator {
    Simulator sim;
};
struct sindex_manifest {
    Manifest manifest;
};
struct sindex_runlog {
    RunLog log;
};

namespace {

thread_local std::string last_error;

sindex_status record(sindex_status s, const std::string& what)
{
    last_error = what;
    return s;
}

template <class F>
sindex_status guard(F&& f) noexcept
{
    try {
        f();
        return SINDEX_OK;
    } catch (const Error& e) {
        return record(static_cast<sindex_status>(static_cast<int>(e.code())), e.what());
    } catch (const std::bad_alloc&) {
        return record(SINDEX_E_NOMEM, "out of memory");
    } catch (const std::exception& e) {
        return record(SINDEX_E_INTERNAL, e.what());
    } catch (...) {
        return record(SINDEX_E_INTERNAL, "unknown exception");
    }
}

void need(const void* p, const char* what)
{
    require(p != nullptr, ErrorCode::invalid_argument, std::string(what) + " is NULL");
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    require(!v.empty() && r.ec == std::errc() && r.ptr == v.data() + v.size(), ErrorCode::invalid_argument,
            "config " + key + ": '" + v + "' is not a number");
    return out;
}

long long to_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    require(!v.empty() && r.ec == std::errc() && r.ptr == v.data() + v.size(), ErrorCode::invalid_argument,
            "config " + key + ": '" + v + "' is not an integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorCode::invalid_argument, "config " + key + ": '" + v + "' is not a boolean");
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

void set_option(EngineConfig& c, const std::string& key, const std::string& v)
{
    if (key == "loss") {
        const LossKind k = parse_loss_kind(v);
        const double tau = c.loss.tau;
        c.loss = k == LossKind::huber ? LossSpec::huber(1.0) : LossSpec::logistic();
        // a fixed threshold survives switching the loss back and forth
        if (c.tau_mode == TauMode::fixed) c.loss.tau = tau;
    } else if (key == "tau") {
        if (v == "adaptive") {
            c.tau_mode = TauMode::adaptive;
        } else {
            const double tau = to_double(key, v);
            require(tau > 0.0 && std::isfinite(tau), ErrorCode::invalid_argument, "tau must be positive and finite");
            c.tau_mode = TauMode::fixed;
            c.loss.tau = tau;
        }
    } else if (key == "tau_coverage") {
        c.tau_coverage = to_double(key, v);
    } else if (key == "alpha") {
        c.alpha = to_double(key, v);
    } else if (key == "surrogate") {
        if (v == "gradient_corrected") c.surrogate = SurrogateForm::gradient_corrected;
        else if (v == "taylor") c.surrogate = SurrogateForm::taylor;
        else fail(ErrorCode::invalid_argument, "config surrogate: unknown form '" + v + "'");
    } else if (key == "infer_at") {
        if (v == "all") {
            c.infer_every_step = true;
            c.infer_at.clear();
        } else {
            c.infer_every_step = false;
            c.infer_at.clear();
            for (const auto& s : split(v, ',')) {
                const long long step = to_int(key, s);
                require(step >= 1, ErrorCode::invalid_argument, "config infer_at: steps start at 1");
                c.infer_at.push_back(static_cast<std::uint64_t>(step));
            }
        }
    } else if (key == "lambda_grid_size") {
        c.tuning.lambda_grid_size = static_cast<int>(to_int(key, v));
    } else if (key == "lambda_grid_ratio") {
        c.tuning.lambda_grid_ratio = to_double(key, v);
    } else if (key == "bic_c") {
        c.tuning.bic_c = to_double(key, v);
    } else if (key == "cv_folds") {
        c.tuning.cv_folds = static_cast<int>(to_int(key, v));
    } else if (key == "h_patience") {
        c.tuning.h_patience = static_cast<int>(to_int(key, v));
    } else if (key == "h_grid") {
        const auto parts = split(v, ':');
        if (parts.size() == 3) {
            c.tuning.h_grid = TuningConfig::log_grid(to_double(key, parts[0]), to_double(key, parts[1]),
                                                     static_cast<int>(to_int(key, parts[2])));
        } else {
            std::vector<double> g;
            for (const auto& s : split(v, ',')) g.push_back(to_double(key, s));
            c.tuning.h_grid = std::move(g);
        }
    } else if (key == "rolling_raw_scaling") {
        c.tuning.rolling_raw_scaling = to_bool(key, v);
    } else if (key == "lasso_kkt_tol") {
        c.lasso.kkt_tol = to_double(key, v);
    } else if (key == "lasso_max_iter") {
        c.lasso.max_iter = static_cast<int>(to_int(key, v));
    } else if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(to_int(key, v));
    } else {
        fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
    }
}

const Vector& field_of(const InferenceReport& r, sindex_field f)
{
    switch (f) {
    case SINDEX_FIELD_BETA1: return r.beta1;
    case SINDEX_FIELD_BETA2: return r.beta2;
    case SINDEX_FIELD_BETA_AVE: return r.beta_ave;
    case SINDEX_FIELD_BETA_D1: return r.beta_d1;
    case SINDEX_FIELD_BETA_D2: return r.beta_d2;
    case SINDEX_FIELD_BETA_DA: return r.beta_da;
    case SINDEX_FIELD_SIGMA: return r.sigma;
    case SINDEX_FIELD_CI_LO: return r.ci_lo;
    case SINDEX_FIELD_CI_HI: return r.ci_hi;
    case SINDEX_FIELD_P_VALUE: return r.p_values;
    }
    fail(ErrorCode::invalid_argument, "unknown report field");
}

void copy_out(const Vector& v, double* out, std::size_t len)
{
    need(out, "output buffer");
    require(len == static_cast<std::size_t>(v.size()), ErrorCode::dimension_mismatch,
            "buffer length " + std::to_string(len) + " differs from dimension " + std::to_string(v.size()));
    std::copy(v.data(), v.data() + v.size(), out);
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* sindex_version(void) { return "1.0.0"; }

const char* sindex_status_name(sindex_status status)
{
    if (status == SINDEX_OK) return "ok";
    if (status == SINDEX_E_NOMEM) return "out_of_memory";
    if (status >= SINDEX_E_INVALID_ARGUMENT && status <= SINDEX_E_INTERNAL)
        return error_code_name(static_cast<ErrorCode>(static_cast<int>(status)));
    return "unknown";
}

const char* sindex_last_error(void) { return last_error.c_str(); }

sindex_status sindex_set_log_level(const char* level)
{
    return guard([&] {
        need(level, "level");
        const auto l = spdlog::level::from_str(level);
        require(l != spdlog::level::off || std::strcmp(level, "off") == 0, ErrorCode::invalid_argument,
                std::string("unknown log level '") + level + "'");
        spdlog::set_level(l);
    });
}

unsigned sindex_thread_count(void) { return thread_count(); }

void sindex_string_free(char* s) { std::free(s); }

sindex_status sindex_config_new(sindex_config** out)
{
    return guard([&] {
        need(out, "out");
        *out = new sindex_config{};
    });
}

void sindex_config_free(sindex_config* cfg) { delete cfg; }

sindex_status sindex_config_set(sindex_config* cfg, const char* key, const char* value)
{
    return guard([&] {
        need(cfg, "config");
        need(key, "key");
        need(value, "value");
        EngineConfig next = cfg->engine;
        set_option(next, key, value);
        next.validate();
        cfg->engine = std::move(next);
    });
}

sindex_status sindex_config_load_json(sindex_config* cfg, const char* path)
{
    return guard([&] {
        need(cfg, "config");
        need(path, "path");
        std::ifstream in(path);
        require(in.good(), ErrorCode::io, std::string("cannot open config ") + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::parse, std::string(path) + ": " + e.what());
        }
        require(j.is_object(), ErrorCode::parse, std::string(path) + ": expected a JSON object");
        EngineConfig next = cfg->engine;
        for (const auto& [key, val] : j.items()) {
            std::string text;
            if (val.is_string()) {
                text = val.get<std::string>();
            } else if (val.is_array()) {
                for (const auto& e : val) text += (text.empty() ? "" : ",") + e.dump();
            } else {
                text = val.dump();
            }
            set_option(next, key, text);
        }
        next.validate();
        cfg->engine = std::move(next);
    });
}

sindex_status sindex_batch_new(const double* y, const double* x, size_t n, size_t p, sindex_batch** out)
{
    return guard([&] {
        need(out, "out");
        need(y, "y");
        need(x, "x");
        require(n > 0 && p > 0, ErrorCode::invalid_argument, "batch needs n > 0 and p > 0");
        Batch b;
        b.y = Eigen::Map<const Vector>(y, static_cast<Index>(n));
        b.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            x, static_cast<Index>(n), static_cast<Index>(p));
        b.validate();
        *out = new sindex_batch{std::move(b)};
    });
}

void sindex_batch_free(sindex_batch* batch) { delete batch; }
size_t sindex_batch_rows(const sindex_batch* batch) { return batch ? static_cast<size_t>(batch->batch.n()) : 0; }
size_t sindex_batch_cols(const sindex_batch* batch) { return batch ? static_cast<size_t>(batch->batch.p()) : 0; }

sindex_status sindex_batch_read_csv(const char* path, sindex_batch** out)
{
    return guard([&] {
        need(path, "path");
        need(out, "out");
        auto b = read_csv_batch(path);
        *out = b ? new sindex_batch{std::move(*b)} : nullptr;
    });
}

sindex_status sindex_batch_write_csv(const sindex_batch* batch, const char* path)
{
    return guard([&] {
        need(batch, "batch");
        need(path, "path");
        write_csv_batch(batch->batch, path);
    });
}

sindex_status sindex_source_open_dir(const char* dir, sindex_source** out)
{
    return guard([&] {
        need(dir, "dir");
        need(out, "out");
        *out = new sindex_source{open_directory_source(dir)};
    });
}

sindex_status sindex_source_open_stdin(sindex_source** out)
{
    return guard([&] {
        need(out, "out");
        *out = new sindex_source{open_stream_source(std::cin)};
    });
}

sindex_status sindex_source_next(sindex_source* src, sindex_batch** out)
{
    return guard([&] {
        need(src, "source");
        need(out, "out");
        *out = nullptr;
        auto b = src->source->next();
        if (b) *out = new sindex_batch{std::move(*b)};
    });
}

void sindex_source_free(sindex_source* src) { delete src; }

sindex_status sindex_engine_new(const sindex_config* cfg, sindex_engine** out)
{
    return guard([&] {
        need(cfg, "config");
        need(out, "out");
        *out = new sindex_engine{Engine(cfg->engine)};
    });
}

sindex_status sindex_engine_resume(const sindex_config* cfg, const char* state_path, sindex_engine** out)
{
    return guard([&] {
        need(cfg, "config");
        need(state_path, "state_path");
        need(out, "out");
        *out = new sindex_engine{Engine(cfg->engine, load_state(state_path))};
    });
}

void sindex_engine_free(sindex_engine* engine) { delete engine; }

sindex_status sindex_engine_ingest(sindex_engine* engine, const sindex_batch* batch, sindex_report** report)
{
    if (report) *report = nullptr;
    return guard([&] {
        need(engine, "engine");
        need(batch, "batch");
        auto r = engine->engine.ingest(batch->batch);
        if (r && report) *report = new sindex_report{std::move(*r)};
    });
}

sindex_status sindex_engine_infer(sindex_engine* engine, sindex_report** out)
{
    return guard([&] {
        need(engine, "engine");
        need(out, "out");
        *out = new sindex_report{engine->engine.infer()};
    });
}

sindex_status sindex_engine_save_state(const sindex_engine* engine, const char* path)
{
    return guard([&] {
        need(engine, "engine");
        need(path, "path");
        save_state(engine->engine.state(), path);
    });
}

uint64_t sindex_engine_step(const sindex_engine* engine) { return engine ? engine->engine.state().step : 0; }
size_t sindex_engine_dim(const sindex_engine* engine)
{
    return engine ? static_cast<size_t>(engine->engine.state().p) : 0;
}
size_t sindex_engine_state_bytes(const sindex_engine* engine)
{
    return engine ? engine->engine.state().footprint_bytes() : 0;
}

void sindex_report_free(sindex_report* report) { delete report; }
uint64_t sindex_report_step(const sindex_report* r) { return r ? r->report.step : 0; }
uint64_t sindex_report_n_total(const sindex_report* r) { return r ? r->report.n_total : 0; }
double sindex_report_alpha(const sindex_report* r) { return r ? r->report.alpha : 0.0; }
size_t sindex_report_dim(const sindex_report* r) { return r ? static_cast<size_t>(r->report.beta_da.size()) : 0; }

sindex_status sindex_report_get(const sindex_report* report, sindex_field field, double* out, size_t len)
{
    return guard([&] {
        need(report, "report");
        copy_out(field_of(report->report, field), out, len);
    });
}

void sindex_report_tunings(const sindex_report* report, double out[SINDEX_TUNE_COUNT])
{
    if (!report || !out) return;
    const Tunings& t = report->report.tunings;
    out[SINDEX_TUNE_LAMBDA] = t.lambda;
    out[SINDEX_TUNE_GAMMA] = t.gamma;
    out[SINDEX_TUNE_H] = t.h;
    out[SINDEX_TUNE_KAPPA] = t.kappa;
    out[SINDEX_TUNE_TAU] = t.tau;
}

sindex_status sindex_report_to_json(const sindex_report* report, char** out)
{
    return guard([&] {
        need(report, "report");
        need(out, "out");
        *out = dup_string(report_to_json(report->report));
    });
}

sindex_status sindex_report_from_json(const char* json, sindex_report** out)
{
    return guard([&] {
        need(json, "json");
        need(out, "out");
        *out = new sindex_report{report_from_json(json)};
    });
}

sindex_status sindex_report_write(const sindex_report* report, const char* path)
{
    return guard([&] {
        need(report, "report");
        need(path, "path");
        write_report(report->report, path);
    });
}

sindex_status sindex_runlog_open(const char* path, int append, sindex_runlog** out)
{
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new sindex_runlog{RunLog(path, append != 0)};
    });
}

sindex_status sindex_runlog_append(sindex_runlog* log, const sindex_report* report)
{
    return guard([&] {
        need(log, "log");
        need(report, "report");
        log->log.append(report->report);
    });
}

void sindex_runlog_free(sindex_runlog* log) { delete log; }

sindex_status sindex_runlog_read(const char* path, sindex_report_list** out)
{
    return guard([&] {
        need(path, "path");
        need(out, "out");
        auto list = std::make_unique<sindex_report_list>();
        for (auto& r : read_run_log(path)) list->reports.push_back(sindex_report{std::move(r)});
        *out = list.release();
    });
}

size_t sindex_report_list_size(const sindex_report_list* list) { return list ? list->reports.size() : 0; }

const sindex_report* sindex_report_list_at(const sindex_report_list* list, size_t i)
{
    return list && i < list->reports.size() ? &list->reports[i] : nullptr;
}

void sindex_report_list_free(sindex_report_list* list) { delete list; }

sindex_status sindex_simulator_new(int model, const char* error, const char* cov, size_t p, size_t s0, uint64_t seed,
                                   sindex_simulator** out)
{
    return guard([&] {
        need(out, "out");
        require(model == 1 || model == 2, ErrorCode::invalid_argument, "model must be 1 or 2");
        ModelSpec spec;
        spec.model = model == 1 ? ModelKind::model1 : ModelKind::model2;
        if (error) spec.error = parse_error_dist(error);
        if (cov) spec.parse_cov(cov);
        spec.p = static_cast<Index>(p);
        spec.s0 = static_cast<Index>(s0);
        spec.seed = seed;
        *out = new sindex_simulator{Simulator(spec)};
    });
}

void sindex_simulator_free(sindex_simulator* sim) { delete sim; }

sindex_status sindex_simulator_generate(const sindex_simulator* sim, size_t n, uint64_t replication,
                                        uint64_t batch_index, sindex_batch** out)
{
    return guard([&] {
        need(sim, "simulator");
        need(out, "out");
        Batch b = sim->sim.gen_batch(static_cast<Index>(n), replication, batch_index);
        b.index = batch_index;
        *out = new sindex_batch{std::move(b)};
    });
}

sindex_status sindex_simulator_beta0(const sindex_simulator* sim, double* out, size_t len)
{
    return guard([&] {
        need(sim, "simulator");
        copy_out(sim->sim.beta0(), out, len);
    });
}

sindex_status sindex_simulator_write_manifest(const sindex_simulator* sim, uint64_t replication, size_t m,
                                              size_t n_batch, const char* path)
{
    return guard([&] {
        need(sim, "simulator");
        need(path, "path");
        Manifest man{sim->sim.spec(), replication, static_cast<Index>(m), static_cast<Index>(n_batch),
                     sim->sim.beta0()};
        write_manifest(man, path);
    });
}

sindex_status sindex_manifest_read(const char* path, sindex_manifest** out)
{
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new sindex_manifest{read_manifest(path)};
    });
}

void sindex_manifest_free(sindex_manifest* manifest) { delete manifest; }
size_t sindex_manifest_dim(const sindex_manifest* m) { return m ? static_cast<size_t>(m->manifest.spec.p) : 0; }
size_t sindex_manifest_s0(const sindex_manifest* m) { return m ? static_cast<size_t>(m->manifest.spec.s0) : 0; }
size_t sindex_manifest_batches(const sindex_manifest* m) { return m ? static_cast<size_t>(m->manifest.m) : 0; }

sindex_status sindex_manifest_beta0(const sindex_manifest* manifest, double* out, size_t len)
{
    return guard([&] {
        need(manifest, "manifest");
        copy_out(manifest->manifest.beta0, out, len);
    });
}

sindex_status sindex_sine_distance(const double* a, const double* b, size_t p, double* out)
{
    return guard([&] {
        need(a, "a");
        need(b, "b");
        need(out, "out");
        const auto n = static_cast<Index>(p);
        *out = sine_distance(Eigen::Map<const Vector>(a, n), Eigen::Map<const Vector>(b, n));
    });
}

sindex_status sindex_fpr_tpr(const sindex_report* const* reports, size_t count, size_t s0, double alpha, double* fpr,
                             double* tpr)
{
    return guard([&] {
        need(reports, "reports");
        need(fpr, "fpr");
        need(tpr, "tpr");
        std::vector<InferenceReport> copies;
        copies.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            need(reports[i], "report");
            copies.push_back(reports[i]->report);
        }
        const RejectionRates r = fpr_tpr(copies, static_cast<Index>(s0), alpha);
        *fpr = r.fpr;
        std::copy(r.tpr.data(), r.tpr.data() + r.tpr.size(), tpr);
    });
}

} // extern "C"
