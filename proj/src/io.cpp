#include "sindex/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "sindex/error.hpp"

namespace sindex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(const std::string& name, std::size_t line) { return name + ":" + std::to_string(line); }

void strip_cr(std::string& s)
{
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = field.find_first_not_of(" \t");
        const auto e = field.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(const std::string& field, const std::string& name, std::size_t line, std::size_t column)
{
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != last)
        fail(ErrorCode::parse, where(name, line) + ": column " + std::to_string(column + 1) + ": cannot parse '" +
                                   field + "' as a number");
    if (!std::isfinite(v))
        fail(ErrorCode::domain, where(name, line) + ": column " + std::to_string(column + 1) +
                                    ": non-finite value '" + field + "'");
    return v;
}

void check_header(const std::vector<std::string>& fields, const std::string& name, std::size_t line)
{
    require(fields.size() >= 2, ErrorCode::parse, where(name, line) + ": header needs y and at least one x column");
    const auto expect = csv_schema(static_cast<Index>(fields.size() - 1));
    for (std::size_t c = 0; c < fields.size(); ++c)
        require(fields[c] == expect[c], ErrorCode::parse,
                where(name, line) + ": header column " + std::to_string(c + 1) + " is '" + fields[c] +
                    "', expected '" + expect[c] + "'");
}

// Accumulates rows; returns the batch once complete.
struct RowCollector {
    Index p = 0;
    std::vector<double> values;
    Index rows = 0;

    void add(const std::vector<std::string>& fields, const std::string& name, std::size_t line)
    {
        require(static_cast<Index>(fields.size()) == p + 1, ErrorCode::parse,
                where(name, line) + ": expected " + std::to_string(p + 1) + " fields, found " +
                    std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) values.push_back(parse_number(fields[c], name, line, c));
        ++rows;
    }

    Batch take()
    {
        Batch b;
        b.y.resize(rows);
        b.x.resize(rows, p);
        for (Index i = 0; i < rows; ++i) {
            const double* r = values.data() + i * (p + 1);
            b.y[i] = r[0];
            for (Index j = 0; j < p; ++j) b.x(i, j) = r[j + 1];
        }
        values.clear();
        rows = 0;
        return b;
    }
};

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vec(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

double json_number(const json& j)
{
    // Non-finite values are written as null.
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json spec_json(const ModelSpec& s)
{
    return {{"model", model_kind_name(s.model)}, {"p", s.p},     {"s0", s.s0},
            {"cov", s.cov_string()},             {"error", error_dist_name(s.error)}, {"seed", s.seed}};
}

ModelSpec spec_from_json(const json& j)
{
    ModelSpec s;
    const auto model = j.at("model").get<std::string>();
    require(model == "model1" || model == "model2", ErrorCode::parse, "manifest: unknown model '" + model + "'");
    s.model = model == "model1" ? ModelKind::model1 : ModelKind::model2;
    s.p = j.at("p").get<Index>();
    s.s0 = j.at("s0").get<Index>();
    s.parse_cov(j.at("cov").get<std::string>());
    s.error = parse_error_dist(j.at("error").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

template <class F>
auto with_json_errors(const std::string& what, F&& f)
{
    try {
        return f();
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, what + ": " + e.what());
    }
}

} // namespace

std::vector<std::string> csv_schema(Index p)
{
    std::vector<std::string> s{"y"};
    for (Index j = 1; j <= p; ++j) s.push_back("x" + std::to_string(j));
    return s;
}

std::optional<Batch> parse_csv_batch(std::istream& in, const std::string& name)
{
    std::string line;
    std::size_t lineno = 0;
    RowCollector rows;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (!header) {
            if (line.empty()) continue;
            const auto fields = split_fields(line);
            check_header(fields, name, lineno);
            rows.p = static_cast<Index>(fields.size() - 1);
            header = true;
            continue;
        }
        if (line.empty()) continue;
        rows.add(split_fields(line), name, lineno);
    }
    require(!in.bad(), ErrorCode::io, name + ": read error");
    if (!header) return std::nullopt;
    require(rows.rows > 0, ErrorCode::parse, name + ": header without data rows");
    return rows.take();
}

std::optional<Batch> read_csv_batch(const fs::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    return parse_csv_batch(in, path.string());
}

void write_csv_batch(const Batch& batch, const fs::path& path)
{
    batch.validate();
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    const auto schema = csv_schema(batch.p());
    for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema[c];
    out << '\n';
    char buf[32];
    auto put = [&](double v) {
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, r.ptr - buf);
    };
    for (Index i = 0; i < batch.n(); ++i) {
        put(batch.y[i]);
        for (Index j = 0; j < batch.p(); ++j) {
            out << ',';
            put(batch.x(i, j));
        }
        out << '\n';
    }
    out.flush();
    require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

namespace {

class DirectorySource final : public BatchSource {
public:
    explicit DirectorySource(const fs::path& dir)
    {
        require(fs::is_directory(dir), ErrorCode::io, dir.string() + " is not a directory");
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".csv") files_.push_back(e.path());
        std::sort(files_.begin(), files_.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    }

    std::optional<Batch> next() override
    {
        if (done_ || pos_ >= files_.size()) return std::nullopt;
        const fs::path& f = files_[pos_++];
        auto b = read_csv_batch(f);
        if (!b) {
            done_ = true;
            return std::nullopt;
        }
        if (p_ == 0) p_ = b->p();
        require(b->p() == p_, ErrorCode::parse,
                f.string() + ": schema has " + std::to_string(b->p()) + " covariates; the stream has " +
                    std::to_string(p_));
        b->index = ++count_;
        return b;
    }

private:
    std::vector<fs::path> files_;
    std::size_t pos_ = 0;
    Index p_ = 0;
    std::size_t count_ = 0;
    bool done_ = false;
};

class StreamSource final : public BatchSource {
public:
    StreamSource(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    std::optional<Batch> next() override
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            strip_cr(line);
            if (line.empty()) {
                if (rows_.rows > 0) return finish();
                continue;
            }
            const auto fields = split_fields(line);
            if (fields.front() == "y") {
                require(rows_.rows == 0, ErrorCode::parse, where(name_, line_) + ": header inside a batch");
                check_header(fields, name_, line_);
                const auto p = static_cast<Index>(fields.size() - 1);
                require(rows_.p == 0 || rows_.p == p, ErrorCode::parse,
                        where(name_, line_) + ": schema changed from " + std::to_string(rows_.p) + " to " +
                            std::to_string(p) + " covariates");
                rows_.p = p;
                continue;
            }
            require(rows_.p > 0, ErrorCode::parse, where(name_, line_) + ": data before the header");
            rows_.add(fields, name_, line_);
        }
        require(!in_.bad(), ErrorCode::io, name_ + ": read error");
        if (rows_.rows > 0) return finish();
        return std::nullopt;
    }

private:
    Batch finish()
    {
        Batch b = rows_.take();
        b.index = ++count_;
        return b;
    }

    std::istream& in_;
    std::string name_;
    std::size_t line_ = 0;
    RowCollector rows_;
    std::size_t count_ = 0;
};

} // namespace

std::unique_ptr<BatchSource> open_directory_source(const fs::path& dir) { return std::make_unique<DirectorySource>(dir); }

std::unique_ptr<BatchSource> open_stream_source(std::istream& in, std::string name)
{
    return std::make_unique<StreamSource>(in, std::move(name));
}

std::string report_to_json(const InferenceReport& r)
{
    json coords = json::array();
    const Index p = r.beta_da.size();
    for (Index l = 0; l < p; ++l) {
        coords.push_back({{"index", l + 1},
                          {"beta1", r.beta1[l]},
                          {"beta2", r.beta2[l]},
                          {"beta_ave", r.beta_ave[l]},
                          {"beta_d1", r.beta_d1[l]},
                          {"beta_d2", r.beta_d2[l]},
                          {"beta_da", r.beta_da[l]},
                          {"sigma", r.sigma[l]},
                          {"ci_lo", number_json(r.ci_lo[l])},
                          {"ci_hi", number_json(r.ci_hi[l])},
                          {"p_value", r.p_values[l]}});
    }
    json j = {{"step", r.step},
              {"n_total", r.n_total},
              {"alpha", r.alpha},
              {"per_coordinate", std::move(coords)},
              {"tunings",
               {{"lambda", r.tunings.lambda},
                {"gamma", r.tunings.gamma},
                {"h", r.tunings.h},
                {"kappa", r.tunings.kappa},
                {"tau", r.tunings.tau}}},
              {"ridge", {r.ridge1, r.ridge2}},
              {"degenerate", r.degenerate}};
    return j.dump();
}

InferenceReport report_from_json(const std::string& text)
{
    return with_json_errors("report", [&] {
        const json j = json::parse(text);
        InferenceReport r;
        r.step = j.at("step").get<std::uint64_t>();
        r.n_total = j.at("n_total").get<std::uint64_t>();
        r.alpha = j.at("alpha").get<double>();
        const auto& coords = j.at("per_coordinate");
        const auto p = static_cast<Index>(coords.size());
        for (Vector* v : {&r.beta1, &r.beta2, &r.beta_ave, &r.beta_d1, &r.beta_d2, &r.beta_da, &r.sigma, &r.ci_lo,
                          &r.ci_hi, &r.p_values})
            v->resize(p);
        for (Index l = 0; l < p; ++l) {
            const auto& c = coords[static_cast<std::size_t>(l)];
            require(c.at("index").get<Index>() == l + 1, ErrorCode::parse, "report: coordinates out of order");
            r.beta1[l] = c.at("beta1").get<double>();
            r.beta2[l] = c.at("beta2").get<double>();
            r.beta_ave[l] = c.at("beta_ave").get<double>();
            r.beta_d1[l] = c.at("beta_d1").get<double>();
            r.beta_d2[l] = c.at("beta_d2").get<double>();
            r.beta_da[l] = c.at("beta_da").get<double>();
            r.sigma[l] = c.at("sigma").get<double>();
            r.ci_lo[l] = json_number(c.at("ci_lo"));
            r.ci_hi[l] = json_number(c.at("ci_hi"));
            r.p_values[l] = c.at("p_value").get<double>();
        }
        const auto& t = j.at("tunings");
        r.tunings.lambda = t.at("lambda").get<double>();
        r.tunings.gamma = t.at("gamma").get<double>();
        r.tunings.h = t.at("h").get<double>();
        r.tunings.kappa = t.at("kappa").get<double>();
        r.tunings.tau = t.at("tau").get<double>();
        r.ridge1 = j.at("ridge").at(0).get<double>();
        r.ridge2 = j.at("ridge").at(1).get<double>();
        r.degenerate = j.at("degenerate").get<std::vector<std::size_t>>();
        return r;
    });
}

void write_report(const InferenceReport& report, const fs::path& path)
{
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    out << report_to_json(report) << '\n';
    out.flush();
    require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

InferenceReport read_report(const fs::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

RunLog::RunLog(const fs::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc), path_(path)
{
    require(out_.good(), ErrorCode::io, "cannot open run log " + path.string());
}

void RunLog::append(const InferenceReport& report)
{
    out_ << report_to_json(report) << '\n';
    out_.flush();
    require(out_.good(), ErrorCode::io, "write failed for " + path_.string());
}

std::vector<InferenceReport> read_run_log(const fs::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open run log " + path.string());
    std::vector<InferenceReport> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        try {
            out.push_back(report_from_json(line));
        } catch (const Error& e) {
            fail(e.code(), where(path.string(), lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_manifest(const Manifest& m, const fs::path& path)
{
    const json j = {{"spec", spec_json(m.spec)},
                    {"replication", m.replication},
                    {"m", m.m},
                    {"n_batch", m.n_batch},
                    {"beta0", vec_json(m.beta0)}};
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

Manifest read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open manifest " + path.string());
    return with_json_errors("manifest " + path.string(), [&] {
        const json j = json::parse(in);
        Manifest m;
        m.spec = spec_from_json(j.at("spec"));
        m.replication = j.at("replication").get<std::uint64_t>();
        m.m = j.at("m").get<Index>();
        m.n_batch = j.at("n_batch").get<Index>();
        m.beta0 = json_vec(j.at("beta0"));
        require(m.beta0.size() == m.spec.p, ErrorCode::dimension_mismatch, "manifest: beta0 length differs from p");
        return m;
    });
}

} // namespace sindex
