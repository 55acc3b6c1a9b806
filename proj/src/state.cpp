#include "sindex/state.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "sindex/error.hpp"

namespace sindex {

static_assert(std::endian::native == std::endian::little, "state files assume a little-endian host");

namespace {

constexpr std::array<char, 8> magic = {'S', 'I', 'D', 'X', 'S', 'T', 'A', 'T'};

void check_psd(const Matrix& m, const char* name)
{
    require(m.allFinite(), ErrorCode::invariant_violation, std::string(name) + " has non-finite entries");
    require(m == m.transpose(), ErrorCode::invariant_violation, std::string(name) + " is not symmetric");
    if (m.size() == 0) return;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    require(es.eigenvalues().minCoeff() >= -1e-9 * top, ErrorCode::invariant_violation,
            std::string(name) + " is not positive semidefinite");
}

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc)
    {
        require(out_.good(), ErrorCode::io, "cannot open state file for writing: " + path);
    }
    template <class T>
    void put(const T& v)
    {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void put(const double* data, std::size_t n)
    {
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    }
    void finish()
    {
        out_.flush();
        require(out_.good(), ErrorCode::io, "failed writing state file: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary)
    {
        require(in_.good(), ErrorCode::io, "cannot open state file: " + path);
    }
    template <class T>
    T get()
    {
        T v;
        read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }
    void get(double* data, std::size_t n) { read(reinterpret_cast<char*>(data), n * sizeof(double)); }
    void expect_end()
    {
        in_.peek();
        require(in_.eof(), ErrorCode::parse, "trailing bytes in state file: " + path_);
    }

private:
    void read(char* dst, std::size_t n)
    {
        in_.read(dst, static_cast<std::streamsize>(n));
        require(static_cast<std::size_t>(in_.gcount()) == n, ErrorCode::parse, "truncated state file: " + path_);
    }
    std::string path_;
    std::ifstream in_;
};

} // namespace

void StreamState::validate() const
{
    require(step >= 1, ErrorCode::state, "state must contain at least one batch");
    require(p >= 1, ErrorCode::invariant_violation, "state dimension must be positive");
    const auto vec_ok = [this](const Vector& v) { return v.size() == p && v.allFinite(); };
    const auto mat_ok = [this](const Matrix& m) { return m.rows() == p && m.cols() == p; };
    require(vec_ok(beta1) && vec_ok(beta2) && vec_ok(q1) && vec_ok(q2), ErrorCode::invariant_violation,
            "state vectors must have length p and finite entries");
    require(mat_ok(hsum1) && mat_ok(hsum2) && mat_ok(tsum) && mat_ok(batch_h1) && mat_ok(batch_h2),
            ErrorCode::invariant_violation, "state matrices must be p x p");
    require(total_count >= step && batch_count >= 1 && batch_count <= total_count, ErrorCode::invariant_violation,
            "state counters are inconsistent");
    check_psd(hsum1, "hsum1");
    check_psd(hsum2, "hsum2");
    check_psd(tsum, "tsum");
    check_psd(batch_h1, "batch_h1");
    check_psd(batch_h2, "batch_h2");
    loss.validate();
}

std::size_t StreamState::footprint_bytes() const
{
    const auto d = sizeof(double);
    const auto vecs = static_cast<std::size_t>(beta1.size() + beta2.size() + q1.size() + q2.size());
    const auto mats = static_cast<std::size_t>(hsum1.size() + hsum2.size() + tsum.size() + batch_h1.size() +
                                               batch_h2.size());
    return sizeof(StreamState) + d * (vecs + mats);
}

void save_state(const StreamState& state, const std::string& path)
{
    state.validate();
    Writer w(path);
    w.put(magic);
    w.put(state_format_version);
    w.put(static_cast<std::uint32_t>(state.loss.kind));
    w.put(state.loss.tau);
    w.put(static_cast<std::uint64_t>(state.p));
    w.put(state.step);
    w.put(state.total_count);
    w.put(state.batch_count);
    const std::array<double, 5> tun = {state.tunings.lambda, state.tunings.gamma, state.tunings.h,
                                       state.tunings.kappa, state.tunings.tau};
    w.put(tun);
    w.put(state.hist_const1);
    w.put(state.hist_const2);
    for (const Vector* v : {&state.beta1, &state.beta2, &state.q1, &state.q2})
        w.put(v->data(), static_cast<std::size_t>(v->size()));
    for (const Matrix* m : {&state.hsum1, &state.hsum2, &state.tsum, &state.batch_h1, &state.batch_h2})
        w.put(m->data(), static_cast<std::size_t>(m->size()));
    w.finish();
}

StreamState load_state(const std::string& path)
{
    Reader r(path);
    const auto mg = r.get<std::array<char, 8>>();
    require(mg == magic, ErrorCode::parse, "not a state file (bad magic): " + path);
    const auto version = r.get<std::uint32_t>();
    require(version == state_format_version, ErrorCode::version_mismatch,
            "state file version " + std::to_string(version) + " does not match supported version " +
                std::to_string(state_format_version));
    StreamState s;
    const auto kind = r.get<std::uint32_t>();
    require(kind <= 1, ErrorCode::parse, "state file has an unknown loss kind");
    s.loss.kind = static_cast<LossKind>(kind);
    s.loss.tau = r.get<double>();
    const auto p = r.get<std::uint64_t>();
    require(p >= 1 && p <= (1u << 20), ErrorCode::parse, "state file has an implausible dimension");
    s.p = static_cast<Index>(p);
    const std::uintmax_t expected = 8 + 4 + 4 + 8 + 4 * 8 + 7 * 8 + (4 * p + 5 * p * p) * 8;
    std::error_code ec;
    const std::uintmax_t actual = std::filesystem::file_size(path, ec);
    require(!ec, ErrorCode::io, "cannot stat state file: " + path);
    require(actual >= expected, ErrorCode::parse,
            "truncated state file: " + std::to_string(actual) + " bytes, header dimension p=" + std::to_string(p) +
                " needs " + std::to_string(expected));
    require(actual == expected, ErrorCode::dimension_mismatch,
            "state file size " + std::to_string(actual) + " does not match header dimension p=" + std::to_string(p) +
                " (expected " + std::to_string(expected) + " bytes)");
    s.step = r.get<std::uint64_t>();
    s.total_count = r.get<std::uint64_t>();
    s.batch_count = r.get<std::uint64_t>();
    require(s.step >= 1, ErrorCode::state, "state must contain at least one batch");
    const auto tun = r.get<std::array<double, 5>>();
    s.tunings = {tun[0], tun[1], tun[2], tun[3], tun[4]};
    s.hist_const1 = r.get<double>();
    s.hist_const2 = r.get<double>();
    for (Vector* v : {&s.beta1, &s.beta2, &s.q1, &s.q2}) {
        v->resize(s.p);
        r.get(v->data(), p);
    }
    for (Matrix* m : {&s.hsum1, &s.hsum2, &s.tsum, &s.batch_h1, &s.batch_h2}) {
        m->resize(s.p, s.p);
        r.get(m->data(), p * p);
    }
    r.expect_end();
    s.validate();
    return s;
}

} // namespace sindex
