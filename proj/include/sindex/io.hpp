#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sindex/engine.hpp"
#include "sindex/simgen.hpp"
#include "sindex/types.hpp"

namespace sindex {

/// Column names y, x1..xp.
std::vector<std::string> csv_schema(Index p);

/// Parses one CSV table with header `y,x1,...,xp`. Returns nullopt for a completely empty input.
/// `name` prefixes error messages as name:line.
std::optional<Batch> parse_csv_batch(std::istream& in, const std::string& name);
std::optional<Batch> read_csv_batch(const std::filesystem::path& path);
void write_csv_batch(const Batch& batch, const std::filesystem::path& path);

/// Ordered batch stream. All batches share the schema of the first one.
class BatchSource {
public:
    virtual ~BatchSource() = default;
    /// Next batch, or nullopt at end of stream.
    virtual std::optional<Batch> next() = 0;
};

/// CSV files of a directory in lexicographic order of file name. An empty file ends the stream.
std::unique_ptr<BatchSource> open_directory_source(const std::filesystem::path& dir);

/// Records on a text stream: one header line, then rows; a blank line closes a batch. A batch may repeat
/// the header after the blank line.
std::unique_ptr<BatchSource> open_stream_source(std::istream& in, std::string name = "<stdin>");

std::string report_to_json(const InferenceReport& report);
InferenceReport report_from_json(const std::string& text);
void write_report(const InferenceReport& report, const std::filesystem::path& path);
InferenceReport read_report(const std::filesystem::path& path);

/// JSON-lines log with one report per line.
class RunLog {
public:
    RunLog(const std::filesystem::path& path, bool append);
    void append(const InferenceReport& report);

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

std::vector<InferenceReport> read_run_log(const std::filesystem::path& path);

struct Manifest {
    ModelSpec spec;
    std::uint64_t replication = 0;
    Index m = 0;
    Index n_batch = 0;
    Vector beta0;
};

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

} // namespace sindex
