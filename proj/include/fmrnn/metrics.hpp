#pragma once

// Run metrics: line-delimited JSON records (append-only) plus plain CSV for
// each named series. Run ids hash the semantic config only, and timestamps
// honour SOURCE_DATE_EPOCH, so identical configs produce identical records.

#include "fmrnn/numcore.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace fmrnn {

using nlohmann::json;

struct SeriesPoint {
    double x = 0.0;
    double y = 0.0;
};

struct MetricsRecord {
    std::string run_id;
    std::string timestamp;
    std::string command;
    json config;
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<SeriesPoint>> series;
};

// FNV-1a over the canonical config dump; stable across platforms.
inline std::string hash_run_id(const std::string& command, const json& config) {
    const std::string payload = command + "\x1f" + config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : payload) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string utc_timestamp() {
    std::time_t t;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
    } else {
        t = std::time(nullptr);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline MetricsRecord make_metrics_record(const std::string& command, const json& config) {
    MetricsRecord r;
    r.command = command;
    r.config = config;
    r.run_id = hash_run_id(command, config);
    r.timestamp = utc_timestamp();
    return r;
}

inline json to_json(const MetricsRecord& r) {
    json js = {{"run_id", r.run_id},
               {"timestamp", r.timestamp},
               {"command", r.command},
               {"config", r.config}};
    js["scalars"] = r.scalars;
    json series = json::object();
    for (const auto& [name, points] : r.series) {
        json arr = json::array();
        for (const auto& p : points) arr.push_back({p.x, p.y});
        series[name] = arr;
    }
    js["series"] = series;
    return js;
}

inline void append_metrics(const std::string& path, const MetricsRecord& r) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream os(path, std::ios::app);
    require(os.good(), "metrics: cannot open for append: " + path);
    os << to_json(r).dump() << "\n";
    require(os.good(), "metrics: write failed: " + path);
}

// One CSV file per series, named <prefix><series>.csv with an x,y header.
inline void write_series_csv(const std::string& dir, const std::string& prefix,
                             const MetricsRecord& r) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& [name, points] : r.series) {
        const std::string path = (fs::path(dir) / (prefix + name + ".csv")).string();
        std::ofstream os(path);
        require(os.good(), "metrics: cannot open for writing: " + path);
        os << "x,y\n";
        os.precision(17);
        for (const auto& p : points) os << p.x << "," << p.y << "\n";
        require(os.good(), "metrics: write failed: " + path);
    }
}

}  // namespace fmrnn
