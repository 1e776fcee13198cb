#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdmeta/archive.hpp"
#include "qdmeta/cma_es.hpp"
#include "qdmeta/database.hpp"
#include "qdmeta/feature_map.hpp"

namespace qdmeta {

/// Fixed-format double for CSV streams: identical inputs always serialise to
/// identical bytes.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
    }

    void write_row(std::span<const std::string> fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void write_row(std::initializer_list<std::string> fields) {
        write_row(std::span<const std::string>(fields.begin(), fields.size()));
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

/// Reads a CSV with a header row into column-keyed string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("CsvTable: no column " + name);
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Archive serialization: one JSON object per elite, per line.

inline void write_archive_jsonl(const std::filesystem::path& path, const BehaviourMap& map) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_archive_jsonl: cannot open " + path.string());
    for (const auto& [flat, elite] : map.sorted_elites()) {
        nlohmann::json record;
        record["genotype"] = elite->genotype;
        record["descriptor"] = elite->descriptor;
        record["fitness"] = elite->fitness;
        record["bin"] = bin_index(elite->descriptor, map.bins_per_dim());
        out << record.dump() << '\n';
    }
}

inline std::vector<Genotype> read_archive_genotypes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_archive_genotypes: cannot open " + path.string());
    std::vector<Genotype> genotypes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json record = nlohmann::json::parse(line);
        const auto& genes = record.at("genotype");
        if (genes.size() != kNumJoints)
            throw std::runtime_error("read_archive_genotypes: bad genotype length");
        Genotype g;
        for (int i = 0; i < kNumJoints; ++i) g[i] = genes[i].get<double>();
        genotypes.push_back(g);
    }
    return genotypes;
}

// ---------------------------------------------------------------------------
// Feature-map parameters as {kind, genes}.

inline nlohmann::json feature_map_to_json(const FeatureMapParams& params) {
    return {{"kind", to_string(params.kind)}, {"genes", params.genes}};
}

inline FeatureMapParams feature_map_from_json(const nlohmann::json& j) {
    return decode(j.at("genes").get<std::vector<double>>(),
                  feature_map_kind_from_string(j.at("kind").get<std::string>()));
}

// ---------------------------------------------------------------------------
// Database snapshot: versioned binary header plus length-prefixed records.

inline constexpr char kDbMagic[4] = {'Q', 'D', 'B', '1'};

inline void write_db_snapshot(const std::filesystem::path& path, const KBestDatabase& db) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_db_snapshot: cannot open " + path.string());
    auto put = [&](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    out.write(kDbMagic, 4);
    const std::uint32_t version = 1;
    put(&version, sizeof version);
    const double delta = db.delta();
    put(&delta, sizeof delta);
    const std::int32_t k = db.k();
    put(&k, sizeof k);
    const std::uint64_t capacity = db.capacity();
    put(&capacity, sizeof capacity);
    const std::uint64_t count = db.size();
    put(&count, sizeof count);

    db.for_each_record([&](const SolutionRecord& rec) {
        const std::uint32_t length =
            sizeof(rec.genotype) + sizeof(rec.base_features) + sizeof(rec.fitness);
        put(&length, sizeof length);
        put(rec.genotype.data(), sizeof(rec.genotype));
        put(rec.base_features.data(), sizeof(rec.base_features));
        put(&rec.fitness, sizeof(rec.fitness));
    });
}

inline KBestDatabase read_db_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_db_snapshot: cannot open " + path.string());
    auto get = [&](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw std::runtime_error("read_db_snapshot: truncated file");
    };
    char magic[4];
    get(magic, 4);
    if (std::string(magic, 4) != std::string(kDbMagic, 4))
        throw std::runtime_error("read_db_snapshot: bad magic");
    std::uint32_t version = 0;
    get(&version, sizeof version);
    if (version != 1) throw std::runtime_error("read_db_snapshot: unsupported version");

    KBestDatabase::Config config;
    std::int32_t k = 0;
    std::uint64_t capacity = 0, count = 0;
    get(&config.delta, sizeof config.delta);
    get(&k, sizeof k);
    get(&capacity, sizeof capacity);
    get(&count, sizeof count);
    config.initial_k = k;
    config.capacity = capacity;

    KBestDatabase db(config);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t length = 0;
        get(&length, sizeof length);
        SolutionRecord rec;
        if (length != sizeof(rec.genotype) + sizeof(rec.base_features) + sizeof(rec.fitness))
            throw std::runtime_error("read_db_snapshot: unexpected record length");
        get(rec.genotype.data(), sizeof(rec.genotype));
        get(rec.base_features.data(), sizeof(rec.base_features));
        get(&rec.fitness, sizeof(rec.fitness));
        db.insert(rec);
    }
    return db;
}

inline void write_db_jsonl(const std::filesystem::path& path, const KBestDatabase& db) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_db_jsonl: cannot open " + path.string());
    db.for_each_record([&](const SolutionRecord& rec) {
        nlohmann::json record;
        record["genotype"] = rec.genotype;
        record["base_features"] = rec.base_features;
        record["fitness"] = rec.fitness;
        out << record.dump() << '\n';
    });
}

// ---------------------------------------------------------------------------
// CMA-ES state snapshot for run resumption.

inline nlohmann::json cma_to_json(const CmaEs& cma) {
    nlohmann::json j;
    j["dim"] = cma.dim();
    j["lambda"] = cma.lambda();
    j["generation"] = cma.generation();
    j["sigma"] = cma.sigma();
    j["box"] = {cma.box().lo, cma.box().hi};
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["mean"] = vec(cma.mean());
    j["path_c"] = vec(cma.path_c());
    j["path_sigma"] = vec(cma.path_sigma());
    std::vector<std::vector<double>> cov(cma.dim(), std::vector<double>(cma.dim()));
    for (int r = 0; r < cma.dim(); ++r)
        for (int c = 0; c < cma.dim(); ++c) cov[r][c] = cma.covariance()(r, c);
    j["covariance"] = cov;
    return j;
}

inline CmaEs cma_from_json(const nlohmann::json& j) {
    const int dim = j.at("dim").get<int>();
    CmaEs cma(dim, Box{j.at("box")[0].get<double>(), j.at("box")[1].get<double>()},
              j.at("lambda").get<int>());
    auto vec = [&](const char* key) {
        const auto data = j.at(key).get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(data.data(), data.size()).eval();
    };
    Eigen::MatrixXd cov(dim, dim);
    const auto rows = j.at("covariance").get<std::vector<std::vector<double>>>();
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) cov(r, c) = rows[r][c];
    cma.restore(vec("mean"), cov, j.at("sigma").get<double>(), vec("path_c"),
                vec("path_sigma"), j.at("generation").get<int>());
    return cma;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_json: cannot open " + path.string());
    return nlohmann::json::parse(in);
}

} // namespace qdmeta
