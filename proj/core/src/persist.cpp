#include "versenet/persist.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "versenet/errors.hpp"

namespace versenet {

using nlohmann::json;

std::string pool_filename(int iteration) {
    return "pool_" + std::to_string(iteration) + ".jsonl";
}

std::string persist_pool(const PoemPool& pool, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / pool_filename(pool.iteration)).string();

    std::ostringstream out;
    out << json{{"schema", 1},
                {"kind", "pool_header"},
                {"iteration", pool.iteration},
                {"count", pool.poems.size()}}
               .dump()
        << "\n";
    for (const auto& p : pool.poems) {
        out << json{{"schema", 1},
                    {"kind", "poem"},
                    {"agent", p.agent},
                    {"group", group_name(p.group)},
                    {"iteration", p.iteration},
                    {"strategy", p.strategy},
                    {"seed", p.seed},
                    {"model_version", p.model_version},
                    {"text", p.text}}
                   .dump()
            << "\n";
    }
    write_file_atomic(path, out.str());
    return path;
}

PoemPool load_pool(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pool file " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty pool file");
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("kind", "") != "pool_header") {
        throw SchemaVersionMismatch(path + ": missing pool header");
    }
    if (header.value("schema", 0) != 1) {
        throw SchemaVersionMismatch(path + ": unsupported pool schema");
    }

    PoemPool pool;
    pool.iteration = header.at("iteration").get<int>();
    const auto expected = header.at("count").get<std::size_t>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            throw ParseError(path + " line " + std::to_string(line_no) + ": invalid JSON");
        }
        if (rec.value("schema", 0) != 1 || rec.value("kind", "") != "poem") {
            throw SchemaVersionMismatch(path + " line " + std::to_string(line_no) +
                                        ": unexpected record");
        }
        Poem p;
        p.agent = rec.at("agent").get<AgentId>();
        p.group = group_from_name(rec.at("group").get<std::string>().at(0));
        p.iteration = rec.at("iteration").get<int>();
        p.strategy = rec.at("strategy").get<std::string>();
        p.seed = rec.at("seed").get<std::uint64_t>();
        p.model_version = rec.at("model_version").get<int>();
        p.text = rec.at("text").get<std::string>();
        pool.poems.push_back(std::move(p));
    }
    if (pool.poems.size() != expected) {
        throw SchemaVersionMismatch(path + ": header promises " + std::to_string(expected) +
                                    " poems, file has " + std::to_string(pool.poems.size()));
    }
    return pool;
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ostringstream out;
    out << "run_id,iteration,agent,statistic,value\n";
    for (const auto& r : rows) {
        out << csv_escape(r.run_id) << "," << r.iteration << "," << csv_escape(r.agent) << ","
            << csv_escape(r.statistic) << "," << format_double(r.value) << "\n";
    }
    write_file_atomic(path, out.str());
}

std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file " + path);
    std::vector<MetricsRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream fields(line);
        MetricsRow row;
        std::string iter, value;
        std::getline(fields, row.run_id, ',');
        std::getline(fields, iter, ',');
        std::getline(fields, row.agent, ',');
        std::getline(fields, row.statistic, ',');
        std::getline(fields, value, ',');
        row.iteration = std::stoi(iter);
        row.value = std::stod(value);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out << content;
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace versenet
