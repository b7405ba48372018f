#pragma once

// CSV and JSON input/output: data files, run configuration, posterior sample
// directories and run manifests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ordstat/models/factorization.hpp"
#include "ordstat/models/flights.hpp"
#include "ordstat/models/iid_nb.hpp"

namespace ordstat::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

/// Malformed input file; the message carries the file and line.
class SchemaError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << text;
}

inline std::string file_digest(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

// --- CSV ----------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_of;  // 1-based source line of each row
    std::string source;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError(source + ":1: missing column '" + name + "'");
    }
    [[noreturn]] void fail(std::size_t row, const std::string& what) const {
        throw SchemaError(source + ":" + std::to_string(line_of[row]) + ": " + what);
    }
    [[nodiscard]] std::int64_t integer(std::size_t row, std::size_t col) const {
        const auto& s = rows[row][col];
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &used);
        } catch (...) {
            fail(row, "expected an integer, got '" + s + "'");
        }
        if (used != s.size()) fail(row, "expected an integer, got '" + s + "'");
        return v;
    }
    [[nodiscard]] double real(std::size_t row, std::size_t col) const {
        const auto& s = rows[row][col];
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (...) {
            fail(row, "expected a number, got '" + s + "'");
        }
        if (used != s.size()) fail(row, "expected a number, got '" + s + "'");
        return v;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != ' ' && c != '\t') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

/// Header row plus data rows; blank lines and lines starting with '#' are skipped.
inline CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw SchemaError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
        t.line_of.push_back(lineno);
    }
    if (t.header.empty()) throw SchemaError(source + ": empty file");
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

/// Counts from the `y` column (or the only column).
inline std::vector<std::int64_t> read_counts(const std::filesystem::path& path) {
    const auto t = read_csv(path);
    const std::size_t col = t.header.size() == 1 ? 0 : t.column("y");
    std::vector<std::int64_t> y;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto v = t.integer(r, col);
        if (v < 0) t.fail(r, "negative count");
        y.push_back(v);
    }
    return y;
}

/// `row,col,count` triplets; absent cells are zero. Dimensions default to max index + 1.
inline MatrixData read_triplets(const std::filesystem::path& path, std::int64_t rows = 0, std::int64_t cols = 0) {
    const auto t = read_csv(path);
    const auto ci = t.column("row"), cj = t.column("col"), cc = t.column("count");
    struct Entry {
        std::int64_t i, j, y;
        std::size_t row;
    };
    std::vector<Entry> es;
    std::int64_t mi = -1, mj = -1;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Entry e{t.integer(r, ci), t.integer(r, cj), t.integer(r, cc), r};
        if (e.i < 0 || e.j < 0) t.fail(r, "negative index");
        if (e.y < 0) t.fail(r, "negative count");
        mi = std::max(mi, e.i);
        mj = std::max(mj, e.j);
        es.push_back(e);
    }
    if (rows == 0) rows = mi + 1;
    if (cols == 0) cols = mj + 1;
    if (rows < 1 || cols < 1) throw SchemaError(path.string() + ": no cells");
    MatrixData d(rows, cols);
    std::vector<std::uint8_t> seen(d.y.size(), 0);
    for (const auto& e : es) {
        if (e.i >= rows || e.j >= cols) t.fail(e.row, "index outside the matrix");
        const auto c = d.idx(e.i, e.j);
        if (seen[c]) t.fail(e.row, "duplicate cell");
        seen[c] = 1;
        d.y[c] = e.y;
    }
    return d;
}

/// Marks the `row,col` cells listed in a mask file as heldout.
inline void read_mask(const std::filesystem::path& path, MatrixData& d) {
    const auto t = read_csv(path);
    const auto ci = t.column("row"), cj = t.column("col");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto i = t.integer(r, ci), j = t.integer(r, cj);
        if (i < 0 || j < 0 || i >= d.rows || j >= d.cols) t.fail(r, "mask cell outside the matrix");
        d.heldout[d.idx(i, j)] = 1;
    }
}

/// `origin,dest,distance_miles,minutes` with an optional `heldout` 0/1 column.
inline FlightData read_flights(const std::filesystem::path& path) {
    const auto t = read_csv(path);
    const auto co = t.column("origin"), cd = t.column("dest"), cm = t.column("distance_miles"),
               cy = t.column("minutes");
    std::optional<std::size_t> ch;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == "heldout") ch = i;
    std::vector<FlightRecord> recs;
    std::vector<std::uint8_t> held;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        FlightRecord rec{t.rows[r][co], t.rows[r][cd], t.real(r, cm), t.integer(r, cy)};
        if (rec.origin.empty() || rec.dest.empty()) t.fail(r, "empty airport code");
        if (!(rec.distance > 0.0)) t.fail(r, "distance must be positive");
        if (rec.minutes < 0) t.fail(r, "negative minutes");
        recs.push_back(rec);
        held.push_back(ch ? static_cast<std::uint8_t>(t.integer(r, *ch) != 0) : 0);
    }
    auto fd = build_flight_data(recs);
    fd.heldout = held;
    return fd;
}

inline std::string counts_csv(const std::vector<std::int64_t>& y) {
    std::string s = "y\n";
    for (auto v : y) s += std::to_string(v) + "\n";
    return s;
}

inline std::string triplets_csv(const MatrixData& d) {
    std::string s = "row,col,count\n";
    for (std::int64_t i = 0; i < d.rows; ++i)
        for (std::int64_t j = 0; j < d.cols; ++j) s += std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(d.at(i, j)) + "\n";
    return s;
}

inline std::string mask_csv(const MatrixData& d) {
    std::string s = "row,col\n";
    for (std::int64_t i = 0; i < d.rows; ++i)
        for (std::int64_t j = 0; j < d.cols; ++j)
            if (!d.observed(i, j)) s += std::to_string(i) + "," + std::to_string(j) + "\n";
    return s;
}

inline std::string flights_csv(const FlightData& fd) {
    std::string s = "origin,dest,distance_miles,minutes,heldout\n";
    for (std::size_t i = 0; i < fd.y.size(); ++i) {
        const auto& r = fd.routes[static_cast<std::size_t>(fd.route_of[i])];
        s += fd.airports[static_cast<std::size_t>(r.origin)] + "," + fd.airports[static_cast<std::size_t>(r.dest)] + "," +
             fmt_double(r.distance) + "," + std::to_string(fd.y[i]) + "," + std::to_string(int(fd.heldout[i])) + "\n";
    }
    return s;
}

// --- configuration ------------------------------------------------------------

struct RunConfig {
    McmcConfig mcmc;
    IidNbModel iid;
    FactorizationModel factorization;
    FlightModel flights;
    json resolved;  // echo of every setting after defaults are applied
};

json resolved_json(const RunConfig& rc);

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
    return line;
}

/// Line of the first occurrence of "key" in the document (1 if absent).
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

class Section {
  public:
    Section(const json& obj, std::string name, const std::string& text, std::string source)
        : obj_(obj), name_(std::move(name)), text_(text), source_(std::move(source)) {
        if (!obj_.is_object()) fail(name_, "section '" + name_ + "' must be an object");
    }
    template <class T>
    T get(const std::string& key, T def) {
        used_.push_back(key);
        if (!obj_.contains(key)) return def;
        try {
            return obj_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(key, "'" + name_ + "." + key + "' has the wrong type");
        }
    }
    [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key); }
    const json& raw(const std::string& key) {
        used_.push_back(key);
        return obj_.at(key);
    }
    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (std::find(used_.begin(), used_.end(), it.key()) == used_.end()) {
                fail(it.key(), "unknown key '" + name_ + "." + it.key() + "'");
            }
        }
    }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw SchemaError(source_ + ":" + std::to_string(line_of_key(text_, key)) + ": " + what);
    }

  private:
    const json& obj_;
    std::string name_;
    const std::string& text_;
    std::string source_;
    std::vector<std::string> used_;
};

inline RankRule parse_rank_rule(const std::string& s, Section& sec) {
    if (s == "min") return RankRule::Min;
    if (s == "median" || s == "med") return RankRule::Median;
    if (s == "max") return RankRule::Max;
    sec.fail("rank", "rank must be min, median, max or an integer");
}

}  // namespace detail

/// Parses a versioned run configuration. Every section is optional; unknown
/// keys and wrong types are schema errors reported with a line number.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(source + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
    }
    RunConfig rc;
    detail::Section top(doc, "config", text, source);
    const auto version = top.get<int>("schema_version", -1);
    if (version != kConfigSchemaVersion) {
        top.fail("schema_version", "schema_version must be " + std::to_string(kConfigSchemaVersion));
    }
    static const json empty = json::object();
    {
        detail::Section s(top.has("mcmc") ? top.raw("mcmc") : empty, "mcmc", text, source);
        rc.mcmc.n_chains = s.get<std::int64_t>("chains", rc.mcmc.n_chains);
        rc.mcmc.n_warmup = s.get<std::int64_t>("warmup", rc.mcmc.n_warmup);
        rc.mcmc.n_samples = s.get<std::int64_t>("samples", rc.mcmc.n_samples);
        rc.mcmc.thin = s.get<std::int64_t>("thin", rc.mcmc.thin);
        rc.mcmc.seed = s.get<std::uint64_t>("seed", rc.mcmc.seed);
        s.finish();
        try {
            rc.mcmc.validate();
        } catch (const ConfigError& e) {
            s.fail("mcmc", e.what());
        }
    }
    {
        detail::Section s(top.has("iid-nb") ? top.raw("iid-nb") : empty, "iid-nb", text, source);
        auto& m = rc.iid;
        if (s.has("rank")) {
            const auto& r = s.raw("rank");
            if (r.is_number_integer()) {
                m.rule = RankRule::Explicit;
                m.r_explicit = r.get<std::int64_t>();
            } else if (r.is_string()) {
                m.rule = detail::parse_rank_rule(r.get<std::string>(), s);
            } else {
                s.fail("rank", "rank must be min, median, max or an integer");
            }
        }
        m.D = s.get<std::int64_t>("D", m.D);
        m.infer_d = s.get<bool>("infer_d", m.infer_d);
        m.d_max = s.get<std::int64_t>("d_max", m.d_max);
        m.d_q = s.get<double>("d_q", m.d_q);
        m.a = s.get<double>("a", m.a);
        m.b = s.get<double>("b", m.b);
        m.e = s.get<double>("e", m.e);
        m.f = s.get<double>("f", m.f);
        s.finish();
    }
    {
        detail::Section s(top.has("factorization") ? top.raw("factorization") : empty, "factorization", text, source);
        auto& m = rc.factorization;
        m.K = s.get<std::int64_t>("K", m.K);
        m.D = s.get<std::int64_t>("D", m.D);
        m.theta_shape = s.get<double>("theta_shape", m.theta_shape);
        m.theta_rate = s.get<double>("theta_rate", m.theta_rate);
        m.phi_shape = s.get<double>("phi_shape", m.phi_shape);
        m.phi_rate = s.get<double>("phi_rate", m.phi_rate);
        s.finish();
    }
    {
        detail::Section s(top.has("flights") ? top.raw("flights") : empty, "flights", text, source);
        auto& m = rc.flights;
        m.infer_d = s.get<bool>("infer_d", m.infer_d);
        m.fixed_d = s.get<std::int64_t>("fixed_d", m.fixed_d);
        m.d_max = s.get<std::int64_t>("d_max", m.d_max);
        m.shape = s.get<double>("shape", m.shape);
        m.rate = s.get<double>("rate", m.rate);
        m.rho_a = s.get<double>("rho_a", m.rho_a);
        m.rho_b = s.get<double>("rho_b", m.rho_b);
        s.finish();
    }
    top.finish();
    rc.resolved = resolved_json(rc);
    return rc;
}

inline json resolved_json(const RunConfig& rc) {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["mcmc"] = {{"chains", rc.mcmc.n_chains},
                 {"warmup", rc.mcmc.n_warmup},
                 {"samples", rc.mcmc.n_samples},
                 {"thin", rc.mcmc.thin},
                 {"seed", rc.mcmc.seed}};
    const auto& i = rc.iid;
    j["iid-nb"] = {{"rank", i.rule == RankRule::Explicit ? json(i.r_explicit) : json(to_string(i.rule))},
                   {"D", i.D},
                   {"infer_d", i.infer_d},
                   {"d_max", i.d_max},
                   {"d_q", i.d_q},
                   {"a", i.a},
                   {"b", i.b},
                   {"e", i.e},
                   {"f", i.f}};
    const auto& f = rc.factorization;
    j["factorization"] = {{"K", f.K},
                          {"D", f.D},
                          {"theta_shape", f.theta_shape},
                          {"theta_rate", f.theta_rate},
                          {"phi_shape", f.phi_shape},
                          {"phi_rate", f.phi_rate}};
    const auto& g = rc.flights;
    j["flights"] = {{"infer_d", g.infer_d}, {"fixed_d", g.fixed_d}, {"d_max", g.d_max}, {"shape", g.shape},
                    {"rate", g.rate},       {"rho_a", g.rho_a},     {"rho_b", g.rho_b}};
    return j;
}

inline RunConfig read_config(const std::filesystem::path& path) { return parse_config(read_file(path), path.string()); }

// --- posterior sample directories ----------------------------------------------

inline json meta_json(const PosteriorSamples& ps) {
    json j;
    j["model"] = ps.model;
    j["seed"] = ps.seed;
    j["config_hash"] = ps.config_hash;
    j["n_chains"] = ps.n_chains;
    j["n_samples"] = ps.n_samples;
    j["n_draws"] = ps.size();
    json params = json::object();
    for (const auto& [name, rows] : ps.params) params[name] = rows.empty() ? 0 : rows.front().size();
    j["parameters"] = params;
    json chains = json::array();
    for (const auto& c : ps.chains) {
        chains.push_back({{"chain", c.chain},
                          {"seed", c.seed},
                          {"sweeps", c.sweeps},
                          {"categorical_steps", c.categorical_steps},
                          {"shortcut_entries", c.shortcut_entries}});
    }
    j["chains"] = chains;
    return j;
}

/// One CSV per parameter (`chain,<name>_0,...`, one row per draw) plus meta.json.
inline std::vector<std::filesystem::path> write_samples(const std::filesystem::path& dir, const PosteriorSamples& ps) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [name, rows] : ps.params) {
        std::string s = "chain";
        const std::size_t dim = rows.empty() ? 0 : rows.front().size();
        for (std::size_t k = 0; k < dim; ++k) s += "," + name + "_" + std::to_string(k);
        s += "\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            s += std::to_string(ps.chain_of[r]);
            for (double v : rows[r]) s += "," + fmt_double(v);
            s += "\n";
        }
        const auto path = dir / (name + ".csv");
        write_file(path, s);
        written.push_back(path);
    }
    write_file(dir / "meta.json", meta_json(ps).dump(2) + "\n");
    written.push_back(dir / "meta.json");
    return written;
}

inline PosteriorSamples read_samples(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    json meta;
    try {
        meta = json::parse(read_file(meta_path));
    } catch (const json::parse_error& e) {
        throw SchemaError(meta_path.string() + ": " + e.what());
    }
    PosteriorSamples ps;
    try {
        ps.model = meta.at("model").get<std::string>();
        ps.seed = meta.at("seed").get<std::uint64_t>();
        ps.config_hash = meta.at("config_hash").get<std::string>();
        ps.n_chains = meta.at("n_chains").get<std::int64_t>();
        ps.n_samples = meta.at("n_samples").get<std::int64_t>();
        for (const auto& c : meta.at("chains")) {
            ps.chains.push_back({c.at("chain").get<std::int64_t>(), c.at("seed").get<std::uint64_t>(),
                                 c.at("sweeps").get<std::int64_t>(), c.at("categorical_steps").get<std::int64_t>(),
                                 c.at("shortcut_entries").get<std::int64_t>()});
        }
        bool first = true;
        for (auto it = meta.at("parameters").begin(); it != meta.at("parameters").end(); ++it) {
            const auto t = read_csv(dir / (it.key() + ".csv"));
            auto& rows = ps.params[it.key()];
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                std::vector<double> v;
                for (std::size_t c = 1; c < t.header.size(); ++c) v.push_back(t.real(r, c));
                rows.push_back(std::move(v));
                if (first) ps.chain_of.push_back(t.integer(r, 0));
            }
            first = false;
        }
    } catch (const json::exception& e) {
        throw SchemaError(meta_path.string() + ": " + e.what());
    }
    return ps;
}

// --- run manifest ----------------------------------------------------------------

struct RunManifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> FNV-1a digest
    std::vector<std::string> outputs;

    [[nodiscard]] json to_json() const {
        json j;
        j["command"] = command;
        j["version"] = kVersion;
        j["seed"] = seed;
        j["config"] = config;
        json d = json::object();
        for (const auto& [p, h] : input_digests) d[p] = h;
        j["inputs"] = d;
        j["outputs"] = outputs;
        return j;
    }
    void add_input(const std::filesystem::path& p) { input_digests[p.filename().string()] = file_digest(p); }
    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        write_file(dir / "manifest.json", to_json().dump(2) + "\n");
    }
};

}  // namespace ordstat::io
