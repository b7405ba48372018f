// ordstat command-line tool.
//
// Exit codes: 0 success, 1 a validation check failed, 2 usage or schema
// error, 3 runtime (numerical) failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ordstat/diagnostics.hpp"
#include "ordstat/io.hpp"
#include "ordstat/models/factorization.hpp"
#include "ordstat/models/flights.hpp"
#include "ordstat/models/iid_nb.hpp"
#include "ordstat/validation.hpp"

using namespace ordstat;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// --- shared parsing -----------------------------------------------------------

struct ParentSpec {
    std::string label;
    AnyParent parent;
};

double parse_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (...) {
        throw UsageError("bad " + what + " '" + s + "'");
    }
    if (used != s.size()) throw UsageError("bad " + what + " '" + s + "'");
    return v;
}

ParentSpec parse_parent(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("parent must be pois:MU or nb:ALPHA,P (got '" + s + "')");
    const auto family = s.substr(0, colon), rest = s.substr(colon + 1);
    try {
        if (family == "pois") return {s, PoissonParent(parse_number(rest, "Poisson mean"))};
        if (family == "nb") {
            const auto comma = rest.find(',');
            if (comma == std::string::npos) throw UsageError("nb parent needs ALPHA,P (got '" + s + "')");
            return {s, NegBinParent(parse_number(rest.substr(0, comma), "alpha"), parse_number(rest.substr(comma + 1), "p"))};
        }
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    throw UsageError("unknown parent family '" + family + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<std::int64_t> out;
    for (const auto& t : split(s, ',')) {
        const double v = parse_number(t, what);
        if (v != std::floor(v)) throw UsageError("bad " + what + " '" + t + "'");
        out.push_back(static_cast<std::int64_t>(v));
    }
    if (out.empty()) throw UsageError("empty " + what + " list");
    return out;
}

void print_json(const json& j) { std::cout << j.dump() << "\n"; }

json dispersion_json(const DispersionEstimate& e) {
    return {{"mean", e.mean}, {"variance", e.variance}, {"index", e.index}, {"stderr", e.mc_stderr_index}, {"n", e.n_samples}};
}

// Rank selection shared by dist and augment.
struct RankArgs {
    std::optional<std::int64_t> r;
    bool min = false, med = false, max = false;
    std::int64_t D = 1;

    void add(CLI::App* app) {
        app->add_option("--r", r, "rank (1-based)");
        app->add_flag("--min", min, "minimum (r = 1)");
        app->add_flag("--med", med, "median (r = (D+1)/2, odd D)");
        app->add_flag("--max", max, "maximum (r = D)");
        app->add_option("--d", D, "order D")->required();
    }
    [[nodiscard]] OrderSpec spec() const {
        const int picked = int(r.has_value()) + int(min) + int(med) + int(max);
        if (picked != 1) throw UsageError("choose exactly one of --r, --min, --med, --max");
        try {
            if (min) return OrderSpec::min(D);
            if (max) return OrderSpec::max(D);
            if (med) return OrderSpec::median(D);
            return OrderSpec(*r, D);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
};

// --- dist -----------------------------------------------------------------------

struct DistArgs {
    std::string parent;
    RankArgs rank;
    std::int64_t y = 0;
    std::int64_t n = 1000;
};

int cmd_dist(const DistArgs& a, const std::string& action, std::uint64_t seed) {
    const auto p = parse_parent(a.parent);
    const auto dist = make_order_stat(p.parent, a.rank.spec());
    Rng rng(seed);
    if (action == "pmf") {
        print_json({{"pmf", std::visit([&](const auto& d) { return d.pmf(a.y); }, dist)}});
    } else if (action == "cdf") {
        print_json({{"cdf", std::visit([&](const auto& d) { return d.cdf(a.y); }, dist)}});
    } else if (action == "sample") {
        if (a.n < 1) throw UsageError("--n must be positive");
        json xs = json::array();
        for (std::int64_t i = 0; i < a.n; ++i) xs.push_back(std::visit([&](const auto& d) { return d.sample(rng); }, dist));
        print_json({{"samples", xs}});
    } else {
        if (a.n < 1000) throw UsageError("dispersion needs --n >= 1000");
        print_json(dispersion_json(estimate_dispersion(dist, a.n, rng)));
    }
    return 0;
}

// --- augment --------------------------------------------------------------------

struct AugmentArgs {
    std::string parent;
    RankArgs rank;
    std::int64_t y = 0;
    std::int64_t n = 1;
    bool no_breaks = false;
    bool validate = false;
};

int cmd_augment(const AugmentArgs& a, std::uint64_t seed) {
    const auto p = parse_parent(a.parent);
    const auto spec = a.rank.spec();
    if (a.n < 1) throw UsageError("--n must be positive");
    if (a.y < 0) throw UsageError("--y must be non-negative");
    const double m = std::visit([&](const auto& par) { return OrderStatDistribution(par, spec).pmf(a.y); }, p.parent);
    if (!(m > 0.0)) throw UsageError("observation has zero probability under the order statistic");
    Rng rng(seed);
    detail::ProjHists seen;
    for (std::int64_t i = 0; i < a.n; ++i) {
        const auto d = sample_conditional(a.y, spec, p.parent, !a.no_breaks, rng);
        json line{{"values", d.values}, {"categorical_steps", d.categorical_steps}};
        line["break_step"] = d.break_step ? json(*d.break_step) : json(nullptr);
        print_json(line);
        if (a.validate) detail::add_projections(seen, d.values, a.y, 1.0);
    }
    if (!a.validate) return 0;
    detail::ProjHists exact;
    std::visit(
        [&](const auto& par) {
            const auto z_max = upper_quantile_bound(par, 1e-10);
            for (const auto& [tuple, w] : brute_force_conditional(a.y, spec, par, z_max))
                detail::add_projections(exact, tuple, a.y, w);
        },
        p.parent);
    const double tv = detail::max_tv(seen, static_cast<double>(a.n), exact, 1.0);
    const double limit = 4.0 * detail::mc_tv_scale(exact, static_cast<double>(a.n));
    const bool pass = tv < limit;
    print_json({{"tv", tv}, {"threshold", limit}, {"n", a.n}, {"pass", pass}});
    return pass ? 0 : kExitCheckFailed;
}

// --- fit and score ------------------------------------------------------------------

struct FitArgs {
    std::string model;
    std::string data;
    std::string config;
    std::string out;
    std::string mask;
    std::optional<std::int64_t> fixed_d;
};

io::RunConfig load_config(const std::string& path) {
    if (path.empty()) return io::parse_config(R"({"schema_version": 1})");
    return io::read_config(path);
}

void apply_fixed_d(io::RunConfig& rc, const std::string& model, std::optional<std::int64_t> fixed_d) {
    if (!fixed_d) return;
    if (*fixed_d < 1) throw UsageError("--fixed-d must be positive");
    if (model == "flights") {
        rc.flights.infer_d = false;
        rc.flights.fixed_d = *fixed_d;
    } else if (model == "iid-nb") {
        rc.iid.infer_d = false;
        rc.iid.D = *fixed_d;
    } else {
        rc.factorization.D = *fixed_d;
    }
}

MatrixData load_matrix(const std::string& data, const std::string& mask) {
    auto d = io::read_triplets(data);
    if (!mask.empty()) io::read_mask(mask, d);
    return d;
}

PosteriorSamples fit_model(const std::string& model, const io::RunConfig& rc, const std::string& data,
                           const std::string& mask) {
    if (model == "iid-nb") return run_chains(rc.iid, IidNbData{io::read_counts(data)}, rc.mcmc);
    if (model == "factorization") return run_chains(rc.factorization, load_matrix(data, mask), rc.mcmc);
    if (model == "flights") return run_chains(rc.flights, io::read_flights(data), rc.mcmc);
    throw UsageError("--model must be iid-nb, factorization or flights");
}

int cmd_fit(const FitArgs& a, std::optional<std::uint64_t> seed, fs::path& dump_dir) {
    auto rc = load_config(a.config);
    if (seed) rc.mcmc.seed = *seed;
    apply_fixed_d(rc, a.model, a.fixed_d);
    rc.resolved = io::resolved_json(rc);
    const fs::path out(a.out);
    dump_dir = out;

    io::RunManifest man;
    man.command = "fit --model " + a.model;
    man.config = rc.resolved;
    man.seed = rc.mcmc.seed;
    man.add_input(a.data);
    if (!a.config.empty()) man.add_input(a.config);
    if (!a.mask.empty()) man.add_input(a.mask);
    man.outputs = {"samples/"};
    man.write(out);

    const auto ps = fit_model(a.model, rc, a.data, a.mask);
    io::write_samples(out / "samples", ps);
    std::cerr << "fit: " << ps.size() << " draws written to " << (out / "samples").string() << "\n";
    return 0;
}

struct ScoreArgs {
    std::string model;
    std::string data;
    std::string config;
    std::string mask;
    std::string samples;
    std::string baseline;
    std::optional<std::int64_t> fixed_d;
    std::optional<std::int64_t> baseline_fixed_d;
    double level = 0.95;
};

int cmd_score(const ScoreArgs& a) {
    const auto ps = io::read_samples(a.samples);
    if (ps.model != a.model) throw UsageError("samples were fitted with model '" + ps.model + "'");
    std::optional<PosteriorSamples> base_ps;
    if (!a.baseline.empty()) base_ps = io::read_samples(a.baseline);

    auto rc = load_config(a.config);
    auto rc_base = rc;
    apply_fixed_d(rc, a.model, a.fixed_d);
    apply_fixed_d(rc_base, a.model, a.baseline_fixed_d ? a.baseline_fixed_d : a.fixed_d);

    std::vector<HeldoutPoint> held;
    Predictor pred;
    std::optional<Predictor> base;
    // Keeps flight data alive for the predictor closures.
    std::optional<FlightData> fd;
    if (a.model == "iid-nb") {
        for (auto y : io::read_counts(a.data)) held.push_back({{}, y});
        pred = rc.iid.predictor(ps);
        if (base_ps) base = rc_base.iid.predictor(*base_ps);
    } else if (a.model == "factorization") {
        if (a.mask.empty()) throw UsageError("factorization scoring needs --mask");
        const auto d = load_matrix(a.data, a.mask);
        held = d.heldout_points();
        pred = rc.factorization.predictor(ps, d.rows, d.cols);
        if (base_ps) base = rc_base.factorization.predictor(*base_ps, d.rows, d.cols);
    } else if (a.model == "flights") {
        fd = io::read_flights(a.data);
        held = fd->heldout_points();
        pred = rc.flights.predictor(ps, *fd);
        if (base_ps) base = rc_base.flights.predictor(*base_ps, *fd);
    } else {
        throw UsageError("--model must be iid-nb, factorization or flights");
    }
    if (held.empty()) throw UsageError("no heldout points to score");
    const auto fs_ = score_fit(pred, held, base);
    json j;
    j["model"] = a.model;
    j["n_held"] = fs_.n_held;
    j["ir"] = fs_.ir;
    j["lppd"] = fs_.lppd;
    j["ir_baseline"] = fs_.ir_baseline ? json(*fs_.ir_baseline) : json(nullptr);
    j["ig"] = fs_.ig ? json(*fs_.ig) : json(nullptr);
    j["level"] = a.level;
    j["coverage"] = coverage(pred, held, a.level);
    json flagged = json::array();
    for (const auto& f : fs_.flagged) flagged.push_back({{"index", f.index}, {"y", f.y}, {"reason", f.reason}});
    j["flagged"] = flagged;
    print_json(j);
    return 0;
}

// --- validate ---------------------------------------------------------------------

struct OracleArgs {
    std::string grid = "small";
    std::string parent;
    RankArgs rank;
    std::optional<std::int64_t> y;
    std::optional<std::int64_t> n;
};

std::string oracle_csv(const std::vector<OracleCell>& cells, double tv_limit, bool& all_pass) {
    std::ostringstream os;
    os << "parent,r,D,y,os_pmf,n,tv,tv_breaks,mc_error,steps_breaks,steps_no_breaks,pass\n";
    all_pass = true;
    for (const auto& c : cells) {
        const bool pass = c.tv < tv_limit && c.tv_breaks_off <= 3.0 * c.mc_error;
        all_pass = all_pass && pass;
        os << c.parent << ',' << c.r << ',' << c.D << ',' << c.y << ',' << fmt_double(c.os_pmf) << ',' << c.n << ','
           << fmt_double(c.tv) << ',' << fmt_double(c.tv_breaks_off) << ',' << fmt_double(c.mc_error) << ','
           << c.steps_on << ',' << c.steps_off << ',' << (pass ? 1 : 0) << '\n';
    }
    return os.str();
}

int cmd_validate_oracle(const OracleArgs& a, std::uint64_t seed) {
    std::vector<OracleCell> cells;
    double tv_limit = 0.012;
    if (!a.parent.empty()) {
        const auto p = parse_parent(a.parent);
        const auto spec = a.rank.spec();
        const std::int64_t n = a.n.value_or(100000);
        if (n < 1) throw UsageError("--n must be positive");
        std::vector<std::int64_t> ys;
        if (a.y) {
            ys.push_back(*a.y);
        } else {
            for (std::int64_t y = 0; y <= 6; ++y) ys.push_back(y);
        }
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const double m = std::visit([&](const auto& par) { return OrderStatDistribution(par, spec).pmf(ys[i]); }, p.parent);
            if (!(m > 1e-6)) {
                if (a.y) throw UsageError("observation has negligible probability under the order statistic");
                continue;
            }
            Rng rng(derive_seed(seed, {i}));
            cells.push_back(std::visit(
                [&](const auto& par) { return augment_oracle_cell(par, p.label, spec, ys[i], n, rng); }, p.parent));
        }
        tv_limit = 0.012 * std::sqrt(100000.0 / static_cast<double>(n));
    } else {
        OracleGrid g;
        if (a.grid == "small") {
            g.parents = {{"pois:2", PoissonParent(2.0)}};
            g.max_d = 3;
            g.max_y = 5;
        } else if (a.grid == "full") {
            g.parents = {{"pois:0.5", PoissonParent(0.5)},
                         {"pois:2", PoissonParent(2.0)},
                         {"pois:5", PoissonParent(5.0)},
                         {"nb:2,0.5", NegBinParent(2.0, 0.5)}};
        } else {
            throw UsageError("--grid must be small or full");
        }
        if (a.n) {
            if (*a.n < 1) throw UsageError("--n must be positive");
            g.n = *a.n;
            tv_limit = 0.012 * std::sqrt(100000.0 / static_cast<double>(g.n));
        }
        cells = run_oracle_grid(g, seed);
    }
    bool pass = true;
    std::cout << oracle_csv(cells, tv_limit, pass);
    std::cerr << "augment-oracle: " << cells.size() << " cells, " << (pass ? "all pass" : "FAILED") << "\n";
    return pass ? 0 : kExitCheckFailed;
}

struct GewekeArgs {
    std::string model;
    std::string config;
    std::int64_t n = 50000;
    std::string fault = "none";
};

Fault parse_fault(const std::string& s) {
    if (s == "none") return Fault::None;
    if (s == "skip-update") return Fault::SkipPUpdate;
    if (s == "drop-exposure") return Fault::DropExposureD;
    if (s == "off-by-one") return Fault::OffByOneStat;
    throw UsageError("--fault must be none, skip-update, drop-exposure or off-by-one");
}

int cmd_validate_geweke(const GewekeArgs& a, std::uint64_t seed) {
    GewekeOptions opt;
    opt.n_forward = opt.n_chain = a.n;
    opt.fault = parse_fault(a.fault);
    Rng rng(seed);
    GewekeReport rep;
    if (a.config.empty()) {
        // Small informative setups in which every update is exercised.
        if (a.model == "iid-nb") {
            IidNbModel m;
            m.rule = RankRule::Median;
            m.infer_d = true;
            m.d_max = 5;
            m.a = 2.0;
            m.b = 1.0;
            m.e = 6.0;
            m.f = 4.0;
            rep = geweke_test(m, IidNbData{std::vector<std::int64_t>(3, 0)}, opt, rng);
        } else if (a.model == "factorization") {
            FactorizationModel m;
            m.K = 2;
            m.D = 3;
            rep = geweke_test(m, MatrixData(4, 4), opt, rng);
        } else if (a.model == "flights") {
            FlightModel m;
            m.d_max = 5;
            m.shape = 3.0;
            const auto skel = build_flight_data({{"A", "B", 1.0, 0}, {"A", "B", 1.0, 0}, {"B", "A", 2.0, 0}, {"B", "A", 2.0, 0}});
            rep = geweke_test(m, skel, opt, rng);
        } else {
            throw UsageError("--model must be iid-nb, factorization or flights");
        }
    } else {
        const auto rc = io::read_config(a.config);
        if (a.model == "iid-nb") {
            rep = geweke_test(rc.iid, IidNbData{std::vector<std::int64_t>(3, 0)}, opt, rng);
        } else if (a.model == "factorization") {
            rep = geweke_test(rc.factorization, MatrixData(4, 4), opt, rng);
        } else if (a.model == "flights") {
            const auto skel = build_flight_data({{"A", "B", 1.0, 0}, {"A", "B", 1.0, 0}, {"B", "A", 2.0, 0}, {"B", "A", 2.0, 0}});
            rep = geweke_test(rc.flights, skel, opt, rng);
        } else {
            throw UsageError("--model must be iid-nb, factorization or flights");
        }
    }
    json stats = json::array();
    for (const auto& s : rep.stats) {
        stats.push_back({{"statistic", s.name},
                         {"z", s.z},
                         {"n", rep.n_chain},
                         {"pass", std::abs(s.z) < rep.threshold},
                         {"mean_forward", s.mean_forward},
                         {"mean_chain", s.mean_chain}});
    }
    json j{{"model", a.model},
           {"fault", a.fault},
           {"n_forward", rep.n_forward},
           {"n_chain", rep.n_chain},
           {"threshold", rep.threshold},
           {"note", "per-statistic |z| threshold, no multiplicity correction"},
           {"stats", stats},
           {"pass", rep.pass}};
    if (!rep.error.empty()) j["error"] = rep.error;
    print_json(j);
    return rep.pass ? 0 : kExitCheckFailed;
}

// --- dispersion-table -----------------------------------------------------------------

struct TableArgs {
    std::string family = "pois";
    std::string ranks = "min,med,max";
    std::string orders = "3,5,15,51";
    std::vector<std::string> params{"100"};
    std::int64_t n = 100000;
};

int cmd_dispersion_table(const TableArgs& a, std::uint64_t seed) {
    std::vector<std::pair<double, double>> params;
    for (const auto& t : a.params) {
        const auto parts = split(t, ',');
        if (a.family == "pois" && parts.size() == 1) {
            params.emplace_back(parse_number(parts[0], "mean"), 0.0);
        } else if (a.family == "nb" && parts.size() == 2) {
            params.emplace_back(parse_number(parts[0], "alpha"), parse_number(parts[1], "p"));
        } else {
            throw UsageError("--params takes MU values for pois and ALPHA,P pairs for nb");
        }
    }
    if (a.n < 1000) throw UsageError("--n must be at least 1000");
    Rng rng(seed);
    try {
        std::cout << dispersion_csv(dispersion_table(a.family, split(a.ranks, ','), parse_int_list(a.orders, "order"),
                                                     params, a.n, rng));
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    return 0;
}

// --- generate -----------------------------------------------------------------------

struct GenerateArgs {
    std::string model;
    std::string out;
    // iid-nb
    std::int64_t n = 200;
    double alpha = 2.0, p = 0.3;
    RankArgs rank;
    // factorization
    std::int64_t rows = 40, cols = 40, K = 5, D = 5;
    double shape = 0.3, rate = 0.3;
    // flights
    std::int64_t airports = 8, routes = 30, per_route = 20;
    std::string orders = "1,3,5,9";
    double heldout = 0.2;
};

int cmd_generate(const GenerateArgs& a, std::uint64_t seed) {
    const fs::path out(a.out);
    fs::create_directories(out);
    Rng rng(seed);
    json truth;
    if (a.model == "iid-nb") {
        const auto spec = a.rank.spec();
        if (a.n < 1) throw UsageError("--n must be positive");
        const auto y = generate_iid_nb(static_cast<std::size_t>(a.n), a.alpha, a.p, spec, rng);
        io::write_file(out / "counts.csv", io::counts_csv(y));
        truth = {{"alpha", a.alpha}, {"p", a.p}, {"r", spec.r()}, {"D", spec.D()}};
    } else if (a.model == "factorization") {
        auto syn = generate_factorization(a.rows, a.cols, a.K, a.D, a.shape, a.rate, rng);
        random_heldout_mask(syn.data, a.heldout, rng);
        io::write_file(out / "counts.csv", io::triplets_csv(syn.data));
        io::write_file(out / "mask.csv", io::mask_csv(syn.data));
        truth = {{"K", a.K}, {"D", a.D}, {"theta", syn.theta}, {"phi", syn.phi}};
    } else if (a.model == "flights") {
        const auto syn = generate_flights(a.airports, a.routes, a.per_route, parse_int_list(a.orders, "order"), rng);
        auto fd = build_flight_data(syn.records);
        random_heldout_flights(fd, a.heldout, rng);
        io::write_file(out / "flights.csv", io::flights_csv(fd));
        truth = {{"D", syn.true_d}, {"mu", syn.true_mu}};
    } else {
        throw UsageError("model must be iid-nb, factorization or flights");
    }
    truth["seed"] = seed;
    io::write_file(out / "truth.json", truth.dump(2) + "\n");
    return 0;
}

void write_failure_dump(const fs::path& dir, int argc, char** argv, const std::string& what) {
    json j;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    j["argv"] = args;
    j["error"] = what;
    j["version"] = io::kVersion;
    fs::path target = dir.empty() ? fs::temp_directory_path() : dir;
    std::error_code ec;
    fs::create_directories(target, ec);
    target /= "ordstat-failure.json";
    std::ofstream(target) << j.dump(2) << "\n";
    std::cerr << "state dump: " << target.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order-statistic count models: distributions, conditional sampling, fitting and validation"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("--seed", seed, "random seed (default 0)");
    app.add_option("--threads", threads, "worker thread cap (default: ORDSTAT_THREADS or all cores)");
    app.set_version_flag("--version", io::kVersion);

    // dist
    DistArgs dist;
    auto* dist_cmd = app.add_subcommand("dist", "order-statistic distribution queries");
    dist_cmd->add_option("parent", dist.parent, "pois:MU or nb:ALPHA,P")->required();
    dist.rank.add(dist_cmd);
    dist_cmd->require_subcommand(1);
    auto* d_pmf = dist_cmd->add_subcommand("pmf", "probability mass at --y");
    d_pmf->add_option("--y", dist.y)->required();
    auto* d_cdf = dist_cmd->add_subcommand("cdf", "cumulative probability at --y");
    d_cdf->add_option("--y", dist.y)->required();
    auto* d_sample = dist_cmd->add_subcommand("sample", "--n draws");
    d_sample->add_option("--n", dist.n)->required();
    auto* d_disp = dist_cmd->add_subcommand("dispersion", "Monte Carlo dispersion index from --n draws");
    d_disp->add_option("--n", dist.n)->required();

    // augment
    AugmentArgs aug;
    auto* aug_cmd = app.add_subcommand("augment", "draw latent parent values given an observed order statistic");
    aug_cmd->add_option("--parent", aug.parent, "pois:MU or nb:ALPHA,P")->required();
    aug.rank.add(aug_cmd);
    aug_cmd->add_option("--y", aug.y)->required();
    aug_cmd->add_option("--n", aug.n, "number of draws");
    aug_cmd->add_flag("--no-breaks", aug.no_breaks, "disable early termination");
    aug_cmd->add_flag("--validate", aug.validate, "compare the draws with the enumeration oracle");

    // fit
    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model by Gibbs sampling");
    fit_cmd->add_option("--model", fit.model, "iid-nb, factorization or flights")->required();
    fit_cmd->add_option("--data", fit.data, "input CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--config", fit.config, "JSON run configuration")->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit.out, "output directory")->required();
    fit_cmd->add_option("--mask", fit.mask, "heldout cells (factorization)")->check(CLI::ExistingFile);
    fit_cmd->add_option("--fixed-d", fit.fixed_d, "fix the order D");

    // score
    ScoreArgs sc;
    auto* score_cmd = app.add_subcommand("score", "heldout information rate, gain and coverage");
    score_cmd->add_option("--model", sc.model)->required();
    score_cmd->add_option("--data", sc.data, "data CSV (iid-nb: heldout counts)")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--config", sc.config)->check(CLI::ExistingFile);
    score_cmd->add_option("--mask", sc.mask)->check(CLI::ExistingFile);
    score_cmd->add_option("--samples", sc.samples, "samples directory from fit")->required();
    score_cmd->add_option("--baseline", sc.baseline, "baseline samples directory");
    score_cmd->add_option("--fixed-d", sc.fixed_d);
    score_cmd->add_option("--baseline-fixed-d", sc.baseline_fixed_d);
    score_cmd->add_option("--level", sc.level, "coverage level");

    // validate
    auto* val_cmd = app.add_subcommand("validate", "sampler validation");
    val_cmd->require_subcommand(1);
    OracleArgs orc;
    auto* orc_cmd = val_cmd->add_subcommand("augment-oracle", "conditional sampler vs exact enumeration");
    orc_cmd->add_option("--grid", orc.grid, "small or full");
    orc_cmd->add_option("--parent", orc.parent, "single parent instead of a grid");
    orc_cmd->add_option("--r", orc.rank.r);
    orc_cmd->add_flag("--min", orc.rank.min);
    orc_cmd->add_flag("--med", orc.rank.med);
    orc_cmd->add_flag("--max", orc.rank.max);
    orc_cmd->add_option("--d", orc.rank.D);
    orc_cmd->add_option("--y", orc.y);
    orc_cmd->add_option("--n", orc.n, "draws per cell (default 100000)");
    GewekeArgs gw;
    auto* gw_cmd = val_cmd->add_subcommand("geweke", "joint-distribution test of a model sampler");
    gw_cmd->add_option("--model", gw.model)->required();
    gw_cmd->add_option("--config", gw.config)->check(CLI::ExistingFile);
    gw_cmd->add_option("--n", gw.n, "forward and chain sample sizes");
    gw_cmd->add_option("--fault", gw.fault, "inject a broken update: none, skip-update, drop-exposure, off-by-one");

    // dispersion-table
    TableArgs tab;
    auto* tab_cmd = app.add_subcommand("dispersion-table", "Monte Carlo dispersion grid as CSV");
    tab_cmd->add_option("--family", tab.family, "pois or nb");
    tab_cmd->add_option("--ranks", tab.ranks, "comma list of min, med, max or integers");
    tab_cmd->add_option("--orders", tab.orders, "comma list of D");
    tab_cmd->add_option("--params", tab.params, "parent parameters per grid row: MU (pois) or ALPHA,P (nb)");
    tab_cmd->add_option("--n", tab.n, "draws per cell");

    // generate
    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "synthetic data sets");
    gen_cmd->add_option("model", gen.model, "iid-nb, factorization or flights")->required();
    gen_cmd->add_option("--out", gen.out)->required();
    gen_cmd->add_option("--n", gen.n, "iid-nb: observations");
    gen_cmd->add_option("--alpha", gen.alpha);
    gen_cmd->add_option("--p", gen.p);
    gen_cmd->add_option("--r", gen.rank.r);
    gen_cmd->add_flag("--min", gen.rank.min);
    gen_cmd->add_flag("--med", gen.rank.med);
    gen_cmd->add_flag("--max", gen.rank.max);
    gen_cmd->add_option("--d", gen.rank.D, "iid-nb: order D");
    gen_cmd->add_option("--rows", gen.rows);
    gen_cmd->add_option("--cols", gen.cols);
    gen_cmd->add_option("--k", gen.K, "factorization: rank K");
    gen_cmd->add_option("--order", gen.D, "factorization: max order D");
    gen_cmd->add_option("--shape", gen.shape);
    gen_cmd->add_option("--rate", gen.rate);
    gen_cmd->add_option("--airports", gen.airports);
    gen_cmd->add_option("--routes", gen.routes);
    gen_cmd->add_option("--per-route", gen.per_route);
    gen_cmd->add_option("--orders", gen.orders, "flights: route orders, cycled");
    gen_cmd->add_option("--heldout", gen.heldout, "heldout fraction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (threads) set_max_threads(*threads);
    const std::uint64_t s = seed.value_or(0);
    fs::path dump_dir;
    try {
        if (dist_cmd->parsed()) {
            const std::string action = d_pmf->parsed() ? "pmf" : d_cdf->parsed() ? "cdf" : d_sample->parsed() ? "sample" : "dispersion";
            return cmd_dist(dist, action, s);
        }
        if (aug_cmd->parsed()) return cmd_augment(aug, s);
        if (fit_cmd->parsed()) return cmd_fit(fit, seed, dump_dir);
        if (score_cmd->parsed()) return cmd_score(sc);
        if (orc_cmd->parsed()) return cmd_validate_oracle(orc, s);
        if (gw_cmd->parsed()) return cmd_validate_geweke(gw, s);
        if (tab_cmd->parsed()) return cmd_dispersion_table(tab, s);
        if (gen_cmd->parsed()) {
            dump_dir = gen.out;
            return cmd_generate(gen, s);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const io::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        // ConfigError, DataError, PreconditionError and other precondition failures.
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        write_failure_dump(dump_dir, argc, argv, e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
