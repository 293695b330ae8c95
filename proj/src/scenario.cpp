#include "psattn/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace psattn {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

using Json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

using Sections = std::map<std::string, std::map<std::string, std::string>>;

Sections parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Sections sections;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                throw ConfigError(path + ":" + std::to_string(line_no) + ": empty section name");
            sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected `key = value`, got: " + line);
        if (section.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": key outside any [section]");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        if (!sections[section].emplace(key, value).second)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate key " + key);
    }
    return sections;
}

// Typed access over parsed sections, with a whitelist check so that any
// misspelled key fails loudly instead of silently using a default.
class ConfigView {
public:
    ConfigView(Sections sections, std::string path)
        : sections_(std::move(sections)), path_(std::move(path)) {}

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& def) const {
        const auto s = sections_.find(section);
        if (s == sections_.end()) return def;
        const auto k = s->second.find(key);
        return k == s->second.end() ? def : k->second;
    }

    double get_double(const std::string& section, const std::string& key, double def) const {
        if (!has(section, key)) return def;
        const std::string raw = get_string(section, key, "");
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(path_ + ": [" + section + "] " + key +
                              ": not a number: " + raw);
        }
    }

    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t def) const {
        if (!has(section, key)) return def;
        const std::string raw = get_string(section, key, "");
        std::int64_t v = 0;
        const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (res.ec != std::errc() || res.ptr != raw.data() + raw.size())
            throw ConfigError(path_ + ": [" + section + "] " + key +
                              ": not an integer: " + raw);
        return v;
    }

    bool get_bool(const std::string& section, const std::string& key, bool def) const {
        if (!has(section, key)) return def;
        const std::string raw = lower(get_string(section, key, ""));
        if (raw == "true" || raw == "1" || raw == "yes") return true;
        if (raw == "false" || raw == "0" || raw == "no") return false;
        throw ConfigError(path_ + ": [" + section + "] " + key + ": not a boolean: " + raw);
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        if (!has(section, key)) return out;
        std::stringstream ss(get_string(section, key, ""));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    void check_known_keys(const std::map<std::string, std::set<std::string>>& known) const {
        for (const auto& [section, keys] : sections_) {
            const auto s = known.find(section);
            if (s == known.end())
                throw ConfigError(path_ + ": unknown section [" + section + "]");
            for (const auto& [key, value] : keys)
                if (s->second.count(key) == 0)
                    throw ConfigError(path_ + ": unknown key `" + key + "` in [" + section + "]");
        }
    }

    const std::string& path() const { return path_; }

private:
    Sections sections_;
    std::string path_;
};

Estimator parse_estimator(const ConfigView& cfg, const std::string& raw) {
    const std::string v = lower(raw);
    if (v == "mean") return Estimator::Mean;
    if (v == "cuboid_upper") return Estimator::CuboidUpperBound;
    if (v == "cuboid_mean") return Estimator::CuboidMean;
    throw ConfigError(cfg.path() + ": unknown estimator: " + raw);
}

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"workload",
     {"n_requests", "dim", "block_size", "n_layers", "context_min", "context_max",
      "decode_steps", "rho", "arrival_rate", "skew", "planted_blocks", "planted_blocks_alt",
      "seed"}},
    {"engine", {"epsilon", "microbatch", "estimator", "ranking", "audit", "scale_override"}},
    {"store", {"capacity", "policy", "eviction", "miss_latency_ms"}},
    {"serving", {"miss_cost_ms", "hit_cost_ms", "compute_cost_ms", "overlap"}},
    {"sweep", {"epsilons", "ks", "include_exact"}},
    {"tradeoff", {"target_coverage"}},
    {"output", {"format", "dir"}},
};

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
    ConfigView cfg(parse_ini(path), path);
    cfg.check_known_keys(kKnownKeys);

    ScenarioConfig sc;
    sc.name = std::filesystem::path(path).stem().string();

    auto& w = sc.workload;
    w.n_requests = static_cast<std::int32_t>(cfg.get_int("workload", "n_requests", 1));
    w.dim = static_cast<std::int32_t>(cfg.get_int("workload", "dim", 64));
    w.block_size = static_cast<std::int32_t>(cfg.get_int("workload", "block_size", 32));
    w.n_layers = static_cast<std::int32_t>(cfg.get_int("workload", "n_layers", 1));
    w.context_min = static_cast<std::int32_t>(cfg.get_int("workload", "context_min", 1024));
    w.context_max =
        static_cast<std::int32_t>(cfg.get_int("workload", "context_max", w.context_min));
    w.decode_steps = static_cast<std::int32_t>(cfg.get_int("workload", "decode_steps", 8));
    w.rho = cfg.get_double("workload", "rho", 0.0);
    w.arrival_rate = cfg.get_double("workload", "arrival_rate", 0.0);
    w.skew = cfg.get_double("workload", "skew", 0.0);
    w.planted_blocks = static_cast<std::int32_t>(cfg.get_int("workload", "planted_blocks", 0));
    w.planted_blocks_alt =
        static_cast<std::int32_t>(cfg.get_int("workload", "planted_blocks_alt", 0));
    w.seed = static_cast<std::uint64_t>(cfg.get_int("workload", "seed", 1));

    auto& e = sc.engine;
    e.epsilon = cfg.get_double("engine", "epsilon", 0.95);
    e.microbatch_size = static_cast<std::int32_t>(cfg.get_int("engine", "microbatch", 4));
    e.block_size = w.block_size;
    e.estimator = parse_estimator(cfg, cfg.get_string("engine", "estimator", "cuboid_mean"));
    {
        const std::string r = lower(cfg.get_string("engine", "ranking", "estimated"));
        if (r == "estimated") e.ranking_mode = RankingMode::Estimated;
        else if (r == "oracle") e.ranking_mode = RankingMode::Oracle;
        else throw ConfigError(path + ": unknown ranking mode: " + r);
    }
    e.audit_coverage = cfg.get_bool("engine", "audit", true);
    e.scale_override = cfg.get_double("engine", "scale_override", 0.0);

    auto& s = sc.store;
    const std::int64_t capacity = cfg.get_int("store", "capacity", 256);
    if (capacity < 0) throw ConfigError(path + ": [store] capacity must be >= 0");
    s.fast_capacity_slots = static_cast<std::size_t>(capacity);
    {
        const std::string p = lower(cfg.get_string("store", "policy", "unified"));
        if (p == "unified") s.policy = PoolPolicy::Unified;
        else if (p == "partitioned") s.policy = PoolPolicy::LayerPartitioned;
        else throw ConfigError(path + ": unknown pool policy: " + p);
    }
    {
        const std::string ev = lower(cfg.get_string("store", "eviction", "lru"));
        if (ev == "lru") s.eviction = EvictionPolicy::LRU;
        else if (ev == "fifo") s.eviction = EvictionPolicy::FIFO;
        else throw ConfigError(path + ": unknown eviction policy: " + ev);
    }
    s.miss_sleep_ms = cfg.get_double("store", "miss_latency_ms", 0.0);
    s.n_layers = w.n_layers;

    auto& sv = sc.serving;
    sv.miss_cost_ms = cfg.get_double("serving", "miss_cost_ms", 1.0);
    sv.hit_cost_ms = cfg.get_double("serving", "hit_cost_ms", 0.0);
    sv.compute_cost_ms = cfg.get_double("serving", "compute_cost_ms", 0.1);
    sv.overlap = cfg.get_bool("serving", "overlap", true);

    for (const auto& item : cfg.get_list("sweep", "epsilons")) {
        try {
            sc.epsilons.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(path + ": [sweep] epsilons: not a number: " + item);
        }
    }
    for (const auto& item : cfg.get_list("sweep", "ks")) {
        std::int64_t v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 1)
            throw ConfigError(path + ": [sweep] ks: not a positive integer: " + item);
        sc.ks.push_back(static_cast<std::size_t>(v));
    }
    sc.include_exact = cfg.get_bool("sweep", "include_exact", true);
    sc.target_coverage = cfg.get_double("tradeoff", "target_coverage", 0.95);
    sc.out_dir = cfg.get_string("output", "dir", "out");
    {
        const std::string f = lower(cfg.get_string("output", "format", "both"));
        if (f == "csv") sc.format = ReportFormat::CSV;
        else if (f == "json") sc.format = ReportFormat::JSON;
        else if (f == "both") sc.format = ReportFormat::Both;
        else throw ConfigError(path + ": unknown output format: " + f);
    }

    try {
        sc.workload.validate();
        sc.engine.validate();
        for (double eps : sc.epsilons)
            if (!(eps > 0.0) || eps > 1.0)
                throw Error("sweep epsilon out of (0, 1]: " + format_double(eps));
        if (!(sc.target_coverage > 0.0) || sc.target_coverage > 1.0)
            throw Error("target_coverage out of (0, 1]");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        throw ConfigError(path + ": " + err.what());
    }
    return sc;
}

namespace {

struct RowSamples {
    std::vector<double> blocks;
    std::vector<double> coverage;
    std::size_t blocks_sum = 0;
    std::size_t total_sum = 0;
};

ReportRow make_row(const std::string& method, double param, const ServingReport& sr) {
    RowSamples samples;
    samples.blocks.reserve(sr.calls.size());
    samples.coverage.reserve(sr.calls.size());
    for (const auto& call : sr.calls) {
        samples.blocks.push_back(static_cast<double>(call.blocks_processed));
        samples.coverage.push_back(call.true_coverage ? *call.true_coverage
                                                      : call.estimated_coverage);
        samples.blocks_sum += call.blocks_processed;
        samples.total_sum += call.total_blocks;
    }
    if (samples.blocks.empty()) throw Error("serving produced no attention calls");

    double blocks_mean = 0.0, coverage_mean = 0.0;
    double coverage_min = std::numeric_limits<double>::infinity();
    for (double b : samples.blocks) blocks_mean += b;
    blocks_mean /= static_cast<double>(samples.blocks.size());
    for (double c : samples.coverage) {
        coverage_mean += c;
        coverage_min = std::min(coverage_min, c);
    }
    coverage_mean /= static_cast<double>(samples.coverage.size());

    ReportRow row;
    row.method = method;
    row.param = param;
    row.mean_blocks = blocks_mean;
    row.p99_blocks = percentile(samples.blocks, 99.0);
    row.kv_fraction =
        static_cast<double>(samples.blocks_sum) / static_cast<double>(samples.total_sum);
    row.mean_coverage = coverage_mean;
    row.min_coverage = coverage_min;
    row.hit_ratio = sr.store_stats.hit_ratio();
    row.tbt_p50_ms = percentile(sr.tbt_ms, 50.0);
    row.tbt_p99_ms = percentile(sr.tbt_ms, 99.0);
    row.overlap_eff = sr.overlap_efficiency();
    return row;
}

}  // namespace

ComparisonReport run_scenario(const ScenarioConfig& cfg) {
    if (!cfg.include_exact && cfg.epsilons.empty() && cfg.ks.empty())
        throw ConfigError(cfg.name + ": no methods selected (empty sweep, include_exact=false)");

    const std::vector<Request> requests = generate_workload(cfg.workload);

    ComparisonReport report;
    report.scenario = cfg.name;
    report.seed = cfg.workload.seed;

    if (cfg.include_exact) {
        const ServingReport sr =
            run_serving(requests, cfg.engine, cfg.store, cfg.serving, MethodSpec::exact());
        report.rows.push_back(make_row("exact", 1.0, sr));
    }
    for (double eps : cfg.epsilons) {
        const ServingReport sr =
            run_serving(requests, cfg.engine, cfg.store, cfg.serving, MethodSpec::psa(eps));
        report.rows.push_back(make_row("psa", eps, sr));
    }
    for (std::size_t k : cfg.ks) {
        const ServingReport sr =
            run_serving(requests, cfg.engine, cfg.store, cfg.serving, MethodSpec::topk(k));
        report.rows.push_back(make_row("topk", static_cast<double>(k), sr));
    }
    return report;
}

std::string comparison_csv(const ComparisonReport& report) {
    std::string out =
        "method,param,mean_blocks,p99_blocks,kv_fraction,mean_coverage,min_coverage,"
        "hit_ratio,tbt_p50_ms,tbt_p99_ms,overlap_eff\n";
    for (const auto& r : report.rows) {
        out += r.method;
        out += ',';
        out += format_double(r.param);
        out += ',';
        out += format_double(r.mean_blocks);
        out += ',';
        out += format_double(r.p99_blocks);
        out += ',';
        out += format_double(r.kv_fraction);
        out += ',';
        out += format_double(r.mean_coverage);
        out += ',';
        out += format_double(r.min_coverage);
        out += ',';
        out += format_double(r.hit_ratio);
        out += ',';
        out += format_double(r.tbt_p50_ms);
        out += ',';
        out += format_double(r.tbt_p99_ms);
        out += ',';
        out += format_double(r.overlap_eff);
        out += '\n';
    }
    return out;
}

std::string comparison_json(const ComparisonReport& report) {
    Json j;
    j["scenario"] = report.scenario;
    j["seed"] = report.seed;
    j["rows"] = Json::array();
    for (const auto& r : report.rows) {
        Json row;
        row["method"] = r.method;
        row["param"] = r.param;
        row["mean_blocks"] = r.mean_blocks;
        row["p99_blocks"] = r.p99_blocks;
        row["kv_fraction"] = r.kv_fraction;
        row["mean_coverage"] = r.mean_coverage;
        row["min_coverage"] = r.min_coverage;
        row["hit_ratio"] = r.hit_ratio;
        row["tbt_p50_ms"] = r.tbt_p50_ms;
        row["tbt_p99_ms"] = r.tbt_p99_ms;
        row["overlap_eff"] = r.overlap_eff;
        j["rows"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

namespace {

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Per-query coverage curve: coverage_at(k) = share of total softmax mass in
// the k largest-mass blocks, computed in double precision.
struct CoverageCurve {
    std::vector<double> prefix_log;  // prefix_log[k-1] = log mass of top k blocks
    double total_log = 0.0;

    double at(std::size_t k) const {
        if (k == 0) return 0.0;
        if (k >= prefix_log.size()) return 1.0;
        return std::exp(prefix_log[k - 1] - total_log);
    }
    std::size_t n_blocks() const { return prefix_log.size(); }
};

}  // namespace

TradeoffReport run_tradeoff(const ScenarioConfig& cfg) {
    const std::vector<Request> requests = generate_workload(cfg.workload);
    const double target = cfg.target_coverage;
    const double scale = cfg.engine.scale_for(static_cast<std::size_t>(cfg.workload.dim));

    // Index each request's blocks by id for direct oracle evaluation.
    std::vector<CoverageCurve> curves;
    std::size_t max_blocks = 0;
    for (const auto& req : requests) {
        std::map<BlockId, const KVBlock*> by_id;
        for (const auto& b : req.blocks) by_id[b->block_id] = b.get();
        for (std::int32_t t = 0; t < req.decode_steps; ++t) {
            for (std::size_t l = 0; l < req.layer_blocks.size(); ++l) {
                const HeadVector& q = req.step_queries[static_cast<std::size_t>(t)][l];
                std::vector<double> masses;
                masses.reserve(req.layer_blocks[l].size());
                for (BlockId id : req.layer_blocks[l])
                    masses.push_back(block_log_as_oracle(q, *by_id.at(id), scale));
                std::sort(masses.begin(), masses.end(), std::greater<>());
                CoverageCurve curve;
                curve.prefix_log.resize(masses.size());
                double acc = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < masses.size(); ++i) {
                    acc = log_add(acc, masses[i]);
                    curve.prefix_log[i] = acc;
                }
                curve.total_log = acc;
                max_blocks = std::max(max_blocks, curve.n_blocks());
                curves.push_back(std::move(curve));
            }
        }
    }
    if (curves.empty()) throw Error("tradeoff: workload produced no queries");

    const auto worst_coverage = [&](std::size_t k) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& c : curves) worst = std::min(worst, c.at(std::min(k, c.n_blocks())));
        return worst;
    };

    // Smallest uniform top-k meeting the target for every query; the
    // predicate is monotone in k, so bisect.
    std::size_t lo = 1, hi = max_blocks;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (worst_coverage(mid) >= target) hi = mid;
        else lo = mid + 1;
    }
    const std::size_t k_min = lo;
    if (worst_coverage(k_min) < target)
        throw Error("tradeoff: bisection failed to reach the coverage target");
    if (k_min > 1 && worst_coverage(k_min - 1) >= target)
        throw Error("tradeoff: reported k is not minimal");

    // PSA at epsilon = target over the same queries, through a real store.
    PSAConfig engine = cfg.engine;
    engine.epsilon = target;
    engine.audit_coverage = true;
    StoreOptions sopts = cfg.store;
    sopts.n_layers = cfg.workload.n_layers;
    TieredBlockStore store(sopts);
    for (const auto& req : requests)
        for (const auto& b : req.blocks) store.put_block(b, req.request_id);

    std::vector<double> blocks_samples;
    double coverage_sum = 0.0;
    for (const auto& req : requests) {
        for (std::int32_t t = 0; t < req.decode_steps; ++t) {
            for (std::size_t l = 0; l < req.layer_blocks.size(); ++l) {
                const PSAResult res =
                    psa_attention(req.step_queries[static_cast<std::size_t>(t)][l],
                                  req.layer_blocks[l], engine, store);
                blocks_samples.push_back(static_cast<double>(res.blocks_processed));
                coverage_sum += res.true_coverage ? *res.true_coverage : res.estimated_coverage;
            }
        }
    }

    TradeoffReport rep;
    rep.scenario = cfg.name;
    rep.target_coverage = target;
    rep.n_queries = curves.size();
    rep.max_blocks = max_blocks;
    rep.k_min = k_min;
    rep.worst_coverage_at_kmin = worst_coverage(k_min);
    rep.worst_coverage_below_kmin = k_min > 1 ? worst_coverage(k_min - 1) : 0.0;
    double mean_blocks = 0.0;
    for (double b : blocks_samples) mean_blocks += b;
    mean_blocks /= static_cast<double>(blocks_samples.size());
    rep.psa_mean_blocks = mean_blocks;
    rep.psa_p99_blocks = percentile(blocks_samples, 99.0);
    rep.psa_mean_coverage = coverage_sum / static_cast<double>(blocks_samples.size());
    rep.block_access_ratio = static_cast<double>(k_min) / mean_blocks;
    return rep;
}

std::string tradeoff_json(const TradeoffReport& report) {
    Json j;
    j["scenario"] = report.scenario;
    j["target_coverage"] = report.target_coverage;
    j["n_queries"] = report.n_queries;
    j["max_blocks"] = report.max_blocks;
    j["k_min"] = report.k_min;
    j["worst_coverage_at_kmin"] = report.worst_coverage_at_kmin;
    j["worst_coverage_below_kmin"] = report.worst_coverage_below_kmin;
    j["psa_mean_blocks"] = report.psa_mean_blocks;
    j["psa_p99_blocks"] = report.psa_p99_blocks;
    j["psa_mean_coverage"] = report.psa_mean_coverage;
    j["block_access_ratio"] = report.block_access_ratio;
    return j.dump(2) + "\n";
}

namespace {

std::filesystem::path resolve_out_dir(const ScenarioConfig& cfg) {
    if (const char* env = std::getenv("PSATTN_OUT_DIR"); env != nullptr && *env != '\0')
        return std::filesystem::path(env);
    return std::filesystem::path(cfg.out_dir);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace

int cmd_run(const std::string& cfg_path) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(cfg_path);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    }
    try {
        const ComparisonReport report = run_scenario(cfg);
        const std::filesystem::path dir = resolve_out_dir(cfg);
        std::cout << comparison_csv(report);
        if (cfg.format == ReportFormat::CSV || cfg.format == ReportFormat::Both) {
            const auto p = dir / (cfg.name + ".csv");
            write_file(p, comparison_csv(report));
            std::cout << "wrote " << p.string() << "\n";
        }
        if (cfg.format == ReportFormat::JSON || cfg.format == ReportFormat::Both) {
            const auto p = dir / (cfg.name + ".json");
            write_file(p, comparison_json(report));
            std::cout << "wrote " << p.string() << "\n";
        }
        return 0;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}

int cmd_tradeoff(const std::string& cfg_path) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(cfg_path);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    }
    try {
        const TradeoffReport report = run_tradeoff(cfg);
        const std::filesystem::path dir = resolve_out_dir(cfg);
        const auto p = dir / (cfg.name + ".tradeoff.json");
        write_file(p, tradeoff_json(report));
        std::cout << "target_coverage=" << format_double(report.target_coverage)
                  << " k_min=" << report.k_min
                  << " psa_mean_blocks=" << format_double(report.psa_mean_blocks)
                  << " block_access_ratio=" << format_double(report.block_access_ratio) << "\n";
        std::cout << "wrote " << p.string() << "\n";
        return 0;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}

}  // namespace psattn
