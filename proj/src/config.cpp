#include "uod/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace uod {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
    const std::string v = unquote(trim(raw));
    T out{};
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last || v.empty()) {
        throw ConfigError(key + ": cannot parse '" + raw + "' as a number");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& raw) {
    const std::string v = unquote(trim(raw));
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + raw + "' as a number");
    }
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const std::string v = unquote(trim(raw));
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

KRange parse_k_range(const std::string& key, const std::string& raw) {
    std::string v = unquote(trim(raw));
    std::string a;
    std::string b;
    if (!v.empty() && v.front() == '[' && v.back() == ']') {
        const auto comma = v.find(',');
        if (comma == std::string::npos) throw ConfigError(key + ": expected [min, max]");
        a = v.substr(1, comma - 1);
        b = v.substr(comma + 1, v.size() - comma - 2);
    } else {
        const auto dots = v.find("..");
        if (dots == std::string::npos) throw ConfigError(key + ": expected [min, max] or min..max");
        a = v.substr(0, dots);
        b = v.substr(dots + 2);
    }
    return {parse_number<std::size_t>(key, trim(a)), parse_number<std::size_t>(key, trim(b))};
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

template <typename F>
Setter size_field(F member) {
    return [member](PipelineConfig& c, const std::string& k, const std::string& v) {
        c.*member = parse_number<std::size_t>(k, v);
    };
}

template <typename F>
Setter double_field(F member) {
    return [member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"archive_dir", [](PipelineConfig& c, const std::string&, const std::string& v) { c.archive_dir = unquote(trim(v)); }},
        {"output_dir", [](PipelineConfig& c, const std::string&, const std::string& v) { c.output_dir = unquote(trim(v)); }},
        {"n_eigenvectors", size_field(&PipelineConfig::n_eigenvectors)},
        {"upsample", size_field(&PipelineConfig::upsample)},
        {"affinity_floor", double_field(&PipelineConfig::affinity_floor)},
        {"binarize", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.binarize = parse_bool(k, v); }},
        {"binarize_tau", double_field(&PipelineConfig::binarize_tau)},
        {"dense_below", size_field(&PipelineConfig::dense_below)},
        {"thresh", double_field(&PipelineConfig::thresh)},
        {"k_max", size_field(&PipelineConfig::k_max)},
        {"local_n_init", size_field(&PipelineConfig::local_n_init)},
        {"alpha", double_field(&PipelineConfig::alpha)},
        {"iou_threshold", double_field(&PipelineConfig::iou_threshold)},
        {"top_p", size_field(&PipelineConfig::top_p)},
        {"bottom_q", size_field(&PipelineConfig::bottom_q)},
        {"max_considered", size_field(&PipelineConfig::max_considered)},
        {"aggregation",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             const std::string s = unquote(trim(v));
             if (s == "sum") {
                 c.aggregation = NeighborAggregation::sum;
             } else if (s == "average") {
                 c.aggregation = NeighborAggregation::average;
             } else {
                 throw ConfigError(k + ": expected sum or average, got '" + s + "'");
             }
         }},
        {"t_bg", double_field(&PipelineConfig::t_bg)},
        {"k_range", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.k_range = parse_k_range(k, v); }},
        {"silhouette_sample", size_field(&PipelineConfig::silhouette_sample)},
        {"global_n_init", size_field(&PipelineConfig::global_n_init)},
        {"temperature", double_field(&PipelineConfig::temperature)},
        {"min_part_area", size_field(&PipelineConfig::min_part_area)},
        {"dilation_radius", size_field(&PipelineConfig::dilation_radius)},
        {"min_instance_area_fraction", double_field(&PipelineConfig::min_instance_area_fraction)},
        {"region_feature_mode",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             try {
                 c.region_feature_mode = region_feature_mode_from_string(unquote(trim(v)));
             } catch (const std::exception& e) {
                 throw ConfigError(k + ": " + e.what());
             }
         }},
        {"seed",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.seed = parse_number<std::uint64_t>(k, v);
             c.seed_set = true;
         }},
        {"jobs", size_field(&PipelineConfig::jobs)},
    };
    return table;
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(config, key, value);
}

void PipelineConfig::validate() const {
    require(seed_set, "seed", "must be set explicitly");
    require(n_eigenvectors >= 2, "n_eigenvectors", "must be at least 2");
    require(upsample >= 1, "upsample", "must be at least 1");
    require(affinity_floor > 0.0 && affinity_floor <= 1.0, "affinity_floor", "must lie in (0, 1]");
    require(binarize_tau > -1.0 && binarize_tau < 1.0, "binarize_tau", "must lie in (-1, 1)");
    require(thresh > 1.0, "thresh", "must exceed 1");
    require(k_max >= 2, "k_max", "must be at least 2");
    require(local_n_init >= 1, "local_n_init", "must be at least 1");
    require(alpha >= 0.0 && alpha <= 1.0, "alpha", "must lie in [0, 1]");
    require(iou_threshold > 0.0 && iou_threshold < 1.0, "iou_threshold", "must lie in (0, 1)");
    require(top_p >= 1, "top_p", "must be at least 1");
    require(bottom_q >= 1, "bottom_q", "must be at least 1");
    require(max_considered >= 2, "max_considered", "must be at least 2");
    require(t_bg > 0.0 && t_bg <= 2.0, "t_bg", "must lie in (0, 2]");
    require(k_range.min >= 2 && k_range.min <= k_range.max, "k_range", "must satisfy 2 <= min <= max");
    require(silhouette_sample >= 2, "silhouette_sample", "must be at least 2");
    require(global_n_init >= 1, "global_n_init", "must be at least 1");
    require(temperature > 0.0, "temperature", "must be positive");
    require(min_part_area >= 1, "min_part_area", "must be at least 1");
    require(min_instance_area_fraction >= 0.0 && min_instance_area_fraction < 1.0, "min_instance_area_fraction",
            "must lie in [0, 1)");
}

RankingParams PipelineConfig::ranking() const {
    RankingParams p;
    p.alpha = alpha;
    p.iou_threshold = iou_threshold;
    p.top_p = top_p;
    p.bottom_q = bottom_q;
    p.max_considered = max_considered;
    p.aggregation = aggregation;
    return p;
}

FitParams PipelineConfig::fit() const {
    FitParams p;
    p.k_range = k_range;
    p.t_bg = t_bg;
    p.seed = seed;
    p.select.silhouette_sample = silhouette_sample;
    p.select.kmeans.n_init = global_n_init;
    return p;
}

AssemblyParams PipelineConfig::assembly() const {
    AssemblyParams p;
    p.min_part_area = min_part_area;
    p.merge.dilation_radius = dilation_radius;
    p.merge.min_instance_area_fraction = min_instance_area_fraction;
    p.feature_mode = region_feature_mode;
    return p;
}

nlohmann::json PipelineConfig::snapshot() const {
    return {{"archive_dir", archive_dir.string()},
            {"output_dir", output_dir.string()},
            {"n_eigenvectors", n_eigenvectors},
            {"upsample", upsample},
            {"affinity_floor", affinity_floor},
            {"binarize", binarize},
            {"binarize_tau", binarize_tau},
            {"dense_below", dense_below},
            {"thresh", thresh},
            {"k_max", k_max},
            {"local_n_init", local_n_init},
            {"alpha", alpha},
            {"iou_threshold", iou_threshold},
            {"top_p", top_p},
            {"bottom_q", bottom_q},
            {"max_considered", max_considered},
            {"aggregation", aggregation == NeighborAggregation::sum ? "sum" : "average"},
            {"t_bg", t_bg},
            {"k_range", {k_range.min, k_range.max}},
            {"silhouette_sample", silhouette_sample},
            {"global_n_init", global_n_init},
            {"temperature", temperature},
            {"min_part_area", min_part_area},
            {"dilation_radius", dilation_radius},
            {"min_instance_area_fraction", min_instance_area_fraction},
            {"region_feature_mode", to_string(region_feature_mode)},
            {"seed", seed}};
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
    PipelineConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        try {
            apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

PipelineConfig config_from_snapshot(const nlohmann::json& snapshot) {
    PipelineConfig c;
    if (!snapshot.is_object()) throw ConfigError("config snapshot must be an object");
    for (const auto& [key, value] : snapshot.items()) {
        if (key == "k_range") {
            if (!value.is_array() || value.size() != 2) throw ConfigError("k_range: expected [min, max]");
            c.k_range = {value[0].get<std::size_t>(), value[1].get<std::size_t>()};
        } else if (value.is_string()) {
            apply_setting(c, key, value.get<std::string>());
        } else {
            apply_setting(c, key, value.dump());
        }
    }
    return c;
}

}  // namespace uod
