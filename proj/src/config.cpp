#include "ddvc/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ddvc::cfg {

namespace {

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

long long parse_int(const std::string& key, const std::string& v) {
    size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty())
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> kFields = [] {
        std::map<std::string, Field> f;
        auto str = [&](const std::string& key, std::string RunConfig::*m) {
            f[key] = {[m](RunConfig& c, const std::string& v) { c.*m = v; },
                      [m](const RunConfig& c) { return c.*m; }};
        };
        auto num = [&](const std::string& key, int RunConfig::*m) {
            f[key] = {[key, m](RunConfig& c, const std::string& v) {
                          c.*m = int(parse_int(key, v));
                      },
                      [m](const RunConfig& c) { return std::to_string(c.*m); }};
        };
        auto choice = [&](const std::string& key, std::string RunConfig::*m,
                          std::vector<std::string> allowed) {
            f[key] = {[key, m, allowed](RunConfig& c, const std::string& v) {
                          if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
                              std::string opts;
                              for (auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
                              throw ConfigError("config: key '" + key + "' must be one of {" +
                                                opts + "}, got '" + v + "'");
                          }
                          c.*m = v;
                      },
                      [m](const RunConfig& c) { return c.*m; }};
        };
        choice("codec", &RunConfig::codec, {"deep", "classic"});
        choice("model", &RunConfig::model, {"toy", "full"});
        choice("metric", &RunConfig::metric, {"mse", "msssim"});
        choice("format", &RunConfig::format, {"png", "yuv"});
        choice("motion", &RunConfig::motion, {"translate", "rotate", "zoom"});
        num("lambda_id", &RunConfig::lambda_id);
        num("quality", &RunConfig::quality);
        num("gop", &RunConfig::gop);
        num("threads", &RunConfig::threads);
        num("width", &RunConfig::width);
        num("height", &RunConfig::height);
        num("max_frames", &RunConfig::max_frames);
        num("stage", &RunConfig::stage);
        num("epochs", &RunConfig::epochs);
        num("batch", &RunConfig::batch);
        num("crop", &RunConfig::crop);
        num("triplets", &RunConfig::triplets);
        num("frames", &RunConfig::frames);
        num("size", &RunConfig::size);
        f["seed"] = {[](RunConfig& c, const std::string& v) {
                         c.seed = uint32_t(parse_int("seed", v));
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
        f["zero_si"] = {[](RunConfig& c, const std::string& v) {
                            c.zero_si = parse_bool("zero_si", v);
                        },
                        [](const RunConfig& c) { return c.zero_si ? "true" : "false"; }};
        str("input", &RunConfig::input);
        str("output", &RunConfig::output);
        str("ckpt", &RunConfig::ckpt);
        str("ckpt_init", &RunConfig::ckpt_init);
        str("ref", &RunConfig::ref);
        str("rec", &RunConfig::rec);
        str("bits", &RunConfig::bits);
        return f;
    }();
    return kFields;
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> row(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        size_t prev = row[0];
        row[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t cur = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               prev + (a[i - 1] == b[j - 1] ? 0 : 1)});
            prev = cur;
        }
    }
    return row[b.size()];
}

void apply(RunConfig& c, const std::string& key, const std::string& value) {
    auto it = fields().find(key);
    if (it == fields().end()) {
        std::string best;
        size_t bd = size_t(-1);
        for (auto& [k, _] : fields()) {
            size_t d = edit_distance(key, k);
            if (d < bd) bd = d, best = k;
        }
        throw ConfigError("config: unknown key '" + key + "' (did you mean '" + best + "'?)");
    }
    it->second.set(c, value);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (auto& [k, _] : fields()) out.push_back(k);
    return out;
}

RunConfig parse_config_text(const std::string& text, const Overrides& overrides) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not 'key = value': " + line);
        apply(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (auto& [k, v] : overrides) apply(c, k, v);
    return c;
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
    std::string text;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("config: cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, overrides);
}

std::string to_text(const RunConfig& c) {
    std::string out;
    for (auto& [k, field] : fields()) out += k + " = " + field.get(c) + "\n";
    return out;
}

int effective_threads(const RunConfig& c) {
    int n = c.threads;
    if (n <= 0) {
#ifdef _OPENMP
        n = omp_get_max_threads();
#else
        n = 1;
#endif
    }
    if (const char* env = std::getenv("DDVC_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(1, n);
}

}  // namespace ddvc::cfg
