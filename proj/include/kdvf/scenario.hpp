#pragma once
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "grid.hpp"

namespace kdvf {

struct Scenario {
    std::string name = "scenario";
    std::string model = "linear";
    double L = 1.5;
    int n = 150;
    double dt = 1e-3;
    double T = 10.0;
    double theta = 1.0;
    int record_every = 10;
    double lambda = 1.0;
    bool k_auto = true;
    double k = 0.0;
    double r = 0.0;
    double eta0 = 0.0;
    std::string d1_spec = "zero";
    std::string d2_spec = "zero";
    std::string w0_spec = "zero";
    std::vector<std::string> checks;
    std::uint64_t seed = 1;
    bool override_safety = false;
    double gain_safety = 1.0;
    double e_tol = 1e-3;
    double x_fraction = 0.01;
    bool export_kernels = false;
    std::string base_dir = ".";

    bool nonlinear() const { return model == "nonlinear"; }
};

inline const std::vector<std::string>& check_vocabulary()
{
    static const std::vector<std::string> v = {"regulation", "dissipation", "equilibrium", "bounded"};
    return v;
}

namespace detail {

inline std::string trim(const std::string& s)
{
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_words(const std::string& s, char sep = ' ')
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty())
            out.push_back(cur);
    }
    return out;
}

struct Reader {
    const boost::property_tree::ptree& pt;
    std::vector<std::string>& errors;

    template <class T>
    void get(const std::string& key, T& out)
    {
        auto v = pt.get_optional<std::string>(key);
        if (!v)
            return;
        std::string s = trim(*v);
        try {
            std::size_t pos = 0;
            if constexpr (std::is_same_v<T, int>)
                out = std::stoi(s, &pos);
            else if constexpr (std::is_same_v<T, std::uint64_t>)
                out = std::stoull(s, &pos);
            else
                out = std::stod(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument(s);
        } catch (const std::exception&) {
            errors.push_back("field " + key + ": cannot read '" + s + "' as a number");
        }
    }

    void get_str(const std::string& key, std::string& out)
    {
        if (auto v = pt.get_optional<std::string>(key))
            out = trim(*v);
    }

    void get_bool(const std::string& key, bool& out)
    {
        auto v = pt.get_optional<std::string>(key);
        if (!v)
            return;
        std::string s = trim(*v);
        if (s == "true" || s == "1" || s == "yes")
            out = true;
        else if (s == "false" || s == "0" || s == "no")
            out = false;
        else
            errors.push_back("field " + key + ": expected true or false, got '" + s + "'");
    }
};

} // namespace detail

// INI-like scenario file. Unknown sections or keys are reported as errors.
inline Scenario parse_scenario(std::istream& is, const std::string& origin = "<input>")
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    static const std::vector<std::pair<std::string, std::vector<std::string>>> known = {
        {"scenario", {"name", "model", "seed"}},
        {"grid", {"L", "n"}},
        {"time", {"dt", "T", "theta", "record_every"}},
        {"design", {"lambda", "k", "r", "override_safety", "gain_safety"}},
        {"inputs", {"d1", "d2", "w0", "eta0"}},
        {"checks", {"list", "e_tol", "x_fraction"}},
        {"output", {"export_kernels"}},
    };
    std::vector<std::string> errors;
    for (auto& [sec, sub] : tree) {
        auto it = std::find_if(known.begin(), known.end(), [&](auto& p) { return p.first == sec; });
        if (it == known.end()) {
            errors.push_back("unknown section [" + sec + "]");
            continue;
        }
        for (auto& [key, val] : sub)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                errors.push_back("unknown field " + sec + "." + key);
    }

    Scenario s;
    detail::Reader rd{tree, errors};
    rd.get_str("scenario.name", s.name);
    rd.get_str("scenario.model", s.model);
    rd.get("scenario.seed", s.seed);
    rd.get("grid.L", s.L);
    rd.get("grid.n", s.n);
    rd.get("time.dt", s.dt);
    rd.get("time.T", s.T);
    rd.get("time.theta", s.theta);
    rd.get("time.record_every", s.record_every);
    rd.get("design.lambda", s.lambda);
    std::string kstr = "auto";
    rd.get_str("design.k", kstr);
    if (kstr == "auto") {
        s.k_auto = true;
    } else {
        s.k_auto = false;
        rd.get("design.k", s.k);
    }
    rd.get("design.r", s.r);
    rd.get_bool("design.override_safety", s.override_safety);
    rd.get("design.gain_safety", s.gain_safety);
    rd.get_str("inputs.d1", s.d1_spec);
    rd.get_str("inputs.d2", s.d2_spec);
    rd.get_str("inputs.w0", s.w0_spec);
    rd.get("inputs.eta0", s.eta0);
    std::string checks;
    rd.get_str("checks.list", checks);
    s.checks = detail::split_words(checks, ',');
    rd.get("checks.e_tol", s.e_tol);
    rd.get("checks.x_fraction", s.x_fraction);
    rd.get_bool("output.export_kernels", s.export_kernels);

    if (s.model != "linear" && s.model != "nonlinear")
        errors.push_back("field scenario.model: expected linear or nonlinear, got '" + s.model + "'");
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
        errors.push_back("field scenario.name: must be a plain file stem");
    auto finite_pos = [&](double v, const char* f) {
        if (!(v > 0.0) || !std::isfinite(v))
            errors.push_back(std::string("field ") + f + ": must be positive and finite");
    };
    finite_pos(s.L, "grid.L");
    finite_pos(s.dt, "time.dt");
    finite_pos(s.lambda, "design.lambda");
    finite_pos(s.gain_safety, "design.gain_safety");
    finite_pos(s.e_tol, "checks.e_tol");
    finite_pos(s.x_fraction, "checks.x_fraction");
    if (!(s.T >= 0.0) || !std::isfinite(s.T))
        errors.push_back("field time.T: must be non-negative and finite");
    if (s.n < 8)
        errors.push_back("field grid.n: must be at least 8");
    if (!(s.theta >= 0.5 && s.theta <= 1.0))
        errors.push_back("field time.theta: must lie in [0.5, 1]");
    if (s.record_every < 1)
        errors.push_back("field time.record_every: must be at least 1");
    if (!s.k_auto && !(s.k > 0.0 && std::isfinite(s.k)))
        errors.push_back("field design.k: must be positive or auto");
    if (!std::isfinite(s.r) || !std::isfinite(s.eta0))
        errors.push_back("fields design.r and inputs.eta0 must be finite");
    for (auto& c : s.checks)
        if (std::find(check_vocabulary().begin(), check_vocabulary().end(), c) == check_vocabulary().end())
            errors.push_back("field checks.list: unknown check '" + c + "'");
    if (s.d2_spec != "zero")
        errors.push_back("field inputs.d2: the slope at x = L is the control input; only 'zero' is accepted");

    if (!errors.empty()) {
        std::string msg = origin + ": invalid scenario";
        for (auto& e : errors)
            msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return s;
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read scenario " + path);
    Scenario s = parse_scenario(f, path);
    auto slash = path.find_last_of('/');
    s.base_dir = slash == std::string::npos ? "." : path.substr(0, slash);
    return s;
}

namespace detail {

inline double uniform01(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

inline Field read_field_file(const std::string& path, const Grid& g)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read field file " + path);
    std::vector<double> vals;
    std::string line;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        auto cells = split_words(line, ',');
        vals.push_back(std::stod(cells.back()));
    }
    if (static_cast<int>(vals.size()) != g.nodes())
        throw ConfigError("field file " + path + " has " + std::to_string(vals.size()) + " values, grid needs " +
                          std::to_string(g.nodes()));
    return Field(g, Eigen::Map<Vec>(vals.data(), vals.size()));
}

inline double num(const std::vector<std::string>& w, std::size_t i, const std::string& spec)
{
    if (i >= w.size())
        throw ConfigError("descriptor '" + spec + "' is missing a parameter");
    try {
        return std::stod(w[i]);
    } catch (const std::exception&) {
        throw ConfigError("descriptor '" + spec + "': cannot read '" + w[i] + "'");
    }
}

} // namespace detail

// zero | constant a | sine a f | file path            (distributed input)
// zero | gaussian c w a | bump norm | sine a f | random amp modes | file path   (initial state)
// `sine a f` is a sin(f pi x / L); `bump norm` is sin^2(pi x / L) scaled to the given L2 norm.
inline Field make_field(const std::string& spec, const Grid& g, bool initial, std::uint64_t seed,
                        const std::string& base_dir = ".")
{
    auto w = detail::split_words(spec);
    if (w.empty())
        throw ConfigError("empty field descriptor");
    const std::string& kind = w[0];
    const double L = g.L;
    Field f(g);
    if (kind == "zero") {
    } else if (kind == "constant" && !initial) {
        double a = detail::num(w, 1, spec);
        f.v.setConstant(a);
    } else if (kind == "sine") {
        double a = detail::num(w, 1, spec), fr = detail::num(w, 2, spec);
        f = Field::sample(g, [&](double x) { return a * std::sin(fr * M_PI * x / L); });
    } else if (kind == "gaussian" && initial) {
        double c = detail::num(w, 1, spec), wd = detail::num(w, 2, spec), a = detail::num(w, 3, spec);
        if (!(wd > 0.0))
            throw ConfigError("gaussian width must be positive");
        f = Field::sample(g, [&](double x) { return a * std::exp(-0.5 * (x - c) * (x - c) / (wd * wd)); });
    } else if (kind == "bump" && initial) {
        double nrm = detail::num(w, 1, spec);
        f = Field::sample(g, [&](double x) { return std::pow(std::sin(M_PI * x / L), 2); });
        f.v *= nrm / l2_norm(f);
    } else if (kind == "random" && initial) {
        double a = detail::num(w, 1, spec);
        int modes = static_cast<int>(detail::num(w, 2, spec));
        if (modes < 1)
            throw ConfigError("random descriptor needs at least one mode");
        std::mt19937_64 rng(seed);
        std::vector<double> c(modes);
        for (auto& ci : c)
            ci = 2.0 * detail::uniform01(rng) - 1.0;
        f = Field::sample(g, [&](double x) {
            double s = 0.0;
            for (int m = 0; m < modes; ++m)
                s += c[m] * std::sin((m + 1) * M_PI * x / L) / (m + 1);
            return a * s;
        });
    } else if (kind == "file") {
        if (w.size() < 2)
            throw ConfigError("file descriptor needs a path");
        std::string p = w[1][0] == '/' ? w[1] : base_dir + "/" + w[1];
        f = detail::read_field_file(p, g);
    } else {
        throw ConfigError("unknown field descriptor '" + spec + "'");
    }
    if (!f.v.allFinite())
        throw ConfigError("field descriptor '" + spec + "' produced non-finite values");
    if (initial) {
        f.v[0] = 0.0;
        f.v[g.n] = 0.0;
    }
    return f;
}

} // namespace kdvf
