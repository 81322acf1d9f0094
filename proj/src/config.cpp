#include "qmelt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace qmelt::cfg {

model::ModelParams RunConfig::physical() const {
    const model::ScaleParam scale(aleph);
    return mode == ScalingMode::Standard ? model::rescale_params(tilde, scale)
                                         : model::dual_rescale_params(tilde, scale);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["model"] = {{"omega_1", tilde.omega[0]},   {"omega_2", tilde.omega[1]},
                  {"U_1", tilde.kerr[0]},        {"U_2", tilde.kerr[1]},
                  {"J", tilde.tunnel},           {"gamma_1", tilde.pump[0]},
                  {"gamma_2", tilde.pump[1]},    {"eta_1", tilde.two_photon_loss[0]},
                  {"eta_2", tilde.two_photon_loss[1]},
                  {"kappa_1", tilde.one_photon_loss[0]},
                  {"kappa_2", tilde.one_photon_loss[1]},
                  {"n_th", tilde.thermal_occupation}};
    j["scaling"] = {{"aleph", aleph}, {"mode", mode == ScalingMode::Standard ? "standard" : "dual"}};
    j["ensemble"] = {{"n_traj", n_traj}, {"dt", dt},     {"t_end", t_end},
                     {"stride", stride}, {"seed", seed}};
    j["provenance"] = provenance;
    return j;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": value for '" + key +
                          "' is not a number: '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& v, const std::string& key, int line) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("line " + std::to_string(line) + ": value for '" + key +
                          "' is not a non-negative integer: '" + v + "'");
    }
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig config;

    using Setter = std::function<void(RunConfig&, const std::string&, int)>;
    const std::map<std::string, std::map<std::string, Setter>> schema = {
        {"model",
         {
             {"omega_1", [](RunConfig& c, const std::string& v, int l) { c.tilde.omega[0] = parse_double(v, "omega_1", l); }},
             {"omega_2", [](RunConfig& c, const std::string& v, int l) { c.tilde.omega[1] = parse_double(v, "omega_2", l); }},
             {"U_1", [](RunConfig& c, const std::string& v, int l) { c.tilde.kerr[0] = parse_double(v, "U_1", l); }},
             {"U_2", [](RunConfig& c, const std::string& v, int l) { c.tilde.kerr[1] = parse_double(v, "U_2", l); }},
             {"J", [](RunConfig& c, const std::string& v, int l) { c.tilde.tunnel = parse_double(v, "J", l); }},
             {"gamma_1", [](RunConfig& c, const std::string& v, int l) { c.tilde.pump[0] = parse_double(v, "gamma_1", l); }},
             {"gamma_2", [](RunConfig& c, const std::string& v, int l) { c.tilde.pump[1] = parse_double(v, "gamma_2", l); }},
             {"eta_1", [](RunConfig& c, const std::string& v, int l) { c.tilde.two_photon_loss[0] = parse_double(v, "eta_1", l); }},
             {"eta_2", [](RunConfig& c, const std::string& v, int l) { c.tilde.two_photon_loss[1] = parse_double(v, "eta_2", l); }},
             {"kappa_1", [](RunConfig& c, const std::string& v, int l) { c.tilde.one_photon_loss[0] = parse_double(v, "kappa_1", l); }},
             {"kappa_2", [](RunConfig& c, const std::string& v, int l) { c.tilde.one_photon_loss[1] = parse_double(v, "kappa_2", l); }},
             {"n_th", [](RunConfig& c, const std::string& v, int l) { c.tilde.thermal_occupation = parse_double(v, "n_th", l); }},
         }},
        {"scaling",
         {
             {"aleph",
              [](RunConfig& c, const std::string& v, int l) {
                  c.aleph = parse_double(v, "aleph", l);
                  if (!(c.aleph > 0.0)) {
                      throw ConfigError("line " + std::to_string(l) + ": aleph must be positive");
                  }
              }},
             {"mode",
              [](RunConfig& c, const std::string& v, int l) {
                  if (v == "standard") {
                      c.mode = ScalingMode::Standard;
                  } else if (v == "dual") {
                      c.mode = ScalingMode::Dual;
                  } else {
                      throw ConfigError("line " + std::to_string(l) +
                                        ": mode must be 'standard' or 'dual', got '" + v + "'");
                  }
              }},
         }},
        {"ensemble",
         {
             {"n_traj",
              [](RunConfig& c, const std::string& v, int l) {
                  c.n_traj = parse_uint(v, "n_traj", l);
                  if (c.n_traj < 1) {
                      throw ConfigError("line " + std::to_string(l) + ": n_traj must be >= 1");
                  }
              }},
             {"dt", [](RunConfig& c, const std::string& v, int l) { c.dt = parse_double(v, "dt", l); }},
             {"t_end", [](RunConfig& c, const std::string& v, int l) { c.t_end = parse_double(v, "t_end", l); }},
             {"stride", [](RunConfig& c, const std::string& v, int l) { c.stride = parse_uint(v, "stride", l); }},
             {"seed", [](RunConfig& c, const std::string& v, int l) { c.seed = parse_uint(v, "seed", l); }},
         }},
    };

    for (const auto& [section, keys] : schema) {
        for (const auto& [key, _] : keys) {
            config.provenance[section + "." + key] = "default";
        }
    }

    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!schema.count(section)) {
                throw ConfigError(origin + " line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": key '" + key + "' outside any section");
        }
        const auto& keys = schema.at(section);
        const auto it = keys.find(key);
        if (it == keys.end()) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": unknown key '" +
                              key + "' in section [" + section + "]");
        }
        it->second(config, value, line_no);
        config.provenance[section + "." + key] = "file";
    }

    try {
        config.tilde.validate();
    } catch (const std::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

}  // namespace qmelt::cfg
