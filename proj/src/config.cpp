#include "mpath/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mpath {

using nlohmann::json;

double amplitude_db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
double power_db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace {

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 json_vec(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

const char* mode_name(GenMode m) {
    switch (m) {
        case GenMode::fully_synthetic: return "fully_synthetic";
        case GenMode::stochastic_ceda: return "stochastic_ceda";
        case GenMode::geometric_ceda: return "geometric_ceda";
    }
    return "fully_synthetic";
}

GenMode parse_mode(const std::string& s) {
    if (s == "fully_synthetic") return GenMode::fully_synthetic;
    if (s == "stochastic_ceda") return GenMode::stochastic_ceda;
    if (s == "geometric_ceda") return GenMode::geometric_ceda;
    throw ConfigError("unknown mode: " + s);
}

ScenarioConfig from_json(const json& j) {
    ScenarioConfig c = dense_scenario();
    if (j.contains("preset")) {
        const auto p = j.at("preset").get<std::string>();
        if (p == "geometric")
            c = geometric_scenario();
        else if (p == "dense_dnr25")
            c = dense_dnr25_scenario();
        else if (p != "dense")
            throw ConfigError("unknown preset: " + p);
    }
    read(j, "name", c.name);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("anchors")) {
        c.anchors.clear();
        for (const auto& a : j.at("anchors")) c.anchors.push_back(json_vec(a));
    }
    read(j, "steps", c.steps);
    read(j, "dt", c.dt);
    read(j, "realizations", c.realizations);
    read(j, "seed", c.seed);
    if (j.contains("threshold_db")) c.threshold = amplitude_db_to_linear(j.at("threshold_db").get<double>());
    read(j, "threshold", c.threshold);
    if (j.contains("trajectory")) {
        const auto& t = j.at("trajectory");
        if (t.contains("waypoints")) {
            c.trajectory.waypoints.clear();
            for (const auto& w : t.at("waypoints")) c.trajectory.waypoints.push_back(json_vec(w));
        }
        read(t, "speed", c.trajectory.speed);
        read(t, "speed_variation", c.trajectory.speed_variation);
        read(t, "speed_period", c.trajectory.speed_period);
        read(t, "corner_radius", c.trajectory.corner_radius);
    }
    if (j.contains("olos")) {
        c.olos.clear();
        for (const auto& w : j.at("olos"))
            c.olos.push_back({w.at("first").get<int>(), w.at("last").get<int>(), w.at("anchors").get<std::vector<int>>()});
    }
    if (j.contains("truth")) {
        const auto& t = j.at("truth");
        read(t, "snr_db", c.truth.snr_db);
        read(t, "dnr_db", c.truth.dnr_db);
        read(t, "rise", c.truth.rise);
        read(t, "fall", c.truth.fall);
        read(t, "bias", c.truth.bias);
        read(t, "los_prob", c.truth.los_prob);
    }
    if (j.contains("signal")) {
        const auto& s = j.at("signal");
        read(s, "num_samples", c.signal.num_samples);
        read(s, "sample_interval", c.signal.sample_interval);
        read(s, "rolloff", c.rolloff);
        read(s, "symbol_time", c.symbol_time);
        read(s, "noise_sigma", c.noise_sigma);
    }
    if (j.contains("nlos_count")) {
        const auto s = j.at("nlos_count").get<std::string>();
        if (s != "poisson" && s != "fixed") throw ConfigError("nlos_count must be poisson or fixed");
        c.poisson_count = s == "poisson";
    }
    if (j.contains("walls")) {
        c.walls.clear();
        for (const auto& w : j.at("walls")) {
            const auto v = w.get<std::vector<double>>();
            if (v.size() != 4) throw ConfigError("wall must be [x1, y1, x2, y2]");
            c.walls.push_back({{v[0], v[1]}, {v[2], v[3]}});
        }
    }
    read(j, "max_order", c.max_order);
    if (j.contains("path_loss")) {
        const auto& p = j.at("path_loss");
        read(p, "snr_ref_db", c.path_loss.snr_ref_db);
        read(p, "ref_distance", c.path_loss.ref_distance);
        read(p, "reflection_loss_db", c.path_loss.reflection_loss_db);
    }
    if (j.contains("tracker")) {
        const auto& t = j.at("tracker");
        read(t, "particles", c.tracker.particles);
        read(t, "large_particles", c.tracker.large_particles);
        read(t, "initial_particles", c.tracker.initial_particles);
        read(t, "accel_std", c.tracker.accel_std);
        read(t, "velocity_std", c.tracker.velocity_std);
        if (t.contains("init_proposal")) {
            const auto s = t.at("init_proposal").get<std::string>();
            if (s != "ring" && s != "disc") throw ConfigError("init_proposal must be ring or disc");
            c.tracker.proposal = s == "ring" ? InitProposal::ring : InitProposal::disc;
        }
        if (t.contains("init_likelihood")) {
            const auto s = t.at("init_likelihood").get<std::string>();
            if (s != "mixture" && s != "strongest") throw ConfigError("init_likelihood must be mixture or strongest");
            c.tracker.likelihood = s == "mixture" ? InitLikelihood::mixture : InitLikelihood::strongest;
        }
    }
    if (j.contains("lost")) {
        const auto& l = j.at("lost");
        read(l, "error", c.lost_error);
        read(l, "after", c.lost_after);
        read(l, "recovery_steps", c.recovery_steps);
    }

    if (c.anchors.empty()) throw ConfigError("no anchors");
    if (c.steps < 1 || !(c.dt > 0.0)) throw ConfigError("steps must be >= 1 and dt > 0");
    if (c.trajectory.waypoints.size() < 2) throw ConfigError("trajectory needs at least two waypoints");
    if (c.trajectory.speed < 0.0) throw ConfigError("negative speed");
    if (!(c.threshold > 0.0)) throw ConfigError("threshold must be positive");
    if (c.realizations < 1) throw ConfigError("realizations must be >= 1");
    if (c.tracker.particles < 1 || c.tracker.initial_particles < 1) throw ConfigError("particle counts must be >= 1");
    for (const auto& w : c.olos) {
        if (w.first < 1 || w.last > c.steps || w.first > w.last) throw ConfigError("OLOS window outside [1, N]");
        for (int a : w.anchors)
            if (a < 0 || a >= static_cast<int>(c.anchors.size())) throw ConfigError("OLOS anchor index out of range");
    }
    if (c.mode != GenMode::geometric_ceda && c.truth.snr_db.size() != c.anchors.size())
        throw ConfigError("truth.snr_db needs one entry per anchor");
    return c;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
    try {
        return from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_json_text(ss.str());
}

std::string scenario_to_json_text(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["mode"] = mode_name(c.mode);
    j["anchors"] = json::array();
    for (const auto& a : c.anchors) j["anchors"].push_back(vec_json(a));
    j["steps"] = c.steps;
    j["dt"] = c.dt;
    j["realizations"] = c.realizations;
    j["seed"] = c.seed;
    j["threshold"] = c.threshold;
    json t;
    t["waypoints"] = json::array();
    for (const auto& w : c.trajectory.waypoints) t["waypoints"].push_back(vec_json(w));
    t["speed"] = c.trajectory.speed;
    t["speed_variation"] = c.trajectory.speed_variation;
    t["speed_period"] = c.trajectory.speed_period;
    t["corner_radius"] = c.trajectory.corner_radius;
    j["trajectory"] = t;
    j["olos"] = json::array();
    for (const auto& w : c.olos) j["olos"].push_back({{"first", w.first}, {"last", w.last}, {"anchors", w.anchors}});
    j["truth"] = {{"snr_db", c.truth.snr_db}, {"dnr_db", c.truth.dnr_db}, {"rise", c.truth.rise},
                  {"fall", c.truth.fall},     {"bias", c.truth.bias},     {"los_prob", c.truth.los_prob}};
    j["signal"] = {{"num_samples", c.signal.num_samples}, {"sample_interval", c.signal.sample_interval},
                   {"rolloff", c.rolloff},                {"symbol_time", c.symbol_time},
                   {"noise_sigma", c.noise_sigma}};
    j["nlos_count"] = c.poisson_count ? "poisson" : "fixed";
    j["walls"] = json::array();
    for (const auto& w : c.walls) j["walls"].push_back({w.a.x(), w.a.y(), w.b.x(), w.b.y()});
    j["max_order"] = c.max_order;
    j["path_loss"] = {{"snr_ref_db", c.path_loss.snr_ref_db},
                      {"ref_distance", c.path_loss.ref_distance},
                      {"reflection_loss_db", c.path_loss.reflection_loss_db}};
    j["tracker"] = {{"particles", c.tracker.particles},
                    {"large_particles", c.tracker.large_particles},
                    {"initial_particles", c.tracker.initial_particles},
                    {"accel_std", c.tracker.accel_std},
                    {"velocity_std", c.tracker.velocity_std},
                    {"init_proposal", c.tracker.proposal == InitProposal::ring ? "ring" : "disc"},
                    {"init_likelihood", c.tracker.likelihood == InitLikelihood::mixture ? "mixture" : "strongest"}};
    j["lost"] = {{"error", c.lost_error}, {"after", c.lost_after}, {"recovery_steps", c.recovery_steps}};
    return j.dump(2);
}

void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << scenario_to_json_text(cfg) << '\n';
}

}  // namespace mpath
