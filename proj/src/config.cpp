#include "lamebem/config.hpp"

#include "lamebem/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lamebem {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SurfaceMesh RunConfig::reference_mesh() const {
    if (!off_path.empty()) return read_off_file(off_path);
    return make_unit_sphere_mesh(sphere_level);
}

namespace {

class Checker {
public:
    std::vector<std::string> errors;

    void fail(const std::string& where, const std::string& what) { errors.push_back(where + ": " + what); }

    void keys(const json& obj, const std::string& where, const std::set<std::string>& allowed,
              const std::set<std::string>& required) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key())) fail(where + "." + it.key(), "unknown key");
        for (const auto& k : required)
            if (!obj.contains(k)) fail(where + "." + k, "missing required key");
    }

    std::optional<double> number(const json& j, const std::string& where) {
        if (!j.is_number()) {
            fail(where, "expected a number");
            return std::nullopt;
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(where, "must be finite");
            return std::nullopt;
        }
        return v;
    }

    std::optional<Vec3> vec3(const json& j, const std::string& where) {
        if (!j.is_array() || j.size() != 3) {
            fail(where, "expected an array of 3 numbers");
            return std::nullopt;
        }
        Vec3 v;
        bool ok = true;
        for (int i = 0; i < 3; ++i) {
            const auto x = number(j[i], where + "[" + std::to_string(i) + "]");
            if (x) v[i] = *x;
            else ok = false;
        }
        return ok ? std::optional<Vec3>(v) : std::nullopt;
    }

    std::optional<cplx> complex(const json& j, const std::string& where) {
        if (!j.is_object()) {
            fail(where, "expected {\"re\": number, \"im\": number}");
            return std::nullopt;
        }
        keys(j, where, {"re", "im"}, {"re"});
        const auto re = j.contains("re") ? number(j["re"], where + ".re") : std::nullopt;
        const auto im = j.contains("im") ? number(j["im"], where + ".im") : std::optional<double>(0.0);
        if (!re || !im) return std::nullopt;
        return cplx(*re, *im);
    }
};

}  // namespace

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw ConfigError({"top level must be a JSON object"});

    Checker ck;
    RunConfig cfg;
    ck.keys(doc, "config",
            {"geometry", "lame", "omega", "contrast", "delta", "center", "sources", "probes", "sweep", "output_dir",
             "seed"},
            {"geometry", "lame", "omega", "sources", "probes", "output_dir"});

    if (doc.contains("geometry")) {
        const json& g = doc["geometry"];
        if (!g.is_object()) {
            ck.fail("geometry", "expected an object");
        } else {
            ck.keys(g, "geometry", {"sphere_level", "off"}, {});
            if (g.contains("sphere_level") == g.contains("off")) {
                ck.fail("geometry", "exactly one of sphere_level or off is required");
            } else if (g.contains("sphere_level")) {
                if (!g["sphere_level"].is_number_integer()) ck.fail("geometry.sphere_level", "expected an integer");
                else {
                    cfg.sphere_level = g["sphere_level"].get<int>();
                    if (cfg.sphere_level < 0 || cfg.sphere_level > 4)
                        ck.fail("geometry.sphere_level", "must be in 0..4 (at most 5120 elements)");
                }
            } else if (!g["off"].is_string()) {
                ck.fail("geometry.off", "expected a path string");
            } else {
                cfg.off_path = g["off"].get<std::string>();
                if (!std::filesystem::exists(cfg.off_path)) ck.fail("geometry.off", "file not found: " + cfg.off_path);
            }
        }
    }

    if (doc.contains("lame")) {
        const json& l = doc["lame"];
        if (!l.is_object()) {
            ck.fail("lame", "expected an object");
        } else {
            ck.keys(l, "lame", {"lambda", "mu"}, {"lambda", "mu"});
            const auto lam = l.contains("lambda") ? ck.number(l["lambda"], "lame.lambda") : std::nullopt;
            const auto mu = l.contains("mu") ? ck.number(l["mu"], "lame.mu") : std::nullopt;
            if (mu && !(*mu > 0)) ck.fail("lame.mu", "must be positive");
            if (lam && mu) {
                const double l = lam.value_or(0.0), m = mu.value_or(0.0);
                if (!(3 * l + 2 * m > 0)) ck.fail("lame", "requires 3 lambda + 2 mu > 0");
                else if (m > 0) cfg.params = LameParams(l, m);
            }
        }
    }

    if (doc.contains("omega")) {
        const auto w = ck.number(doc["omega"], "omega");
        if (w && !(*w > 0)) ck.fail("omega", "must be positive");
        if (w) cfg.omega = *w;
    }
    if (doc.contains("contrast")) {
        const auto c = ck.complex(doc["contrast"], "contrast");
        if (c) {
            if (c->imag() < 0) ck.fail("contrast", "requires Im c >= 0");
            if (*c == 0.0) ck.fail("contrast", "must be nonzero");
            cfg.contrast = *c;
        }
    }
    if (doc.contains("delta")) {
        const auto d = ck.number(doc["delta"], "delta");
        if (d && !(*d > 0 && *d <= 1)) ck.fail("delta", "must be in (0, 1]");
        if (d) cfg.delta = *d;
    }
    if (doc.contains("center")) {
        const auto z = ck.vec3(doc["center"], "center");
        if (z) cfg.center = *z;
    }

    if (doc.contains("sources")) {
        const json& s = doc["sources"];
        if (!s.is_array() || s.empty()) {
            ck.fail("sources", "expected a non-empty array");
        } else {
            for (std::size_t i = 0; i < s.size(); ++i) {
                const std::string w = "sources[" + std::to_string(i) + "]";
                if (!s[i].is_object()) {
                    ck.fail(w, "expected an object");
                    continue;
                }
                ck.keys(s[i], w, {"location", "amplitude"}, {"location", "amplitude"});
                std::optional<Vec3> loc = s[i].contains("location") ? ck.vec3(s[i]["location"], w + ".location")
                                                                     : std::nullopt;
                std::optional<Vec3c> amp;
                if (s[i].contains("amplitude")) {
                    const json& a = s[i]["amplitude"];
                    if (!a.is_object()) {
                        ck.fail(w + ".amplitude", "expected {\"re\": [3], \"im\": [3]}");
                    } else {
                        ck.keys(a, w + ".amplitude", {"re", "im"}, {"re"});
                        const auto re = a.contains("re") ? ck.vec3(a["re"], w + ".amplitude.re") : std::nullopt;
                        const auto im = a.contains("im") ? ck.vec3(a["im"], w + ".amplitude.im")
                                                         : std::optional<Vec3>(Vec3::Zero());
                        if (re && im) amp = re->cast<cplx>() + cplx(0, 1) * im->cast<cplx>();
                    }
                }
                if (loc && amp) {
                    cfg.source_locations.push_back(*loc);
                    cfg.source_amplitudes.push_back(*amp);
                }
            }
        }
    }

    if (doc.contains("probes")) {
        const json& p = doc["probes"];
        if (!p.is_array() || p.empty()) ck.fail("probes", "expected a non-empty array");
        else
            for (std::size_t i = 0; i < p.size(); ++i) {
                const auto v = ck.vec3(p[i], "probes[" + std::to_string(i) + "]");
                if (v) cfg.probes.push_back(*v);
            }
    }

    if (doc.contains("sweep")) {
        const json& s = doc["sweep"];
        if (!s.is_object()) {
            ck.fail("sweep", "expected an object");
        } else {
            ck.keys(s, "sweep", {"mode", "c0", "control_c0", "taus"}, {});
            if (s.contains("mode")) {
                if (s["mode"] == "auto") cfg.sweep.mode = -1;
                else if (s["mode"].is_number_integer() && s["mode"].get<int>() >= 0) cfg.sweep.mode = s["mode"].get<int>();
                else ck.fail("sweep.mode", "expected \"auto\" or a nonnegative eigenvalue index");
            }
            if (s.contains("c0")) {
                const auto c0 = ck.number(s["c0"], "sweep.c0");
                if (c0 && *c0 == 1.0) ck.fail("sweep.c0", "c0 = 1 is a pole of kappa");
                if (c0) cfg.sweep.c0 = *c0;
            }
            if (s.contains("control_c0")) {
                const auto c = ck.number(s["control_c0"], "sweep.control_c0");
                if (c && !(*c > 0 && *c != 1.0)) ck.fail("sweep.control_c0", "must be positive and not 1");
                if (c) cfg.sweep.control_c0 = *c;
            }
            if (s.contains("taus")) {
                const json& t = s["taus"];
                if (!t.is_array() || t.empty()) {
                    ck.fail("sweep.taus", "expected a non-empty array");
                } else {
                    cfg.sweep.taus.clear();
                    for (std::size_t i = 0; i < t.size(); ++i) {
                        const std::string w = "sweep.taus[" + std::to_string(i) + "]";
                        const auto v = ck.number(t[i], w);
                        if (!v) continue;
                        if (!(*v > 0)) ck.fail(w, "must be positive");
                        if (!cfg.sweep.taus.empty() && !(*v < cfg.sweep.taus.back()))
                            ck.fail(w, "taus must be strictly descending");
                        cfg.sweep.taus.push_back(*v);
                    }
                }
            }
        }
    }

    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string() || doc["output_dir"].get<std::string>().empty())
            ck.fail("output_dir", "expected a non-empty path string");
        else cfg.output_dir = doc["output_dir"].get<std::string>();
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) ck.fail("seed", "expected a nonnegative integer");
        else cfg.seed = doc["seed"].get<std::uint64_t>();
    }

    if (!ck.errors.empty()) throw ConfigError(ck.errors);
    // Keys of nlohmann::json are sorted, so the dump is canonical.
    cfg.hash = hash_hex(fnv1a(doc.dump()));
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read configuration file: " + path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace lamebem
