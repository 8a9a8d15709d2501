#include "chatty/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

std::string format_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
    throw ParamError(origin + ": line " + std::to_string(line) + ": " + what);
}

Real parse_real(const std::string& v, const std::string& origin, int line,
                const std::string& key) {
    try {
        std::size_t used = 0;
        const Real r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        fail(origin, line, "value '" + v + "' for " + key + " is not a number");
    }
}

long long parse_int(const std::string& v, const std::string& origin, int line,
                    const std::string& key) {
    try {
        std::size_t used = 0;
        const long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        fail(origin, line, "value '" + v + "' for " + key + " is not an integer");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& origin, int line,
                        const std::string& key) {
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        std::size_t used = 0;
        const unsigned long long r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        fail(origin, line, "value '" + v + "' for " + key + " is not a non-negative integer");
    }
}

bool parse_bool(const std::string& v, const std::string& origin, int line,
                const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(origin, line, "value '" + v + "' for " + key + " must be true or false");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        parts.push_back(trim(part));
    }
    return parts;
}

std::vector<Index> parse_index_list(const std::string& v, const std::string& origin, int line,
                                    const std::string& key) {
    std::vector<Index> out;
    for (const std::string& part : split_list(v)) {
        out.push_back(static_cast<Index>(parse_int(part, origin, line, key)));
    }
    if (out.empty()) fail(origin, line, key + " needs at least one entry");
    return out;
}

std::vector<Real> parse_real_list(const std::string& v, const std::string& origin, int line,
                                  const std::string& key) {
    std::vector<Real> out;
    if (trim(v).empty()) return out;
    for (const std::string& part : split_list(v)) {
        out.push_back(parse_real(part, origin, line, key));
    }
    return out;
}

std::string join_index_list(const std::vector<Index>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_real_list(const std::vector<Real>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += format_real(v[i]);
    }
    return out;
}

}  // namespace

DomainPair DatasetConfig::generate() const {
    if (kind == "moons") {
        return gen_moons(rotation_deg, noise, n, seed);
    }
    if (kind == "blobs") {
        return gen_blobs(classes, n_per_class, dim, rotation_deg, translation, noise, seed);
    }
    throw ParamError("dataset kind '" + kind + "' is not moons or blobs");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    bool preset_applied = false;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto comment = raw.find('#');
        if (comment != std::string::npos) raw.erase(comment);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(origin, line_no, "expected key = value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (!seen.insert(key).second) {
            fail(origin, line_no, "duplicate key '" + key + "'");
        }

        TrainConfig& t = config.train;
        DatasetConfig& d = config.dataset;
        if (key == "dataset") {
            if (value != "moons" && value != "blobs") {
                fail(origin, line_no, "dataset must be moons or blobs, got '" + value + "'");
            }
            d.kind = value;
        } else if (key == "rotation_deg") {
            d.rotation_deg = parse_real(value, origin, line_no, key);
        } else if (key == "noise") {
            d.noise = parse_real(value, origin, line_no, key);
        } else if (key == "n") {
            d.n = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "classes") {
            d.classes = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "n_per_class") {
            d.n_per_class = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "dim") {
            d.dim = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "translation") {
            d.translation = parse_real_list(value, origin, line_no, key);
        } else if (key == "data_seed") {
            d.seed = parse_u64(value, origin, line_no, key);
        } else if (key == "preset") {
            if (value != "none" && value != "office31" && value != "officehome") {
                fail(origin, line_no, "preset must be none, office31, or officehome");
            }
            config.preset = value;
            preset_applied = true;
        } else if (key == "lr") {
            t.lr = parse_real(value, origin, line_no, key);
        } else if (key == "iterations") {
            t.iterations = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "lambda") {
            t.lambda = parse_real(value, origin, line_no, key);
        } else if (key == "lambda1") {
            t.lambda1 = parse_real(value, origin, line_no, key);
        } else if (key == "lambda2") {
            t.lambda2 = value == "auto" ? kAutoLambda2 : parse_real(value, origin, line_no, key);
        } else if (key == "temperature") {
            t.temperature = parse_real(value, origin, line_no, key);
        } else if (key == "momentum") {
            t.momentum = parse_real(value, origin, line_no, key);
        } else if (key == "grl_scale") {
            t.grl_scale = parse_real(value, origin, line_no, key);
        } else if (key == "grl_warmup") {
            t.grl_warmup = parse_bool(value, origin, line_no, key);
        } else if (key == "mcc") {
            t.mcc_enabled = parse_bool(value, origin, line_no, key);
        } else if (key == "tl_variant") {
            if (value == "plain") {
                t.tl_variant = TlVariant::plain;
            } else if (value == "cosine") {
                t.tl_variant = TlVariant::cosine;
            } else if (value == "embedded") {
                t.tl_variant = TlVariant::embedded;
            } else {
                fail(origin, line_no, "tl_variant must be plain, cosine, or embedded");
            }
        } else if (key == "transport_mode") {
            if (value == "dual") {
                t.dual_transport = true;
            } else if (value == "single") {
                t.dual_transport = false;
            } else {
                fail(origin, line_no, "transport_mode must be dual or single");
            }
        } else if (key == "single_mode_tl") {
            t.single_mode_tl = parse_bool(value, origin, line_no, key);
        } else if (key == "alternating") {
            t.alternating = parse_bool(value, origin, line_no, key);
        } else if (key == "disc_input") {
            if (value == "softmax") {
                t.disc_on_logits = false;
            } else if (value == "logits") {
                t.disc_on_logits = true;
            } else {
                fail(origin, line_no, "disc_input must be softmax or logits");
            }
        } else if (key == "seed") {
            t.seed = parse_u64(value, origin, line_no, key);
        } else if (key == "eval_every") {
            t.eval_every = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "snapshot_every") {
            t.snapshot_every = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "batch_size") {
            t.batch_size = static_cast<Index>(parse_int(value, origin, line_no, key));
        } else if (key == "g_widths") {
            t.g_widths = parse_index_list(value, origin, line_no, key);
        } else if (key == "d_widths") {
            t.d_widths = parse_index_list(value, origin, line_no, key);
        } else if (key == "out_dir") {
            if (value.empty()) fail(origin, line_no, "out_dir must not be empty");
            config.out_dir = value;
        } else {
            fail(origin, line_no, "unknown key '" + key + "'");
        }
    }

    if (preset_applied) {
        // The preset fixes lambda2 unless the file set it explicitly.
        if (!seen.count("lambda2")) {
            if (config.preset == "office31") {
                config.train.lambda2 = office31_preset().lambda2;
            } else if (config.preset == "officehome") {
                config.train.lambda2 = office_home_preset().lambda2;
            }
        }
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParamError(path + ": cannot read config file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

std::string resolved_config_text(const ExperimentConfig& config) {
    const DatasetConfig& d = config.dataset;
    const TrainConfig& t = config.train;
    std::ostringstream out;
    out << "dataset = " << d.kind << '\n';
    out << "rotation_deg = " << format_real(d.rotation_deg) << '\n';
    out << "noise = " << format_real(d.noise) << '\n';
    out << "n = " << d.n << '\n';
    out << "classes = " << d.classes << '\n';
    out << "n_per_class = " << d.n_per_class << '\n';
    out << "dim = " << d.dim << '\n';
    out << "translation = " << join_real_list(d.translation) << '\n';
    out << "data_seed = " << d.seed << '\n';
    out << "preset = " << config.preset << '\n';
    out << "lr = " << format_real(t.lr) << '\n';
    out << "iterations = " << t.iterations << '\n';
    out << "lambda = " << format_real(t.lambda) << '\n';
    out << "lambda1 = " << format_real(t.lambda1) << '\n';
    out << "lambda2 = "
        << (t.lambda2 == kAutoLambda2 ? std::string("auto") : format_real(t.lambda2)) << '\n';
    out << "temperature = " << format_real(t.temperature) << '\n';
    out << "momentum = " << format_real(t.momentum) << '\n';
    out << "grl_scale = " << format_real(t.grl_scale) << '\n';
    out << "grl_warmup = " << (t.grl_warmup ? "true" : "false") << '\n';
    out << "mcc = " << (t.mcc_enabled ? "true" : "false") << '\n';
    out << "tl_variant = "
        << (t.tl_variant == TlVariant::plain
                ? "plain"
                : t.tl_variant == TlVariant::cosine ? "cosine" : "embedded")
        << '\n';
    out << "transport_mode = " << (t.dual_transport ? "dual" : "single") << '\n';
    out << "single_mode_tl = " << (t.single_mode_tl ? "true" : "false") << '\n';
    out << "alternating = " << (t.alternating ? "true" : "false") << '\n';
    out << "disc_input = " << (t.disc_on_logits ? "logits" : "softmax") << '\n';
    out << "seed = " << t.seed << '\n';
    out << "eval_every = " << t.eval_every << '\n';
    out << "snapshot_every = " << t.snapshot_every << '\n';
    out << "batch_size = " << t.batch_size << '\n';
    out << "g_widths = " << join_index_list(t.g_widths) << '\n';
    out << "d_widths = " << join_index_list(t.d_widths) << '\n';
    out << "out_dir = " << config.out_dir << '\n';
    return out.str();
}

}  // namespace chatty
