#include "ldp/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "ldp/errors.hpp"

namespace ldp {

/* ------------------------------ formatting ----------------------------- */

std::string format_double(double v) {
    char buf[40];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

// quote only when the bare token would be ambiguous
std::string quote(const std::string& s) {
    const bool needs_quotes =
        s.empty() || s.find_first_of(" \t\"\\#;[]=") != std::string::npos;
    if (!needs_quotes) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    char* end      = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& value) {
    char* end         = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config key '" + key + "': '" + value + "' is not 'true' or 'false'");
}

struct SchemaEntry {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::vector<SchemaEntry> make_schema() {
    std::vector<SchemaEntry> schema;
    auto add_int = [&](const std::string& key, auto member) {
        schema.push_back({key,
                          [key, member](RunConfig& c, const std::string& v) {
                              std::invoke(member, c) = static_cast<int>(parse_int(key, v));
                          },
                          [member](const RunConfig& c) {
                              return std::to_string(std::invoke(member, c));
                          }});
    };
    auto add_u64 = [&](const std::string& key, auto member) {
        schema.push_back({key,
                          [key, member](RunConfig& c, const std::string& v) {
                              std::invoke(member, c) = static_cast<uint64_t>(parse_int(key, v));
                          },
                          [member](const RunConfig& c) {
                              return std::to_string(std::invoke(member, c));
                          }});
    };
    auto add_string = [&](const std::string& key, auto member) {
        schema.push_back({key,
                          [member](RunConfig& c, const std::string& v) {
                              std::invoke(member, c) = v;
                          },
                          [member](const RunConfig& c) { return std::invoke(member, c); }});
    };

    add_int("run.iterations", &RunConfig::iterations);
    add_u64("run.seed", &RunConfig::seed);
    add_string("run.prompt", &RunConfig::prompt);
    add_string("run.out_dir", &RunConfig::out_dir);
    add_int("run.checkpoint_every", &RunConfig::checkpoint_every);

    schema.push_back({"schedule.num_steps",
                      [](RunConfig& c, const std::string& v) {
                          c.schedule.num_steps = static_cast<int>(parse_int("schedule.num_steps", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.schedule.num_steps); }});
    schema.push_back({"schedule.beta_start",
                      [](RunConfig& c, const std::string& v) {
                          c.schedule.beta_start = parse_real("schedule.beta_start", v);
                      },
                      [](const RunConfig& c) { return format_double(c.schedule.beta_start); }});
    schema.push_back({"schedule.beta_end",
                      [](RunConfig& c, const std::string& v) {
                          c.schedule.beta_end = parse_real("schedule.beta_end", v);
                      },
                      [](const RunConfig& c) { return format_double(c.schedule.beta_end); }});
    schema.push_back({"schedule.t_min",
                      [](RunConfig& c, const std::string& v) {
                          c.schedule.t_min = static_cast<int>(parse_int("schedule.t_min", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.schedule.t_min); }});
    schema.push_back({"schedule.t_max",
                      [](RunConfig& c, const std::string& v) {
                          c.schedule.t_max = static_cast<int>(parse_int("schedule.t_max", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.schedule.t_max); }});

    schema.push_back({"backend.kind",
                      [](RunConfig& c, const std::string& v) { c.backend.kind = v; },
                      [](const RunConfig& c) { return c.backend.kind; }});
    schema.push_back({"backend.seed",
                      [](RunConfig& c, const std::string& v) {
                          c.backend.seed = static_cast<uint64_t>(parse_int("backend.seed", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.backend.seed); }});
    schema.push_back({"backend.target_init",
                      [](RunConfig& c, const std::string& v) { c.backend.target_init = v; },
                      [](const RunConfig& c) { return c.backend.target_init; }});
    schema.push_back({"backend.target_sigma",
                      [](RunConfig& c, const std::string& v) {
                          c.backend.target_sigma = parse_real("backend.target_sigma", v);
                      },
                      [](const RunConfig& c) { return format_double(c.backend.target_sigma); }});
    schema.push_back({"backend.weights_path",
                      [](RunConfig& c, const std::string& v) { c.backend.weights_path = v; },
                      [](const RunConfig& c) { return c.backend.weights_path; }});
    schema.push_back({"backend.device",
                      [](RunConfig& c, const std::string& v) { c.backend.device = v; },
                      [](const RunConfig& c) { return c.backend.device; }});
    schema.push_back({"backend.guidance_scale",
                      [](RunConfig& c, const std::string& v) {
                          c.backend.guidance_scale = parse_real("backend.guidance_scale", v);
                      },
                      [](const RunConfig& c) { return format_double(c.backend.guidance_scale); }});

    schema.push_back({"loss.lambda_fm",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.lambda_fm = parse_real("loss.lambda_fm", v);
                      },
                      [](const RunConfig& c) { return format_double(c.loss.lambda_fm); }});
    schema.push_back({"loss.lambda_kl",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.lambda_kl = parse_real("loss.lambda_kl", v);
                      },
                      [](const RunConfig& c) { return format_double(c.loss.lambda_kl); }});
    schema.push_back({"loss.lambda_lsd",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.lambda_lsd = parse_real("loss.lambda_lsd", v);
                      },
                      [](const RunConfig& c) { return format_double(c.loss.lambda_lsd); }});
    schema.push_back({"loss.jacobian_mode",
                      [](RunConfig& c, const std::string& v) { c.loss.jacobian_mode = v; },
                      [](const RunConfig& c) { return c.loss.jacobian_mode; }});
    schema.push_back({"loss.fm_reduction",
                      [](RunConfig& c, const std::string& v) { c.loss.fm_reduction = v; },
                      [](const RunConfig& c) { return c.loss.fm_reduction; }});
    schema.push_back({"loss.fm_levels",
                      [](RunConfig& c, const std::string& v) { c.loss.fm_levels = v; },
                      [](const RunConfig& c) { return c.loss.fm_levels; }});
    schema.push_back({"loss.kl_strict",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.kl_strict = parse_bool("loss.kl_strict", v);
                      },
                      [](const RunConfig& c) { return c.loss.kl_strict ? "true" : "false"; }});
    schema.push_back({"loss.lsd_weight",
                      [](RunConfig& c, const std::string& v) { c.loss.lsd_weight = v; },
                      [](const RunConfig& c) { return c.loss.lsd_weight; }});
    schema.push_back({"loss.mask_loss",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.mask_loss = parse_bool("loss.mask_loss", v);
                      },
                      [](const RunConfig& c) { return c.loss.mask_loss ? "true" : "false"; }});
    schema.push_back({"loss.mask_weight",
                      [](RunConfig& c, const std::string& v) {
                          c.loss.mask_weight = parse_real("loss.mask_weight", v);
                      },
                      [](const RunConfig& c) { return format_double(c.loss.mask_weight); }});
    schema.push_back({"loss.mask_reduction",
                      [](RunConfig& c, const std::string& v) { c.loss.mask_reduction = v; },
                      [](const RunConfig& c) { return c.loss.mask_reduction; }});

    schema.push_back({"optimizer.method",
                      [](RunConfig& c, const std::string& v) { c.optimizer.method = v; },
                      [](const RunConfig& c) { return c.optimizer.method; }});
    schema.push_back({"optimizer.lr",
                      [](RunConfig& c, const std::string& v) {
                          c.optimizer.lr = parse_real("optimizer.lr", v);
                      },
                      [](const RunConfig& c) { return format_double(c.optimizer.lr); }});
    schema.push_back({"optimizer.beta1",
                      [](RunConfig& c, const std::string& v) {
                          c.optimizer.beta1 = parse_real("optimizer.beta1", v);
                      },
                      [](const RunConfig& c) { return format_double(c.optimizer.beta1); }});
    schema.push_back({"optimizer.beta2",
                      [](RunConfig& c, const std::string& v) {
                          c.optimizer.beta2 = parse_real("optimizer.beta2", v);
                      },
                      [](const RunConfig& c) { return format_double(c.optimizer.beta2); }});
    schema.push_back({"optimizer.eps",
                      [](RunConfig& c, const std::string& v) {
                          c.optimizer.eps = parse_real("optimizer.eps", v);
                      },
                      [](const RunConfig& c) { return format_double(c.optimizer.eps); }});
    schema.push_back({"optimizer.weight_decay",
                      [](RunConfig& c, const std::string& v) {
                          c.optimizer.weight_decay = parse_real("optimizer.weight_decay", v);
                      },
                      [](const RunConfig& c) { return format_double(c.optimizer.weight_decay); }});

    schema.push_back({"renderer.kind",
                      [](RunConfig& c, const std::string& v) { c.renderer.kind = v; },
                      [](const RunConfig& c) { return c.renderer.kind; }});
    schema.push_back({"renderer.latent_channels",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.latent_channels =
                              static_cast<int>(parse_int("renderer.latent_channels", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.renderer.latent_channels); }});
    schema.push_back({"renderer.latent_height",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.latent_height =
                              static_cast<int>(parse_int("renderer.latent_height", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.renderer.latent_height); }});
    schema.push_back({"renderer.latent_width",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.latent_width =
                              static_cast<int>(parse_int("renderer.latent_width", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.renderer.latent_width); }});
    schema.push_back({"renderer.image",
                      [](RunConfig& c, const std::string& v) { c.renderer.image_path = v; },
                      [](const RunConfig& c) { return c.renderer.image_path; }});
    schema.push_back({"renderer.mask",
                      [](RunConfig& c, const std::string& v) { c.renderer.mask_path = v; },
                      [](const RunConfig& c) { return c.renderer.mask_path; }});
    schema.push_back({"renderer.image_size",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.image_size = static_cast<int>(parse_int("renderer.image_size", v));
                      },
                      [](const RunConfig& c) { return std::to_string(c.renderer.image_size); }});
    schema.push_back({"renderer.stop_grad_encoder",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.stop_grad_encoder = parse_bool("renderer.stop_grad_encoder", v);
                      },
                      [](const RunConfig& c) {
                          return c.renderer.stop_grad_encoder ? "true" : "false";
                      }});
    schema.push_back({"renderer.generator_features",
                      [](RunConfig& c, const std::string& v) {
                          c.renderer.generator_features =
                              static_cast<int>(parse_int("renderer.generator_features", v));
                      },
                      [](const RunConfig& c) {
                          return std::to_string(c.renderer.generator_features);
                      }});

    return schema;
}

const std::vector<SchemaEntry>& schema() {
    static const std::vector<SchemaEntry> instance = make_schema();
    return instance;
}

const SchemaEntry* find_entry(const std::string& key) {
    for (const SchemaEntry& entry : schema()) {
        if (entry.key == key) return &entry;
    }
    return nullptr;
}

std::string strip(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& key, const std::string& raw) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size()) {
                ++i;
                out += raw[i];
            } else if (raw[i] == '"') {
                throw ConfigError("config key '" + key + "': stray quote in value");
            } else {
                out += raw[i];
            }
        }
        return out;
    }
    return raw;
}

}  // namespace

/* ------------------------------- parsing ------------------------------- */

ParsedConfig parse_config_text(const std::string& text) {
    ParsedConfig parsed;
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const std::string trimmed = strip(line);
        if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
            }
            section = strip(trimmed.substr(1, trimmed.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        const size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key_part = strip(trimmed.substr(0, eq));
        const std::string value    = strip(trimmed.substr(eq + 1));
        if (key_part.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (section.empty() && key_part == "preset") {
            parsed.preset = unquote("preset", value);
            continue;
        }
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key_part +
                              "' outside any section (only 'preset' may be top-level)");
        }
        const std::string key = section + "." + key_part;
        parsed.entries.emplace_back(key, unquote(key, value));
    }
    return parsed;
}

ParsedConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file '" + path + "' not found or unreadable");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    const SchemaEntry* entry = find_entry(key);
    if (!entry) throw ConfigError("unknown config key '" + key + "'");
    entry->set(cfg, value);
}

RunConfig build_config(const std::string& preset_name,
                       const std::vector<std::pair<std::string, std::string>>& file_entries,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg = preset_name.empty() ? RunConfig{} : preset(preset_name);
    for (const auto& [key, value] : file_entries) apply_entry(cfg, key, value);
    for (const auto& [key, value] : overrides) apply_entry(cfg, key, value);
    return cfg;
}

/* ---------------------------- serialization ---------------------------- */

std::map<std::string, std::string> config_kv(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    for (const SchemaEntry& entry : schema()) kv[entry.key] = entry.get(cfg);
    return kv;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    keys.reserve(schema().size());
    for (const SchemaEntry& entry : schema()) keys.push_back(entry.key);
    return keys;
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string current_section;
    for (const SchemaEntry& entry : schema()) {
        const size_t dotpos       = entry.key.find('.');
        const std::string section = entry.key.substr(0, dotpos);
        const std::string name    = entry.key.substr(dotpos + 1);
        if (section != current_section) {
            if (!current_section.empty()) out << "\n";
            out << "[" << section << "]\n";
            current_section = section;
        }
        out << name << " = " << quote(entry.get(cfg)) << "\n";
    }
    return out.str();
}

}  // namespace ldp
