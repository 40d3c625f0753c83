// ldp - test-time latent optimization against a diffusion prior.
// Subcommands: synth (latent map synthesis), edit (layered image editing),
// check (verification suite). Exit codes: 0 success, 1 runtime failure or
// failed checks, 2 configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ldp/config.hpp"
#include "ldp/errors.hpp"
#include "ldp/optimize.hpp"
#include "ldp/verification.hpp"

namespace {

struct OverrideSet {
    std::map<std::string, std::string> storage;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* cmd) {
        // one flag per config key; a few short aliases for the common ones
        const std::map<std::string, std::string> aliases = {
            {"run.seed", ",--seed"},         {"run.iterations", ",--iterations"},
            {"run.out_dir", ",--out"},       {"run.prompt", ",--prompt"},
            {"backend.kind", ",--backend"},  {"renderer.image", ",--image"},
            {"renderer.mask", ",--mask"},
        };
        for (const std::string& key : ldp::config_keys()) {
            std::string names = "--" + key;
            auto alias        = aliases.find(key);
            if (alias != aliases.end()) names += alias->second;
            options[key] = cmd->add_option(names, storage[key], "config key " + key)
                               ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    }

    std::vector<std::pair<std::string, std::string>> collect() const {
        std::vector<std::pair<std::string, std::string>> entries;
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) entries.emplace_back(key, storage.at(key));
        }
        return entries;
    }
};

ldp::RunConfig resolve_config(const std::string& config_path, const std::string& preset_flag,
                              const OverrideSet& overrides, const std::string& default_preset) {
    ldp::ParsedConfig file;
    if (!config_path.empty()) file = ldp::load_config_file(config_path);

    std::string preset_name = preset_flag;
    if (preset_name.empty()) preset_name = file.preset;
    if (preset_name.empty()) preset_name = default_preset;

    return ldp::build_config(preset_name, file.entries, overrides.collect());
}

int run_command(const ldp::RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const ldp::RunLog log = ldp::run_optimization(cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!log.records.empty()) {
        const ldp::IterationRecord& last = log.records.back();
        std::cout << "finished " << log.records.size() << " iterations in " << secs
                  << " s (loss_total " << ldp::format_double(last.loss_total) << ", lsd "
                  << ldp::format_double(last.loss_lsd) << ", fm "
                  << ldp::format_double(last.loss_fm) << ", kl "
                  << ldp::format_double(last.loss_kl) << ")\n";
    }
    for (const std::string& artifact : log.artifacts) std::cout << "wrote " << artifact << "\n";
    return 0;
}

int with_error_mapping(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ldp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ldp::LoadError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return 2;
    } catch (const ldp::ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const ldp::RunAborted& e) {
        std::cerr << "run aborted: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ldp - test-time latent optimization against a diffusion prior"};
    app.require_subcommand(1);

    std::string synth_config, synth_preset;
    CLI::App* synth = app.add_subcommand("synth", "optimize a latent map and decode it");
    synth->add_option("--config", synth_config, "config file (sectioned key = value)");
    synth->add_option("--preset", synth_preset, "preset name (image-synthesis, layered-edit, lsd-only-baseline)");
    OverrideSet synth_overrides;
    synth_overrides.attach(synth);

    std::string edit_config, edit_preset;
    CLI::App* edit = app.add_subcommand("edit", "text-driven layered image editing");
    edit->add_option("--config", edit_config, "config file (sectioned key = value)");
    edit->add_option("--preset", edit_preset, "preset name (defaults to layered-edit)");
    OverrideSet edit_overrides;
    edit_overrides.attach(edit);

    std::string check_level = "quick";
    CLI::App* check = app.add_subcommand("check", "run the verification suite");
    check->add_option("level", check_level, "quick or full")->check(CLI::IsMember({"quick", "full"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*synth) {
        return with_error_mapping([&] {
            ldp::RunConfig cfg = resolve_config(synth_config, synth_preset, synth_overrides, "");
            if (cfg.renderer.kind != "latent-map") {
                throw ldp::ConfigError("synth needs renderer.kind = latent-map, got '" +
                                       cfg.renderer.kind + "'");
            }
            return run_command(cfg);
        });
    }
    if (*edit) {
        return with_error_mapping([&] {
            ldp::RunConfig cfg =
                resolve_config(edit_config, edit_preset, edit_overrides, "layered-edit");
            if (cfg.renderer.kind != "layered-edit") {
                throw ldp::ConfigError("edit needs renderer.kind = layered-edit, got '" +
                                       cfg.renderer.kind + "'");
            }
            return run_command(cfg);
        });
    }
    return with_error_mapping([&] {
        const auto results = ldp::run_verification(check_level == "full" ? ldp::CheckLevel::Full
                                                                         : ldp::CheckLevel::Quick);
        ldp::print_check_table(std::cout, results);
        return ldp::all_passed(results) ? 0 : 1;
    });
}
