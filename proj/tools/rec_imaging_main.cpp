#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recimaging/experiment.hpp"

namespace {

recimaging::Json assemble(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    recimaging::Json config = recimaging::load_config_file(config_path);
    for (const std::string& assignment : overrides)
        recimaging::apply_override(config, assignment);
    return recimaging::merged_with_defaults(config);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconstruction-capacity experiments for diffraction-limited imaging"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--set", overrides, "Override entries as key.path=value");

    CLI::App* validate = app.add_subcommand("validate", "Check a config and report problems");
    validate->add_option("--config", config_path, "JSON config file")->required();
    validate->add_option("--set", overrides, "Override entries as key.path=value");

    CLI::App* list = app.add_subcommand("list-scenarios", "List available scenario names");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const std::string& name : recimaging::scenario_names())
                std::cout << name << "\n";
            return 0;
        }
        if (validate->parsed()) {
            const recimaging::Json merged = assemble(config_path, overrides);
            const auto problems = recimaging::validate_config(merged);
            for (const std::string& p : problems) std::cout << p << "\n";
            if (!problems.empty()) return 1;
            std::cout << "ok\n";
            return 0;
        }
        const recimaging::Json merged = assemble(config_path, overrides);
        recimaging::run_experiment(merged);
        std::cout << "wrote " << merged.at("output_dir").get<std::string>() << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
