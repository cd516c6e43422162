#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kkl/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Kato-class and intersection-measure numerics"};
    std::string config;
    std::optional<std::string> output;
    std::optional<std::string> formats;
    app.add_option("config", config, "JSON configuration document")->required();
    app.add_option("--output", output, "Report directory (overrides the document)");
    app.add_option("--format", formats, "Comma-separated subset of json,csv");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kkl::cli::kExitError;
    }
    return kkl::cli::run(config, output, formats, std::cout, std::cerr);
}
