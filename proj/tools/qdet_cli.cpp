#include "qdet/config.hpp"
#include "qdet/errors.hpp"
#include "qdet/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Flux-qudit photon detector simulator"};
    std::string config_path;
    std::string stage;
    std::string out;
    unsigned workers = 0;
    bool check = false;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--stage", stage, "stage to run (overrides the config)");
    app.add_option("--out", out, "output directory (overrides the config)");
    app.add_option("--workers", workers, "worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--check", check, "run the invariant suite only");
    CLI11_PARSE(app, argc, argv);

    try {
        qdet::Config cfg;
        if (!config_path.empty()) {
            cfg = qdet::Config::load(config_path);
        } else if (check) {
            std::istringstream defaults("stage = spectrum\n");
            cfg = qdet::Config::parse(defaults);
        } else {
            throw qdet::DomainError("--config is required unless --check is given");
        }
        const auto rc = qdet::make_run_config(
            cfg, stage.empty() ? std::nullopt : std::optional<std::string>(stage),
            out.empty() ? std::nullopt : std::optional<std::string>(out),
            workers ? std::optional<unsigned>(workers) : std::nullopt);
        if (check)
            return qdet::run_checks(rc, std::cout) ? 0 : 3;
        qdet::run(rc, std::cout);
        return 0;
    } catch (const qdet::Error& e) {
        const bool validation = e.category() == qdet::Error::Category::Validation;
        std::cerr << (validation ? "validation error: " : "numeric error: ") << e.what() << '\n';
        return validation ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
