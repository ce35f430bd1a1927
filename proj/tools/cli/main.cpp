#include <cstdio>
#include <filesystem>
#include <iostream>

#include "run.hpp"
#include "scprobe/error.hpp"

namespace {

// Exit statuses: 0 ok, 2 usage, 10 + ErrorCode for library errors, 70 anything else.
constexpr int usage_exit = 2;
constexpr int error_exit_base = 10;
constexpr int internal_exit = 70;

int report(std::string_view code, const std::string& message, int status) {
    std::string line = message;
    for (auto& ch : line) {
        if (ch == '\n' || ch == '\r') {
            ch = ' ';
        }
    }
    std::cerr << "error: " << code << ": " << line << std::endl;
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace scprobe::cli;

    CLI::App app{"scprobe: probe layer embeddings for semantic-class knowledge"};
    app.require_subcommand(1);
    app.fallthrough();
    CommonOptions common;
    app.set_config("--config", "", "TOML config file; a [command] section holds that command's options")
        ->check(CLI::ExistingFile);
    app.add_option("--outdir", common.outdir, "output root; results go to <outdir>/<run-id>/")
        ->capture_default_str();
    app.add_option("--run-id", common.run_id, "run directory name (default: <command>-<config hash>)");
    app.add_option("--jobs", common.jobs, "worker threads for per-class probe training")->capture_default_str();
    app.footer(
        "Exit status: 0 success, 2 usage error, 10 + error code on failure (10 INVALID_ARGUMENT, 11 PARSE_ERROR,\n"
        "12 UNKNOWN_CLASS, 13 MISSING_INPUT, 14 MISSING_LAYER_FILE, 15 DIMENSION_MISMATCH, 16 ROW_COUNT_MISMATCH,\n"
        "17 NON_FINITE, 18 OUT_OF_VOCABULARY, 19 MISSING_ROW, 20 MISSING_PROBE, 21 DIVERGENCE, 22 RECORD_MISMATCH,\n"
        "23 EXAMPLE_MISMATCH, 24 ZERO_NORM, 25 IO_ERROR), 70 internal error.\n"
        "Failures print one line `error: CODE: message` on stderr and leave no output directory.");

    register_data_commands(app);
    register_probe_commands(app);
    register_analysis_commands(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        return report("USAGE", e.what(), usage_exit);
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        Run run(*sub, common);
        (*find_command(sub->get_name()))(run);
        std::cout << run.commit().string() << std::endl;
    } catch (const scprobe::Error& e) {
        return report(scprobe::code_name(e.code()), e.what(), error_exit_base + static_cast<int>(e.code()));
    } catch (const std::filesystem::filesystem_error& e) {
        return report("IO_ERROR", e.what(), error_exit_base + static_cast<int>(scprobe::ErrorCode::io_error));
    } catch (const std::exception& e) {
        return report("INTERNAL", e.what(), internal_exit);
    }
    return 0;
}
