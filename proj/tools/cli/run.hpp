#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace scprobe::cli {

namespace fs = std::filesystem;

// Options every subcommand accepts.
struct CommonOptions {
    fs::path outdir = "runs";
    std::string run_id;
    std::size_t jobs = 1;
};

/// One command invocation. Outputs go to a hidden staging directory that is
/// renamed to <outdir>/<run-id> only after the command finished, so a failed
/// run leaves nothing behind.
class Run {
public:
    Run(const CLI::App& command, const CommonOptions& common);
    ~Run();
    Run(const Run&) = delete;
    Run& operator=(const Run&) = delete;

    // Records a file or directory input with its checksum; throws missing_input
    // when it does not exist.
    void input(const std::string& role, const fs::path& path);
    void seed(const std::string& name, std::uint64_t value);
    void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

    // Path of an output inside the staging directory (parents are created).
    fs::path out(const fs::path& relative) const;
    // Same for an output directory, which is created.
    fs::path dir(const fs::path& relative) const;
    void write_text(const fs::path& relative, const std::string& text) const;
    void write_json(const fs::path& relative, const nlohmann::json& value) const;

    const std::string& run_id() const noexcept { return run_id_; }
    std::size_t jobs() const noexcept { return jobs_; }
    const std::string& config_hash() const noexcept { return config_hash_; }
    fs::path final_dir() const { return outdir_ / run_id_; }

    // Writes run_manifest.json and moves the staging directory into place.
    fs::path commit();

private:
    std::string command_;
    fs::path outdir_;
    std::string run_id_;
    fs::path staging_;
    std::size_t jobs_ = 1;
    nlohmann::json config_;
    std::string config_hash_;
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json extra_ = nlohmann::json::object();
    bool committed_ = false;
};

// 64-bit FNV-1a of a file, or of every regular file under a directory (sorted
// relative paths mixed in), as 16 hex digits.
std::string checksum(const fs::path& path);

// "a,b,c" and repeated flags both end up as one list.
std::vector<std::string> split_list(const std::vector<std::string>& values);

// Registration hook per command group.
using CommandBody = std::function<void(Run&)>;
void add_command(CLI::App& app, const std::string& name, const std::string& description,
                 const std::function<CommandBody(CLI::App&)>& setup);
CommandBody* find_command(const std::string& name);

void register_data_commands(CLI::App& app);
void register_probe_commands(CLI::App& app);
void register_analysis_commands(CLI::App& app);

}  // namespace scprobe::cli
