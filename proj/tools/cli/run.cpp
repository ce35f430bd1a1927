#include "run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "scprobe/error.hpp"
#include "scprobe/random.hpp"

namespace scprobe::cli {

namespace {

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t hash_file(const fs::path& file, std::uint64_t h) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        fail(ErrorCode::io_error, "cannot read " + file.string());
    }
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    }
    return h;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Effective option values of one command: given values, else defaults.
nlohmann::json effective_options(const CLI::App& command) {
    nlohmann::json out = nlohmann::json::object();
    for (const CLI::Option* opt : command.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") {
            continue;
        }
        const auto& name = opt->get_lnames()[0];
        if (opt->count() > 0) {
            const auto& values = opt->results();
            if (opt->get_expected_max() > 1) {
                out[name] = values;
            } else {
                out[name] = values.empty() ? std::string() : values.back();
            }
        } else {
            out[name] = opt->get_default_str();
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::shared_ptr<CommandBody>>>& registry() {
    static std::vector<std::pair<std::string, std::shared_ptr<CommandBody>>> r;
    return r;
}

}  // namespace

std::string checksum(const fs::path& path) {
    if (fs::is_regular_file(path)) {
        return hex16(hash_file(path, fnv1a("")));
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
        if (entry.is_regular_file()) {
            files.push_back(fs::relative(entry.path(), path));
        }
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = fnv1a("");
    for (const auto& f : files) {
        h = fnv1a(f.generic_string(), h);
        h = hash_file(path / f, h);
    }
    return hex16(h);
}

std::vector<std::string> split_list(const std::vector<std::string>& values) {
    std::vector<std::string> out;
    for (const auto& v : values) {
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) {
                out.push_back(item);
            }
        }
    }
    return out;
}

Run::Run(const CLI::App& command, const CommonOptions& common)
    : command_(command.get_name()), outdir_(common.outdir), jobs_(std::max<std::size_t>(1, common.jobs)) {
    config_ = effective_options(command);
    config_hash_ = hex16(fnv1a(command_ + '\n' + config_.dump()));
    run_id_ = common.run_id.empty() ? command_ + "-" + config_hash_.substr(0, 12) : common.run_id;
    if (run_id_.find('/') != std::string::npos || run_id_ == "." || run_id_ == "..") {
        fail(ErrorCode::invalid_argument, "run id must be a plain directory name: '" + run_id_ + "'");
    }
    staging_ = outdir_ / ("." + run_id_ + ".partial");
}

Run::~Run() {
    if (!committed_) {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }
}

void Run::input(const std::string& role, const fs::path& path) {
    if (!fs::exists(path)) {
        fail(ErrorCode::missing_input, role + " not found: " + path.string());
    }
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"fnv1a64", checksum(path)}});
}

void Run::seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

fs::path Run::out(const fs::path& relative) const {
    const auto p = staging_ / relative;
    fs::create_directories(p.parent_path());
    return p;
}

fs::path Run::dir(const fs::path& relative) const {
    const auto p = staging_ / relative;
    fs::create_directories(p);
    return p;
}

void Run::write_text(const fs::path& relative, const std::string& text) const {
    std::ofstream f(out(relative), std::ios::binary);
    f << text;
    if (!f) {
        fail(ErrorCode::io_error, "cannot write " + (staging_ / relative).string());
    }
}

void Run::write_json(const fs::path& relative, const nlohmann::json& value) const {
    write_text(relative, value.dump(2) + "\n");
}

fs::path Run::commit() {
    nlohmann::json manifest = {
        {"command", command_},     {"run_id", run_id_}, {"config", config_}, {"config_hash", config_hash_},
        {"seeds", seeds_},         {"inputs", inputs_}, {"timestamp", utc_timestamp()},
    };
    for (auto& [k, v] : extra_.items()) {
        manifest[k] = v;
    }
    write_json("run_manifest.json", manifest);
    const auto target = final_dir();
    fs::remove_all(target);
    fs::rename(staging_, target);
    committed_ = true;
    return target;
}

void add_command(CLI::App& app, const std::string& name, const std::string& description,
                 const std::function<CommandBody(CLI::App&)>& setup) {
    CLI::App* sub = app.add_subcommand(name, description);
    registry().emplace_back(name, std::make_shared<CommandBody>(setup(*sub)));
}

CommandBody* find_command(const std::string& name) {
    for (auto& [n, body] : registry()) {
        if (n == name) {
            return body.get();
        }
    }
    return nullptr;
}

}  // namespace scprobe::cli
