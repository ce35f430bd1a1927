#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "scprobe/error.hpp"
#include "scprobe/eval.hpp"

namespace scprobe {

using nlohmann::json;

namespace {

json scores_json(const MicroScores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"accuracy", s.accuracy()},
            {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn}, {"tn", s.tn}};
}

MicroScores scores_from_json(const json& j) {
    return scores_from_counts(j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                              j.at("fn").get<std::size_t>(), j.at("tn").get<std::size_t>());
}

json report_json(const EvalReport& r, bool include_decisions) {
    json j;
    j["encoder_id"] = r.context.encoder_id;
    j["layer"] = r.context.layer_tag;
    j["context_size"] = r.context.context_size;
    j["setup"] = setup_name(r.context.setup);
    j["decision_mode"] = decision_mode_name(r.decision_mode);
    j["split"] = split_name(r.split);
    j["units"] = r.units;
    j["decisions"] = r.decision_count();
    j["micro"] = scores_json(r.micro);
    json per_class = json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        auto entry = scores_json(r.per_class[c]);
        entry["class"] = c < r.class_names.size() ? r.class_names[c] : std::to_string(c);
        per_class.push_back(std::move(entry));
    }
    j["per_class"] = std::move(per_class);
    if (include_decisions) {
        json table = json::array();
        for (const auto& d : r.decisions) {
            table.push_back({{"unit", d.unit}, {"class", d.class_index}, {"gold", d.gold}, {"predicted", d.predicted}});
        }
        j["decision_table"] = std::move(table);
    }
    return j;
}

EvalReport report_from(const json& j) {
    EvalReport r;
    r.context.encoder_id = j.at("encoder_id").get<std::string>();
    r.context.layer_tag = j.at("layer").get<std::string>();
    r.context.context_size = j.at("context_size").get<std::string>();
    r.context.setup = parse_setup(j.at("setup").get<std::string>());
    r.decision_mode = parse_decision_mode(j.at("decision_mode").get<std::string>());
    r.split = parse_split(j.at("split").get<std::string>());
    r.units = j.at("units").get<std::size_t>();
    r.micro = scores_from_json(j.at("micro"));
    for (const auto& c : j.at("per_class")) {
        r.class_names.push_back(c.at("class").get<std::string>());
        r.per_class.push_back(scores_from_json(c));
    }
    if (j.contains("decision_table")) {
        for (const auto& d : j.at("decision_table")) {
            r.decisions.push_back({d.at("unit").get<std::string>(), d.at("class").get<int>(),
                                   d.at("gold").get<bool>(), d.at("predicted").get<bool>()});
        }
    }
    return r;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void csv_row(std::ostream& out, const EvalReport& r, const std::string& cls, const MicroScores& s) {
    out << csv_field(r.context.encoder_id) << ',' << csv_field(r.context.layer_tag) << ','
        << csv_field(r.context.context_size) << ',' << setup_name(r.context.setup) << ',' << csv_field(cls) << ','
        << fixed6(s.precision) << ',' << fixed6(s.recall) << ',' << fixed6(s.f1) << ',' << s.decisions() << '\n';
}

}  // namespace

std::string report_to_json(const EvalReport& report, bool include_decisions) {
    return report_json(report, include_decisions).dump(1) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    try {
        return report_from(json::parse(text));
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("report: ") + e.what());
    }
}

std::string reports_to_json(std::span<const EvalReport> reports) {
    json arr = json::array();
    for (const auto& r : reports) {
        arr.push_back(report_json(r, false));
    }
    return arr.dump(1) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        std::vector<EvalReport> out;
        if (j.is_array()) {
            for (const auto& r : j) {
                out.push_back(report_from(r));
            }
        } else {
            out.push_back(report_from(j));
        }
        return out;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("reports: ") + e.what());
    }
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, bool header) {
    if (header) {
        out << report_csv_header << '\n';
    }
    for (const auto& r : reports) {
        csv_row(out, r, "ALL", r.micro);
        for (std::size_t c = 0; c < r.per_class.size(); ++c) {
            csv_row(out, r, c < r.class_names.size() ? r.class_names[c] : std::to_string(c), r.per_class[c]);
        }
    }
}

}  // namespace scprobe
