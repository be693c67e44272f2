#include "dialeval/report.hpp"

#include <map>
#include <set>

namespace dialeval {

namespace {

std::string cell(const std::optional<double>& v) {
    return v.has_value() ? format_number(*v) : "NA";
}

std::string cell(const Rational& r) {
    return r.defined() ? format_number(r.value()) : "NA";
}

ojson json_or_null(const std::optional<double>& v) {
    return v.has_value() ? ojson(*v) : ojson(nullptr);
}

}  // namespace

ojson metric_report_to_json(const MetricReport& r) {
    ojson j = ojson::object();
    j["dialogue_id"] = r.dialogue_id;
    j["complexity"] = r.complexity;
    j["dgcr"] = r.dgcr_value.defined()
                    ? ojson{{"num", r.dgcr_value.num},
                            {"den", r.dgcr_value.den},
                            {"value", r.dgcr_value.value()}}
                    : ojson{{"num", r.dgcr_value.num}, {"den", 0}, {"value", nullptr}};
    j["naive_completion_rate"] = r.naive_rate.defined()
                                     ? ojson{{"num", r.naive_rate.num},
                                             {"den", r.naive_rate.den},
                                             {"value", r.naive_rate.value()}}
                                     : ojson{{"num", r.naive_rate.num},
                                             {"den", 0},
                                             {"value", nullptr}};
    j["ntc_mean"] = json_or_null(r.ntc_mean);
    j["memory_recall_acc"] = json_or_null(r.memory_recall_acc);
    j["recall_probes"] = {{"status_probes", r.recall_breakdown.status_probes},
                          {"status_correct", r.recall_breakdown.status_correct},
                          {"slot_probes", r.recall_breakdown.slot_probes},
                          {"slot_correct", r.recall_breakdown.slot_correct}};
    j["proactivity_effectiveness"] = json_or_null(r.proactivity);
    j["proactive_candidates"] = r.proactive_candidates;
    j["detection"] = {{"precision", r.detection.precision},
                      {"recall", r.detection.recall},
                      {"f1", r.detection.f1}};
    j["status_tracking_acc"] = json_or_null(r.status_tracking);
    ojson curve = ojson::array();
    for (const auto& cp : r.online_curve) {
        curve.push_back({{"progress_percent", cp.progress_percent},
                         {"detection_f1", json_or_null(cp.detection_f1)},
                         {"status_acc", json_or_null(cp.status_acc)}});
    }
    j["online_curve"] = curve;
    j["turn_quality"] = json_or_null(r.turn_quality);
    j["dialogue_quality"] = json_or_null(r.dialogue_quality);
    j["turn_count"] = r.turn_count;
    j["latency_total_ms"] = r.latency_total_ms;
    j["input_tokens"] = r.input_tokens;
    j["output_tokens"] = r.output_tokens;
    j["judge_calls"] = r.judge_calls;
    j["diagnostics"] = r.diagnostics;
    return j;
}

std::string aggregate_csv(const std::vector<MetricReport>& reports) {
    std::string out =
        "dialogue_id,complexity,dgcr,naive_completion_rate,ntc_mean,memory_recall_acc,"
        "proactivity_effectiveness,detection_precision,detection_recall,detection_f1,"
        "status_tracking_acc,turn_quality,dialogue_quality,latency_total_ms,input_tokens,"
        "output_tokens,judge_calls\n";
    for (const auto& r : reports) {
        out += r.dialogue_id + "," + r.complexity + "," + cell(r.dgcr_value) + "," +
               cell(r.naive_rate) + "," + cell(r.ntc_mean) + "," + cell(r.memory_recall_acc) +
               "," + cell(r.proactivity) + "," + format_number(r.detection.precision) + "," +
               format_number(r.detection.recall) + "," + format_number(r.detection.f1) + "," +
               cell(r.status_tracking) + "," + cell(r.turn_quality) + "," +
               cell(r.dialogue_quality) + "," + format_number(r.latency_total_ms) + "," +
               std::to_string(r.input_tokens) + "," + std::to_string(r.output_tokens) + "," +
               std::to_string(r.judge_calls) + "\n";
    }
    return out;
}

std::string online_curve_csv(const std::vector<MetricReport>& reports) {
    std::string out = "dialogue_id,progress_percent,detection_f1,status_acc\n";
    for (const auto& r : reports) {
        for (const auto& cp : r.online_curve) {
            out += r.dialogue_id + "," + std::to_string(cp.progress_percent) + "," +
                   cell(cp.detection_f1) + "," + cell(cp.status_acc) + "\n";
        }
    }
    return out;
}

std::string correlations_csv(const std::vector<CorrelationRow>& medium_rows,
                             const std::vector<CorrelationRow>& complex_rows) {
    std::string out =
        "metric,medium_n,medium_pearson_r,medium_spearman_rho,complex_n,complex_pearson_r,"
        "complex_spearman_rho\n";
    std::vector<std::string> order;
    std::map<std::string, const CorrelationRow*> medium_by;
    std::map<std::string, const CorrelationRow*> complex_by;
    for (const auto& row : medium_rows) {
        order.push_back(row.metric);
        medium_by[row.metric] = &row;
    }
    for (const auto& row : complex_rows) {
        if (!medium_by.count(row.metric)) order.push_back(row.metric);
        complex_by[row.metric] = &row;
    }
    for (const auto& name : order) {
        const CorrelationRow* m = medium_by.count(name) ? medium_by[name] : nullptr;
        const CorrelationRow* c = complex_by.count(name) ? complex_by[name] : nullptr;
        out += name + ",";
        out += (m != nullptr ? std::to_string(m->n) : "0") + ",";
        out += (m != nullptr ? cell(m->pearson_r) : "NA") + ",";
        out += (m != nullptr ? cell(m->spearman_rho) : "NA") + ",";
        out += (c != nullptr ? std::to_string(c->n) : "0") + ",";
        out += (c != nullptr ? cell(c->pearson_r) : "NA") + ",";
        out += (c != nullptr ? cell(c->spearman_rho) : "NA") + "\n";
    }
    return out;
}

std::string efficiency_csv(const std::vector<EfficiencyRow>& rows) {
    std::string out =
        "complexity,turn_count,latency_mean_ms,latency_min_ms,latency_max_ms,"
        "input_tokens_mean,output_tokens_mean\n";
    for (const auto& r : rows) {
        out += r.complexity + "," + std::to_string(r.turn_count) + "," +
               format_number(r.latency_mean) + "," + format_number(r.latency_min) + "," +
               format_number(r.latency_max) + "," + format_number(r.input_tokens_mean) + "," +
               format_number(r.output_tokens_mean) + "\n";
    }
    return out;
}

// Published results for the memory-based evaluator; detection/status rows are
// percentages, the latency row is a reported upper bound in milliseconds.
const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows = {
        {"dgcr", 0.967, 0.930, ""},
        {"ntc_mean", 7.04, 10.50, "turns"},
        {"memory_recall_acc", 0.913, 0.743, ""},
        {"proactivity_effectiveness", 0.619, 0.586, ""},
        {"turn_quality", 0.752, 0.766, ""},
        {"dialogue_quality", 4.40, 4.45, "1-5 scale"},
        {"detection_f1", 91.92, 86.49, "percent"},
        {"status_tracking_acc", 92.31, 84.28, "percent"},
        {"per_turn_latency_ms", std::nullopt, 25000.0, "reported upper bound"},
    };
    return rows;
}

std::string comparison_csv(const std::vector<MetricReport>& reports) {
    struct Mean {
        double sum = 0.0;
        int n = 0;
        void add(const std::optional<double>& v) {
            if (!v.has_value()) return;
            sum += *v;
            ++n;
        }
        std::optional<double> value() const {
            if (n == 0) return std::nullopt;
            return sum / n;
        }
    };
    std::map<std::string, std::map<std::string, Mean>> means;  // metric -> class -> mean
    for (const auto& r : reports) {
        auto& by_class = means;
        by_class["dgcr"][r.complexity].add(
            r.dgcr_value.defined() ? std::optional<double>(r.dgcr_value.value()) : std::nullopt);
        by_class["ntc_mean"][r.complexity].add(r.ntc_mean);
        by_class["memory_recall_acc"][r.complexity].add(r.memory_recall_acc);
        by_class["proactivity_effectiveness"][r.complexity].add(r.proactivity);
        by_class["turn_quality"][r.complexity].add(r.turn_quality);
        by_class["dialogue_quality"][r.complexity].add(r.dialogue_quality);
        by_class["detection_f1"][r.complexity].add(r.detection.f1 * 100.0);
        by_class["status_tracking_acc"][r.complexity].add(
            r.status_tracking.has_value() ? std::optional<double>(*r.status_tracking * 100.0)
                                          : std::nullopt);
        by_class["per_turn_latency_ms"][r.complexity].add(
            r.turn_count > 0 ? std::optional<double>(r.latency_total_ms / r.turn_count)
                             : std::nullopt);
    }
    std::string out = "metric,reference_medium,reference_complex,run_medium,run_complex,note\n";
    for (const auto& ref : reference_rows()) {
        std::optional<double> run_medium;
        std::optional<double> run_complex;
        auto it = means.find(ref.metric);
        if (it != means.end()) {
            auto mit = it->second.find("medium");
            if (mit != it->second.end()) run_medium = mit->second.value();
            auto cit = it->second.find("complex");
            if (cit != it->second.end()) run_complex = cit->second.value();
        }
        out += ref.metric + "," + cell(ref.reference_medium) + "," + cell(ref.reference_complex) +
               "," + cell(run_medium) + "," + cell(run_complex) + "," + ref.note + "\n";
    }
    return out;
}

}  // namespace dialeval
