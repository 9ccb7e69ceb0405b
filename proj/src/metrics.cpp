#include "sgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace sgm {

namespace {
constexpr double kPi = std::numbers::pi;
}

float detection_accuracy(const std::vector<float>& quality_pred, const std::vector<GraspLabel>& labels,
                         float threshold) {
    if (quality_pred.empty() || quality_pred.size() != labels.size()) {
        throw std::invalid_argument("detection_accuracy: empty or misaligned inputs");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < quality_pred.size(); ++i) {
        const bool predicted = quality_pred[i] > threshold;
        const bool actual = labels[i].quality == 1.0f;
        if (predicted == actual) {
            ++correct;
        }
    }
    return float(correct) / float(quality_pred.size());
}

float angle_mae_deg(const std::vector<float>& angle_pred, const std::vector<GraspLabel>& labels) {
    if (angle_pred.size() != labels.size()) {
        throw std::invalid_argument("angle_mae_deg: misaligned inputs");
    }
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < angle_pred.size(); ++i) {
        if (labels[i].quality != 1.0f) {
            continue;
        }
        double d = std::abs(double(angle_pred[i]) - double(labels[i].angle));
        d = std::fmod(d, kPi);
        sum += std::min(d, kPi - d);
        ++positives;
    }
    if (positives == 0) {
        throw std::invalid_argument("angle_mae_deg: no positive samples");
    }
    return float(sum / double(positives) * 180.0 / kPi);
}

AccountingReport account_model(const ModelConfig& config, const std::vector<SGMConfig>& sgms,
                               int input_h, int input_w, int batch) {
    config.validate();
    if (batch < 1) {
        throw std::invalid_argument("account_model: batch must be >= 1");
    }
    AccountingReport report;
    report.batch = batch;
    report.input_desc = std::to_string(config.input_channels) + "x" + std::to_string(input_h) + "x" +
                        std::to_string(input_w);

    int h = input_h, w = input_w;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& l = config.layers[i];
        const int oh = conv_out_extent(h, l.kernel, l.stride, l.padding);
        const int ow = conv_out_extent(w, l.kernel, l.stride, l.padding);

        AccountingRow row;
        row.layer = l.name;
        row.model_macs = std::int64_t(batch) * oh * ow * l.out_channels *
                         std::int64_t(l.kernel) * l.kernel * l.in_channels;
        row.model_params = std::int64_t(l.kernel) * l.kernel * l.in_channels * l.out_channels +
                           l.out_channels + (l.has_bn ? 2 * std::int64_t(l.out_channels) : 0);
        row.act_elems = std::int64_t(batch) * l.out_channels * oh * ow;
        row.act_bytes = row.act_elems * 4;

        for (const SGMConfig& s : sgms) {
            if (s.attach_layer != int(i)) {
                continue;
            }
            if (s.channels != l.out_channels) {
                throw std::invalid_argument("account_model: SGM at layer " + l.name +
                                            " has mismatched channel count");
            }
            const std::int64_t k2 = std::int64_t(s.kernel) * s.kernel;
            row.sgm_macs = std::int64_t(batch) * oh * ow * k2 *
                           (std::int64_t(s.hidden) * (s.channels + 3) + std::int64_t(s.channels) * s.hidden);
            row.sgm_params = s.param_count();
        }
        report.rows.push_back(row);
        h = oh;
        w = ow;
    }
    return report;
}

std::vector<AccountingRow> paper_table_rows() {
    // Activation column read as bytes (the unit that reconstructs the
    // published trailing-3 savings figure).
    return {
        {"1", 153'600'000, 624, 492'032, 1'968'128, 340'480'000, 1400},
        {"2", 87'680'000, 1620, 107'648, 430'592, 74'880'000, 1400},
        {"3", 35'130'240, 3250, 43'264, 173'056, 55'206'400, 5100},
        {"4", 10'318'080, 6450, 19'456, 77'824, 39'936, 624},
        {"5", 19'456, 304, 768, 3'072, 39'936, 624},
        {"6", 3'264, 51, 48, 192, 0, 0},
    };
}

ModeComparison compare_modes(const std::vector<AccountingRow>& rows, int k) {
    const int n = int(rows.size());
    if (k < 1 || k > n) {
        throw std::invalid_argument("compare_modes: k must be in [1, layer count]");
    }
    ModeComparison cmp;
    for (int i = 0; i < n; ++i) {
        cmp.bp_total_act_bytes += rows[std::size_t(i)].act_bytes;
        if (i >= n - k) {
            const AccountingRow& row = rows[std::size_t(i)];
            cmp.savings_bytes += row.act_bytes;
            cmp.trailing_model_macs += row.model_macs;
            if (i != n - 1) {  // the head takes its gradient straight from the loss
                cmp.sgm_overhead_macs += row.sgm_macs;
            }
            cmp.ff_peak_act_bytes = std::max(cmp.ff_peak_act_bytes, row.act_bytes);
        }
    }
    cmp.overhead_ratio = cmp.trailing_model_macs > 0
                             ? double(cmp.sgm_overhead_macs) / double(cmp.trailing_model_macs)
                             : 0.0;
    return cmp;
}

std::int64_t predicted_ff_peak_bytes(const ModelConfig& config, const std::vector<SGMConfig>& sgms,
                                     int input_extent, int batch, int k) {
    const int n = int(config.layers.size());
    if (k < 1 || k > n) {
        throw std::invalid_argument("predicted_ff_peak_bytes: k out of range");
    }
    const std::vector<int> chain = config.extent_chain(input_extent);

    auto act_bytes = [&](int layer) {  // layer -1 = input batch
        const int extent = chain[std::size_t(layer + 1)];
        const int ch = layer < 0 ? config.input_channels : config.layers[std::size_t(layer)].out_channels;
        return std::int64_t(batch) * ch * extent * extent * 4;
    };

    std::int64_t peak = 0;
    for (int i = n - k; i < n; ++i) {
        std::int64_t working = act_bytes(i - 1) + 4 * act_bytes(i);
        for (const SGMConfig& s : sgms) {
            if (s.attach_layer == i) {
                const int extent = chain[std::size_t(i + 1)];
                working += std::int64_t(batch) * (s.channels + 3 + 2 * s.hidden + s.channels) *
                           extent * extent * 4;
            }
        }
        peak = std::max(peak, working);
    }
    return peak;
}

std::string report_csv(const AccountingReport& report) {
    std::string out = "layer,model_macs,model_params,act_elems,act_bytes,sgm_macs,sgm_params\n";
    for (const AccountingRow& r : report.rows) {
        out += r.layer + "," + std::to_string(r.model_macs) + "," + std::to_string(r.model_params) + "," +
               std::to_string(r.act_elems) + "," + std::to_string(r.act_bytes) + "," +
               std::to_string(r.sgm_macs) + "," + std::to_string(r.sgm_params) + "\n";
    }
    return out;
}

std::string report_table(const AccountingReport& report) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "input %s, batch %d\n", report.input_desc.c_str(), report.batch);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-8s %14s %10s %14s %14s %10s\n", "Layer", "MAC", "Param",
                  "Activations", "SGM MAC", "SGM Param");
    out += buf;
    for (const AccountingRow& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-8s %14lld %10lld %14lld %14lld %10lld\n", r.layer.c_str(),
                      (long long)r.model_macs, (long long)r.model_params, (long long)r.act_bytes,
                      (long long)r.sgm_macs, (long long)r.sgm_params);
        out += buf;
    }
    return out;
}

}  // namespace sgm
