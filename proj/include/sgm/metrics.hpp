#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgm/model.hpp"
#include "sgm/sgm_module.hpp"

namespace sgm {

/// Fraction of samples where (q_hat > threshold) agrees with the label.
/// A prediction exactly at the threshold counts as negative.
float detection_accuracy(const std::vector<float>& quality_pred, const std::vector<GraspLabel>& labels,
                         float threshold = 0.5f);

/// Mean absolute angle error in degrees over positive samples only, folded
/// for bipodal symmetry: min(|d|, pi - |d|).
float angle_mae_deg(const std::vector<float>& angle_pred, const std::vector<GraspLabel>& labels);

struct AccountingRow {
    std::string layer;
    std::int64_t model_macs = 0;
    std::int64_t model_params = 0;
    std::int64_t act_elems = 0;
    std::int64_t act_bytes = 0;
    std::int64_t sgm_macs = 0;
    std::int64_t sgm_params = 0;
};

struct AccountingReport {
    std::vector<AccountingRow> rows;
    int batch = 1;
    std::string input_desc;
};

/// Closed-form per-layer resource accounting. MACs count multiplies only
/// (bias adds and BN excluded); activation bytes assume 32-bit floats.
AccountingReport account_model(const ModelConfig& config, const std::vector<SGMConfig>& sgms,
                               int input_h, int input_w, int batch);

/// The published resource table (batch and input geometry as reported).
std::vector<AccountingRow> paper_table_rows();

struct ModeComparison {
    std::int64_t savings_bytes = 0;        // activation bytes BP retains for the trailing k layers
    std::int64_t sgm_overhead_macs = 0;    // SGMs attached to trainable layers (head has none)
    std::int64_t trailing_model_macs = 0;  // model MACs of the trailing k layers
    double overhead_ratio = 0.0;
    std::int64_t bp_total_act_bytes = 0;   // sum over all layers
    std::int64_t ff_peak_act_bytes = 0;    // max activation among the trailing k layers
};

ModeComparison compare_modes(const std::vector<AccountingRow>& rows, int k);

/// Upper bound on the feed-forward trainer's update working set: the layer
/// input, four activation-sized buffers (conv out, activation, incoming
/// grad, BN backward scratch) and the SGM's internal tensors.
std::int64_t predicted_ff_peak_bytes(const ModelConfig& config, const std::vector<SGMConfig>& sgms,
                                     int input_extent, int batch, int k);

/// CSV and aligned-text renderings of a report (deterministic bytes).
std::string report_csv(const AccountingReport& report);
std::string report_table(const AccountingReport& report);

}  // namespace sgm
