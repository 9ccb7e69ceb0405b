#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgm/model.hpp"
#include "sgm/optim.hpp"
#include "sgm/sgm_module.hpp"
#include "sgm/taskgen.hpp"

namespace sgm {

enum class TrainMode { bp, sgm_static, sgm_online };
enum class SGMInit { trained, random };

struct FinetuneConfig {
    TrainMode mode = TrainMode::bp;
    int k_layers = 3;  // trailing trainable layers
    SGMInit sgm_init = SGMInit::trained;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 1;
    OptimizerConfig opt = OptimizerConfig::adam(1e-3f);
    OptimizerConfig sgm_opt = OptimizerConfig::sgd(0.1f);  // online supervision
    SGMLoss sgm_loss = SGMLoss::l2;
    int max_train_samples = 0;  // 0 = all (desk-scale reduction knob)
    int max_val_samples = 0;
};

struct MetaConfig {
    int meta_iterations = 300;
    int inner_steps = 20;
    int batch_size = 16;
    float beta = 0.5f;  // outer interpolation toward the adapted weights
    OptimizerConfig inner_opt = OptimizerConfig::sgd(0.1f);
    OptimizerConfig sgm_opt = OptimizerConfig::sgd(0.1f);
    SGMLoss sgm_loss = SGMLoss::l2;
    std::uint64_t seed = 1;
    int max_train_samples = 0;
};

struct HistoryRow {
    int epoch = 0;
    std::string split;  // "train" or "val"
    float loss = 0, loss_q = 0, loss_angle = 0;
    float det_acc = 0, angle_mae_deg = 0;
    std::int64_t peak_act_bytes = 0;
};
using History = std::vector<HistoryRow>;

struct MetaCurveRow {
    int iteration = 0;
    int task = 0;
    float sgm_loss = 0;    // mean supervision loss over the inner steps
    float model_loss = 0;  // mean head loss over the inner steps
};
using MetaCurve = std::vector<MetaCurveRow>;

/// Tracks bytes retained for deferred gradient use. Frozen-layer streaming
/// values are not retained; BP-mode captures and feed-forward update working
/// sets are. `on_update` fires right before each layer's optimizer step.
class ActivationLedger {
  public:
    void add(const std::string& name, std::int64_t bytes);
    void release(const std::string& name);
    std::int64_t current() const { return current_; }
    std::int64_t peak() const { return peak_; }
    std::vector<std::string> live() const;
    void reset();

    std::function<void(int layer, const ActivationLedger&)> on_update;

  private:
    std::map<std::string, std::int64_t> live_;
    std::int64_t current_ = 0;
    std::int64_t peak_ = 0;
};

struct StepMetrics {
    float loss = 0, loss_q = 0, loss_angle = 0;
    float sgm_loss_mean = 0;  // online mode only
    std::int64_t peak_retained_bytes = 0;
};

/// Oracle hook for tests: a non-empty grads[i] replaces layer i's synthetic
/// gradient with the given tensor.
struct GradInjector {
    std::vector<Tensor> grads;
};

/// Train-mode BN on the trailing k layers, eval elsewhere (frozen layers
/// must stay bit-identical, running stats included).
std::vector<BNMode> train_bn_modes(const Model& model, int k);

/// True gradients wrt the trailing k layers' activations at the current
/// weights. Runs on a scratch copy; the model is left untouched.
struct ActivationGrads {
    std::vector<Tensor> grads;  // indexed by layer; empty when not computed
    LossResult loss;
};
ActivationGrads bp_activation_grads(const Model& model, const Tensor& batch,
                                    const std::vector<GraspLabel>& labels, int k);

/// One standard forward + backward step updating the trailing k layers.
StepMetrics bp_step(Model& model, const Tensor& batch, const std::vector<GraspLabel>& labels,
                    int k, Optimizer& opt, ActivationLedger* ledger = nullptr);

/// One feed-forward step: each trainable layer is updated during the sweep
/// from its SGM gradient (head: true loss gradient) and its activation is
/// released before the next trainable layer completes. sgm-online mode also
/// gives each SGM one supervised step against reference gradients from a
/// frozen-snapshot BP pass.
StepMetrics ff_finetune_step(Model& model, std::vector<SGModule>& sgms, const Tensor& batch,
                             const std::vector<GraspLabel>& labels, const FinetuneConfig& cfg,
                             Optimizer& opt, Optimizer* sgm_opt = nullptr,
                             ActivationLedger* ledger = nullptr, const GradInjector* inject = nullptr);

struct EvalMetrics {
    float loss = 0, loss_q = 0, loss_angle = 0;
    float det_acc = 0, angle_mae_deg = 0;
};
EvalMetrics evaluate(Model& model, const std::vector<Sample>& samples, int max_samples, int batch_size);

/// Epoch loop over bp_step / ff_finetune_step with per-epoch train/val rows.
History finetune(Model& model, std::vector<SGModule>& sgms, const TaskDataset& task,
                 const FinetuneConfig& cfg, ActivationLedger* ledger = nullptr);

/// MAML-style pretraining: per iteration, adapt a task snapshot for K inner
/// steps with SGM-generated gradients (SGMs supervised by parallel BP on the
/// same batch), then interpolate the initialization toward the adapted
/// weights. SGM parameters persist across tasks.
std::pair<Model, std::vector<SGModule>> meta_pretrain(Model model, std::vector<SGModule> sgms,
                                                      const std::vector<TaskDataset>& tasks,
                                                      const MetaConfig& cfg, MetaCurve* curve = nullptr);

std::string history_csv(const History& history);
std::string meta_curve_csv(const MetaCurve& curve);

}  // namespace sgm
