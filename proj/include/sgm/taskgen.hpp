#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sgm/model.hpp"
#include "sgm/tensor.hpp"

namespace sgm {

/// Offset bands separating the positive and negative sample classes (pixels).
constexpr float kPosRadius = 2.0f;
constexpr float kNegRadiusMin = 16.0f;
constexpr float kNegRadiusMax = 48.0f;
constexpr int kCropSize = 128;
constexpr std::uint32_t kTaskGenVersion = 1;

/// A procedurally generated object: an elongated point-symmetric polygon
/// (so it looks identical rotated by pi, like a bipodal grasp target) with
/// 2-4 colored bands across its major axis. Orientation is recoverable
/// modulo pi from the silhouette; aspect >= 1.8 keeps it learnable.
struct ObjectSpec {
    std::uint64_t seed = 0;
    float half_length = 0.0f;  // L
    float half_width = 0.0f;   // W; aspect = L/W
    std::vector<std::array<float, 2>> vertices;       // local coords, 2M, v[i+M] == -v[i]
    std::vector<std::array<float, 3>> region_colors;  // 2..4 RGB
    std::vector<float> region_limits;                 // ascending thresholds on |x|/L

    float aspect() const { return half_length / half_width; }
};

struct Sample {
    Tensor image;  // (1,3,128,128), values in [0,1]
    GraspLabel label;
    // provenance
    std::uint64_t object_seed = 0;
    float rotation = 0.0f;
    float offset_x = 0.0f, offset_y = 0.0f;
    std::uint64_t sample_seed = 0;
};

struct TaskDataset {
    std::uint64_t object_seed = 0;
    std::uint64_t dataset_seed = 0;
    std::vector<Sample> train, val;
};

ObjectSpec generate_object(std::uint64_t seed);

/// Rasterizes the object rotated by theta at crop center + offset over a
/// procedural background, then (optionally) applies brightness and color
/// jitter. `positive` selects the offset band the call must respect.
Sample render_sample(const ObjectSpec& obj, float theta, float offset_x, float offset_y,
                     bool positive, bool augment, std::uint64_t sample_seed);

/// Fixed-size per-object dataset: exact split sizes, 50/50 classes in each
/// split, rotations uniform over (-pi/2, pi/2], positives centered.
TaskDataset generate_task(const ObjectSpec& obj, int train_size, int val_size, std::uint64_t seed);

// --------------------------------------------------------------------------
// TaskPack container: magic "SGMTASK1", u32 sample count, then per sample a
// quality byte, little-endian f32 angle and 3*128*128 little-endian f32
// pixels. A plain-text manifest (path + ".manifest") carries seeds, split
// sizes and the generator version.
// --------------------------------------------------------------------------

void save_taskpack(const std::string& path, const TaskDataset& task);
TaskDataset load_taskpack(const std::string& path);

/// Batch assembly for training: stacks the given samples into (B,3,H,W).
Tensor stack_samples(const std::vector<Sample>& samples, const std::vector<int>& indices);
std::vector<GraspLabel> gather_labels(const std::vector<Sample>& samples, const std::vector<int>& indices);

}  // namespace sgm
