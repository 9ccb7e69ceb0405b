#include "sgm/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
constexpr float kHalfPi = kPi / 2.0f;

// Seed stream tags.
constexpr std::uint64_t kObjStream = 0x6f626a65ull;
constexpr std::uint64_t kBgStream = 0x6267ull;
constexpr std::uint64_t kAugStream = 0x617567ull;
constexpr std::uint64_t kSampleStream = 0x73616d70ull;

/// Background: per-channel 5x5 control grid, bilinearly upsampled. Muted
/// mid-gray range so object colors stay clearly separable.
struct Background {
    static constexpr int kGrid = 5;
    float ctrl[3][kGrid][kGrid];

    explicit Background(std::uint64_t seed) {
        Rng rng(mix_seed(seed, kBgStream));
        for (auto& channel : ctrl) {
            for (auto& row : channel) {
                for (float& v : row) {
                    v = rng.uniform(0.30f, 0.55f);
                }
            }
        }
    }

    float at(int c, int y, int x) const {
        const float fy = float(y) / float(kCropSize - 1) * float(kGrid - 1);
        const float fx = float(x) / float(kCropSize - 1) * float(kGrid - 1);
        const int y0 = std::min(int(fy), kGrid - 2);
        const int x0 = std::min(int(fx), kGrid - 2);
        const float ty = fy - float(y0);
        const float tx = fx - float(x0);
        const float a = ctrl[c][y0][x0] * (1 - tx) + ctrl[c][y0][x0 + 1] * tx;
        const float b = ctrl[c][y0 + 1][x0] * (1 - tx) + ctrl[c][y0 + 1][x0 + 1] * tx;
        return a * (1 - ty) + b * ty;
    }
};

/// Even-odd crossing test against a closed polygon.
bool point_in_polygon(const std::vector<std::array<float, 2>>& poly, float px, float py) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const float yi = poly[i][1], yj = poly[j][1];
        const float xi = poly[i][0], xj = poly[j][0];
        if ((yi > py) != (yj > py)) {
            const float x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
            if (px < x_cross) {
                inside = !inside;
            }
        }
    }
    return inside;
}

}  // namespace

ObjectSpec generate_object(std::uint64_t seed) {
    Rng rng(mix_seed(seed, kObjStream));
    ObjectSpec obj;
    obj.seed = seed;
    obj.half_length = rng.uniform(30.0f, 42.0f);
    const float aspect = rng.uniform(1.9f, 2.6f);
    obj.half_width = obj.half_length / aspect;

    // Half outline with radial jitter; the second half is the exact point
    // reflection, which gives the polygon its order-2 symmetry.
    const int half = 5 + rng.below(4);
    obj.vertices.reserve(std::size_t(2 * half));
    for (int i = 0; i < half; ++i) {
        const float phi = (float(i) + 0.25f + 0.5f * rng.unit()) * kPi / float(half);
        const float r = rng.uniform(0.80f, 1.0f);
        obj.vertices.push_back({obj.half_length * r * std::cos(phi), obj.half_width * r * std::sin(phi)});
    }
    for (int i = 0; i < half; ++i) {
        obj.vertices.push_back({-obj.vertices[std::size_t(i)][0], -obj.vertices[std::size_t(i)][1]});
    }

    const int regions = 2 + rng.below(3);
    for (int r = 0; r < regions; ++r) {
        const int dominant = rng.below(3);
        std::array<float, 3> col;
        for (int c = 0; c < 3; ++c) {
            col[std::size_t(c)] = (c == dominant) ? rng.uniform(0.65f, 0.95f) : rng.uniform(0.05f, 0.40f);
        }
        obj.region_colors.push_back(col);
    }
    std::vector<float> limits;
    for (int r = 0; r + 1 < regions; ++r) {
        limits.push_back(rng.uniform(0.25f, 0.85f));
    }
    std::sort(limits.begin(), limits.end());
    obj.region_limits = std::move(limits);
    return obj;
}

Sample render_sample(const ObjectSpec& obj, float theta, float offset_x, float offset_y,
                     bool positive, bool augment, std::uint64_t sample_seed) {
    const float mag = std::sqrt(offset_x * offset_x + offset_y * offset_y);
    if (positive && mag > kPosRadius) {
        throw std::invalid_argument("render_sample: positive offset beyond the positive band");
    }
    if (!positive && (mag < kNegRadiusMin || mag > kNegRadiusMax)) {
        throw std::invalid_argument("render_sample: negative offset outside the negative band");
    }

    // Canonical rotation: trig from the wrapped angle with an explicit sign
    // flip, so theta and theta+pi give exactly negated rotation matrices and
    // the point-symmetric object renders bit-identically.
    const float wrapped = wrap_angle(theta);
    const int half_turns = int(std::lround(double(theta - wrapped) / double(kPi)));
    float cos_t = std::cos(wrapped);
    float sin_t = std::sin(wrapped);
    if (half_turns % 2 != 0) {
        cos_t = -cos_t;
        sin_t = -sin_t;
    }

    const float cx = float(kCropSize - 1) / 2.0f + offset_x;
    const float cy = float(kCropSize - 1) / 2.0f + offset_y;

    std::vector<std::array<float, 2>> world;
    world.reserve(obj.vertices.size());
    float min_x = float(kCropSize), max_x = 0.0f, min_y = float(kCropSize), max_y = 0.0f;
    for (const auto& v : obj.vertices) {
        const float wx = cx + cos_t * v[0] - sin_t * v[1];
        const float wy = cy + sin_t * v[0] + cos_t * v[1];
        world.push_back({wx, wy});
        min_x = std::min(min_x, wx);
        max_x = std::max(max_x, wx);
        min_y = std::min(min_y, wy);
        max_y = std::max(max_y, wy);
    }

    Sample s;
    s.image = Tensor(1, 3, kCropSize, kCropSize);
    s.object_seed = obj.seed;
    s.rotation = theta;
    s.offset_x = offset_x;
    s.offset_y = offset_y;
    s.sample_seed = sample_seed;
    s.label.quality = positive ? 1.0f : 0.0f;
    s.label.angle = wrap_angle(theta);

    const Background bg(sample_seed);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < kCropSize; ++y) {
            for (int x = 0; x < kCropSize; ++x) {
                s.image.at(0, c, y, x) = bg.at(c, y, x);
            }
        }
    }

    const int x_lo = std::max(0, int(std::floor(min_x)));
    const int x_hi = std::min(kCropSize - 1, int(std::ceil(max_x)));
    const int y_lo = std::max(0, int(std::floor(min_y)));
    const int y_hi = std::min(kCropSize - 1, int(std::ceil(max_y)));
    constexpr int kSub = 4;  // 4x4 supersampling

    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            int hits = 0;
            float col[3] = {0.0f, 0.0f, 0.0f};
            for (int sy = 0; sy < kSub; ++sy) {
                const float py = float(y) - 0.5f + (float(sy) + 0.5f) / float(kSub);
                for (int sx = 0; sx < kSub; ++sx) {
                    const float px = float(x) - 0.5f + (float(sx) + 0.5f) / float(kSub);
                    if (!point_in_polygon(world, px, py)) {
                        continue;
                    }
                    // Texture band from the local major-axis coordinate;
                    // |lx| keeps it symmetric under the pi flip.
                    const float lx = cos_t * (px - cx) + sin_t * (py - cy);
                    const float t = std::min(1.0f, std::abs(lx) / obj.half_length);
                    std::size_t region = 0;
                    while (region < obj.region_limits.size() && t > obj.region_limits[region]) {
                        ++region;
                    }
                    ++hits;
                    for (int c = 0; c < 3; ++c) {
                        col[c] += obj.region_colors[region][std::size_t(c)];
                    }
                }
            }
            if (hits > 0) {
                const float cover = float(hits) / float(kSub * kSub);
                for (int c = 0; c < 3; ++c) {
                    const float base = s.image.at(0, c, y, x);
                    s.image.at(0, c, y, x) = base * (1.0f - cover) + col[c] / float(kSub * kSub);
                }
            }
        }
    }

    if (augment) {
        Rng rng(mix_seed(sample_seed, kAugStream));
        const float brightness = rng.uniform(0.8f, 1.2f);
        float gain[3];
        for (float& g : gain) {
            g = rng.uniform(0.9f, 1.1f);
        }
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < kCropSize; ++y) {
                for (int x = 0; x < kCropSize; ++x) {
                    float v = s.image.at(0, c, y, x) * brightness * gain[c];
                    s.image.at(0, c, y, x) = std::clamp(v, 0.0f, 1.0f);
                }
            }
        }
    }
    return s;
}

TaskDataset generate_task(const ObjectSpec& obj, int train_size, int val_size, std::uint64_t seed) {
    if (train_size < 0 || val_size < 0) {
        throw std::invalid_argument("generate_task: negative split size");
    }
    TaskDataset task;
    task.object_seed = obj.seed;
    task.dataset_seed = seed;

    auto make_split = [&](int count, int index_base) {
        std::vector<Sample> split;
        split.reserve(std::size_t(count));
        for (int i = 0; i < count; ++i) {
            const std::uint64_t sample_seed = mix_seed(mix_seed(obj.seed, seed), kSampleStream,
                                                       std::uint64_t(index_base + i));
            Rng rng(sample_seed);
            const bool positive = (i % 2 == 0);  // exact 50/50 per split
            const float theta = kHalfPi - kPi * rng.unit();  // uniform over (-pi/2, pi/2]
            float dx = 0.0f, dy = 0.0f;
            if (!positive) {
                const float dir = rng.uniform(0.0f, 2.0f * kPi);
                const float magnitude = rng.uniform(kNegRadiusMin, kNegRadiusMax);
                dx = magnitude * std::cos(dir);
                dy = magnitude * std::sin(dir);
            }
            split.push_back(render_sample(obj, theta, dx, dy, positive, true, sample_seed));
        }
        return split;
    };

    task.train = make_split(train_size, 0);
    task.val = make_split(val_size, train_size);
    return task;
}

// ---------------------------------------------------------------------------
// TaskPack IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'G', 'M', 'T', 'A', 'S', 'K', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

float read_f32(std::istream& in) {
    const std::uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_sample(std::ostream& out, const Sample& s) {
    const unsigned char q = s.label.quality > 0.5f ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&q), 1);
    write_f32(out, s.label.angle);
    for (float v : s.image.data) {
        write_f32(out, v);
    }
}

Sample read_sample(std::istream& in) {
    Sample s;
    unsigned char q = 0;
    in.read(reinterpret_cast<char*>(&q), 1);
    s.label.quality = q ? 1.0f : 0.0f;
    s.label.angle = read_f32(in);
    s.image = Tensor(1, 3, kCropSize, kCropSize);
    for (float& v : s.image.data) {
        v = read_f32(in);
    }
    return s;
}

}  // namespace

void save_taskpack(const std::string& path, const TaskDataset& task) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_taskpack: cannot open " + path);
    }
    out.write(kMagic, 8);
    write_u32(out, std::uint32_t(task.train.size() + task.val.size()));
    for (const Sample& s : task.train) {
        write_sample(out, s);
    }
    for (const Sample& s : task.val) {
        write_sample(out, s);
    }
    if (!out) {
        throw std::runtime_error("save_taskpack: write failed for " + path);
    }

    std::ofstream man(path + ".manifest");
    if (!man) {
        throw std::runtime_error("save_taskpack: cannot open " + path + ".manifest");
    }
    man << "generator_version=" << kTaskGenVersion << "\n"
        << "object_seed=" << task.object_seed << "\n"
        << "dataset_seed=" << task.dataset_seed << "\n"
        << "train=" << task.train.size() << "\n"
        << "val=" << task.val.size() << "\n";
}

TaskDataset load_taskpack(const std::string& path) {
    std::ifstream man(path + ".manifest");
    if (!man) {
        throw std::runtime_error("load_taskpack: missing manifest for " + path);
    }
    std::uint64_t object_seed = 0, dataset_seed = 0;
    std::size_t train_n = 0, val_n = 0;
    std::string line;
    while (std::getline(man, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "object_seed") object_seed = std::stoull(value);
        else if (key == "dataset_seed") dataset_seed = std::stoull(value);
        else if (key == "train") train_n = std::stoul(value);
        else if (key == "val") val_n = std::stoul(value);
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_taskpack: cannot open " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("load_taskpack: bad magic in " + path);
    }
    const std::uint32_t count = read_u32(in);
    if (count != train_n + val_n) {
        throw std::runtime_error("load_taskpack: manifest split sizes do not match sample count");
    }

    TaskDataset task;
    task.object_seed = object_seed;
    task.dataset_seed = dataset_seed;
    task.train.reserve(train_n);
    task.val.reserve(val_n);
    for (std::size_t i = 0; i < train_n; ++i) {
        task.train.push_back(read_sample(in));
    }
    for (std::size_t i = 0; i < val_n; ++i) {
        task.val.push_back(read_sample(in));
    }
    if (!in) {
        throw std::runtime_error("load_taskpack: truncated file " + path);
    }
    for (const Sample& s : task.train) {
        ensure_finite(s.image, "load_taskpack");
    }
    return task;
}

Tensor stack_samples(const std::vector<Sample>& samples, const std::vector<int>& indices) {
    if (indices.empty()) {
        throw std::invalid_argument("stack_samples: empty batch");
    }
    const Tensor& first = samples[std::size_t(indices[0])].image;
    Tensor batch(int(indices.size()), first.c, first.h, first.w);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Tensor& img = samples[std::size_t(indices[b])].image;
        std::copy(img.data.begin(), img.data.end(),
                  batch.data.begin() + std::int64_t(b) * img.size());
    }
    return batch;
}

std::vector<GraspLabel> gather_labels(const std::vector<Sample>& samples, const std::vector<int>& indices) {
    std::vector<GraspLabel> labels;
    labels.reserve(indices.size());
    for (int i : indices) {
        labels.push_back(samples[std::size_t(i)].label);
    }
    return labels;
}

}  // namespace sgm
