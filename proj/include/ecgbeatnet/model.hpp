#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecgbeatnet/dataset.hpp"
#include "ecgbeatnet/nn.hpp"

namespace ecg::model {

// The architecture is fixed: six parameterized layers (four conv + two dense)
// with an identity-skip residual block around conv2/conv3.
//
//   conv1 (in -> 16, K=7) + ReLU + pool2
//   { conv2 (16 -> 16, K=5) + ReLU + conv3 (16 -> 16, K=5), + identity } + ReLU, pool2
//   conv4 (16 -> 32, K=3) + ReLU + pool2
//   global average pool
//   fc1 (32 -> 64) + ReLU
//   fc2 (64 -> 5)
struct ModelConfig {
    int in_channels = 2;
    int window_len = 256; // must be divisible by 8 (three pooling stages)
    uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 64;
    int epochs = 30;

    void validate() const;
};

template <typename T>
struct Param {
    std::string name;
    nn::Tensor<T> value;
    nn::Tensor<T> grad;
    nn::Tensor<T> m; // Adam first moment
    nn::Tensor<T> v; // Adam second moment

    Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(shape), m(shape), v(shape) {}
};

// Per-example gradient buffer, same order as Network::params(). Summing these
// in example order keeps batch reductions bit-reproducible regardless of how
// the examples were scheduled.
template <typename T>
struct Gradients {
    std::vector<nn::Tensor<T>> by_param;
};

template <typename T>
struct ForwardCache {
    uint64_t params_version = 0;
    nn::Tensor<T> input;
    nn::Tensor<T> conv1_out;
    nn::PoolResult<T> pool1;
    nn::Tensor<T> conv2_out;
    nn::Tensor<T> relu2_out;
    nn::Tensor<T> conv3_out;
    nn::Tensor<T> sum_out;
    nn::Tensor<T> block_out;
    nn::PoolResult<T> pool2;
    nn::Tensor<T> conv4_out;
    nn::PoolResult<T> pool3;
    nn::Tensor<T> gap_out;
    nn::Tensor<T> fc1_out;
    nn::Tensor<T> relu5_out;
    nn::Tensor<T> logits;
};

namespace detail {
inline constexpr int kConv1Out = 16, kConv1K = 7;
inline constexpr int kBlockChannels = 16, kBlockK = 5;
inline constexpr int kConv4Out = 32, kConv4K = 3;
inline constexpr int kFc1Out = 64;
} // namespace detail

template <typename T>
class Network {
public:
    explicit Network(const ModelConfig &config);

    const ModelConfig &config() const { return config_; }
    std::vector<Param<T>> &params() { return params_; }
    const std::vector<Param<T>> &params() const { return params_; }
    int64_t parameter_count() const;
    uint64_t params_version() const { return version_; }

    ForwardCache<T> forward(const nn::Tensor<T> &window) const;

    // Accumulates into the given buffer; params' own grads are untouched.
    void backward_into(const ForwardCache<T> &cache, const nn::Tensor<T> &dlogits,
                       Gradients<T> &sink) const;
    // Accumulates into the params' grad tensors.
    void backward(const ForwardCache<T> &cache, const nn::Tensor<T> &dlogits);

    Gradients<T> make_gradients() const;
    void zero_grad();

    // One bias-corrected Adam update from the currently stored gradients;
    // zeroes the gradients afterwards. t is the 1-based step index.
    void adam_step(const AdamHyper &hyper, int64_t t);

    // Raw weight overwrite (checkpoint load, best-epoch restore).
    void set_values(const std::vector<nn::Tensor<T>> &values);
    std::vector<nn::Tensor<T>> snapshot_values() const;

private:
    ModelConfig config_;
    std::vector<Param<T>> params_;
    uint64_t version_ = 1;
};

using NetworkF = Network<float>;
using NetworkD = Network<double>;

std::pair<wfdb::BeatClass, nn::Tensor<float>> predict(const NetworkF &net,
                                                      const nn::Tensor<float> &window);

nn::Tensor<float> window_tensor(const dataset::BeatWindow &window, int in_channels,
                                int window_len);

// Forward + weighted cross-entropy over the given windows; used for validation
// and test-bucket evaluation.
struct EvalStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
    int64_t n = 0;
};

// Runs fn(0..n) across up to `threads` workers. fn(i) must write only to its
// own slot so results do not depend on the schedule.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)> &fn);

EvalStats evaluate(const NetworkF &net, std::span<const dataset::BeatWindow> windows,
                   std::span<const uint32_t> indices, const std::array<double, 5> &weights,
                   int threads = 1);

// Averaged batch gradients accumulated into the params (summed in example
// order, then scaled by 1/batch). Returns (summed weighted loss, n correct).
std::pair<double, int64_t> accumulate_batch(NetworkF &net,
                                            std::span<const dataset::BeatWindow> windows,
                                            std::span<const uint32_t> indices,
                                            const std::array<double, 5> &weights, int threads);

struct EpochStats {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;    // NaN when the validation bucket is empty
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> stats;
    int best_epoch = 0;    // epoch whose weights were retained; 0 = final epoch
    int64_t adam_steps = 0;
};

// Mini-batch training with per-epoch deterministic shuffling and
// best-validation-accuracy weight retention (ties keep the earlier epoch).
TrainResult train(NetworkF &net, std::span<const dataset::BeatWindow> windows,
                  const dataset::DatasetSplit &split, const AdamHyper &hyper,
                  const std::array<double, 5> &weights, int threads = 1,
                  const std::function<void(const EpochStats &)> &on_epoch = nullptr);

// --- checkpoint file ("EBNC", little-endian) --------------------------------
//   magic "EBNC" | u16 version | u16 in_channels | u16 window_len |
//   u64 model_seed | u32 epoch | u64 split_seed | u64 adam_step | u16 n_params
//   per param: u8 name_len + name | u8 ndim | u32 dims... | f32 data
struct CheckpointMeta {
    uint32_t epoch = 0;
    uint64_t split_seed = 0;
    uint64_t adam_step = 0;
};

void save_checkpoint(const std::filesystem::path &path, const NetworkF &net,
                     const CheckpointMeta &meta);

struct LoadedCheckpoint {
    NetworkF net;
    CheckpointMeta meta;
};

// Load and validate against the requested config; disagreement is an error.
LoadedCheckpoint load_checkpoint(const std::filesystem::path &path, const ModelConfig &expected);
// Load with the config embedded in the file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path &path);

// --- template implementation --------------------------------------------------

template <typename T>
Network<T>::Network(const ModelConfig &config) : config_(config) {
    config_.validate();
    using namespace detail;
    const int c_in = config.in_channels;

    params_.reserve(12);
    params_.emplace_back("conv1.w", std::vector<int>{kConv1Out, c_in, kConv1K});
    params_.emplace_back("conv1.b", std::vector<int>{kConv1Out});
    params_.emplace_back("conv2.w", std::vector<int>{kBlockChannels, kConv1Out, kBlockK});
    params_.emplace_back("conv2.b", std::vector<int>{kBlockChannels});
    params_.emplace_back("conv3.w", std::vector<int>{kBlockChannels, kBlockChannels, kBlockK});
    params_.emplace_back("conv3.b", std::vector<int>{kBlockChannels});
    params_.emplace_back("conv4.w", std::vector<int>{kConv4Out, kBlockChannels, kConv4K});
    params_.emplace_back("conv4.b", std::vector<int>{kConv4Out});
    params_.emplace_back("fc1.w", std::vector<int>{kFc1Out, kConv4Out});
    params_.emplace_back("fc1.b", std::vector<int>{kFc1Out});
    params_.emplace_back("fc2.w", std::vector<int>{wfdb::kNumClasses, kFc1Out});
    params_.emplace_back("fc2.b", std::vector<int>{wfdb::kNumClasses});

    // He-normal weights (std = sqrt(2/fan_in)), zero biases. Each of the six
    // parameterized layers draws from its own (seed, layer-index) stream. The
    // classifier head starts at 1/16 of the He scale: at full scale the
    // initial logit spread puts the first loss near 3.5 instead of ln 5.
    for (size_t p = 0; p < params_.size(); p += 2) {
        Param<T> &weights = params_[p];
        const uint64_t layer_index = p / 2 + 1;
        const auto &shape = weights.value.shape;
        const int fan_in = shape.size() == 3 ? shape[1] * shape[2] : shape[1];
        double std_dev = std::sqrt(2.0 / fan_in);
        if (p == params_.size() - 2) std_dev /= 16.0;
        rng::Generator gen(config.seed, layer_index);
        for (T &v : weights.value.data) v = static_cast<T>(std_dev * gen.next_normal());
    }
}

template <typename T>
int64_t Network<T>::parameter_count() const {
    int64_t n = 0;
    for (const Param<T> &p : params_) n += p.value.numel();
    return n;
}

template <typename T>
Gradients<T> Network<T>::make_gradients() const {
    Gradients<T> g;
    g.by_param.reserve(params_.size());
    for (const Param<T> &p : params_) g.by_param.emplace_back(p.value.shape);
    return g;
}

template <typename T>
void Network<T>::zero_grad() {
    for (Param<T> &p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
}

namespace detail {
enum ParamIndex {
    kConv1W = 0, kConv1B, kConv2W, kConv2B, kConv3W, kConv3B,
    kConv4W, kConv4B, kFc1W, kFc1B, kFc2W, kFc2B,
};

template <typename T>
nn::Tensor<T> add_tensors(const nn::Tensor<T> &a, const nn::Tensor<T> &b) {
    if (a.shape != b.shape) throw ShapeMismatch("residual add: branch shapes differ");
    nn::Tensor<T> out;
    out.shape = a.shape;
    out.data.resize(a.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}
} // namespace detail

template <typename T>
ForwardCache<T> Network<T>::forward(const nn::Tensor<T> &window) const {
    using namespace detail;
    nn::require_shape(window, {config_.in_channels, config_.window_len}, "model input");
#ifndef NDEBUG
    nn::check_finite(window, "model input");
#endif

    ForwardCache<T> cache;
    cache.params_version = version_;
    cache.input = window;

    cache.conv1_out = nn::conv1d_forward(window, params_[kConv1W].value, params_[kConv1B].value);
    cache.pool1 = nn::maxpool1d_forward(nn::relu_forward(cache.conv1_out));

    cache.conv2_out =
        nn::conv1d_forward(cache.pool1.y, params_[kConv2W].value, params_[kConv2B].value);
    cache.relu2_out = nn::relu_forward(cache.conv2_out);
    cache.conv3_out =
        nn::conv1d_forward(cache.relu2_out, params_[kConv3W].value, params_[kConv3B].value);
    cache.sum_out = add_tensors(cache.pool1.y, cache.conv3_out);
    cache.block_out = nn::relu_forward(cache.sum_out);
    cache.pool2 = nn::maxpool1d_forward(cache.block_out);

    cache.conv4_out =
        nn::conv1d_forward(cache.pool2.y, params_[kConv4W].value, params_[kConv4B].value);
    cache.pool3 = nn::maxpool1d_forward(nn::relu_forward(cache.conv4_out));

    cache.gap_out = nn::global_avg_pool_forward(cache.pool3.y);
    cache.fc1_out = nn::dense_forward(cache.gap_out, params_[kFc1W].value, params_[kFc1B].value);
    cache.relu5_out = nn::relu_forward(cache.fc1_out);
    cache.logits =
        nn::dense_forward(cache.relu5_out, params_[kFc2W].value, params_[kFc2B].value);
#ifndef NDEBUG
    nn::check_finite(cache.logits, "model logits");
#endif
    return cache;
}

template <typename T>
void Network<T>::backward_into(const ForwardCache<T> &cache, const nn::Tensor<T> &dlogits,
                               Gradients<T> &sink) const {
    using namespace detail;
    if (cache.params_version != version_) {
        throw StaleCache("forward cache was built against different parameter values");
    }
    if (sink.by_param.size() != params_.size()) {
        throw ShapeMismatch("gradient buffer does not match the parameter list");
    }
    const int len = config_.window_len;

    nn::Tensor<T> d = nn::dense_backward(cache.relu5_out, params_[kFc2W].value, dlogits,
                                         sink.by_param[kFc2W], sink.by_param[kFc2B]);
    d = nn::relu_backward(cache.fc1_out, d);
    d = nn::dense_backward(cache.gap_out, params_[kFc1W].value, d, sink.by_param[kFc1W],
                           sink.by_param[kFc1B]);
    d = nn::global_avg_pool_backward(d, len / 8);
    d = nn::maxpool1d_backward(cache.pool3, d, len / 4);
    d = nn::relu_backward(cache.conv4_out, d);
    d = nn::conv1d_backward(cache.pool2.y, params_[kConv4W].value, d, sink.by_param[kConv4W],
                            sink.by_param[kConv4B]);
    d = nn::maxpool1d_backward(cache.pool2, d, len / 2);

    // Residual block: the gradient of the post-sum ReLU feeds both the conv
    // branch and the identity path.
    const nn::Tensor<T> dsum = nn::relu_backward(cache.sum_out, d);
    nn::Tensor<T> dbranch =
        nn::conv1d_backward(cache.relu2_out, params_[kConv3W].value, dsum,
                            sink.by_param[kConv3W], sink.by_param[kConv3B]);
    dbranch = nn::relu_backward(cache.conv2_out, dbranch);
    dbranch = nn::conv1d_backward(cache.pool1.y, params_[kConv2W].value, dbranch,
                                  sink.by_param[kConv2W], sink.by_param[kConv2B]);
    d = add_tensors(dbranch, dsum);

    d = nn::maxpool1d_backward(cache.pool1, d, len);
    d = nn::relu_backward(cache.conv1_out, d);
    nn::conv1d_backward(cache.input, params_[kConv1W].value, d, sink.by_param[kConv1W],
                        sink.by_param[kConv1B]);
}

template <typename T>
void Network<T>::backward(const ForwardCache<T> &cache, const nn::Tensor<T> &dlogits) {
    Gradients<T> sink = make_gradients();
    backward_into(cache, dlogits, sink);
    for (size_t p = 0; p < params_.size(); ++p) {
        auto &grad = params_[p].grad.data;
        const auto &add = sink.by_param[p].data;
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += add[i];
    }
}

template <typename T>
void Network<T>::adam_step(const AdamHyper &hyper, int64_t t) {
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (Param<T> &p : params_) {
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = static_cast<double>(p.grad.data[i]);
            const double m = hyper.beta1 * static_cast<double>(p.m.data[i]) +
                             (1.0 - hyper.beta1) * g;
            const double v = hyper.beta2 * static_cast<double>(p.v.data[i]) +
                             (1.0 - hyper.beta2) * g * g;
            p.m.data[i] = static_cast<T>(m);
            p.v.data[i] = static_cast<T>(v);
            const double update = hyper.lr * (m / bias1) / (std::sqrt(v / bias2) + hyper.eps);
            p.value.data[i] = static_cast<T>(static_cast<double>(p.value.data[i]) - update);
        }
        std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
    }
    ++version_;
}

template <typename T>
void Network<T>::set_values(const std::vector<nn::Tensor<T>> &values) {
    if (values.size() != params_.size()) {
        throw ShapeMismatch("value list does not match the parameter list");
    }
    for (size_t p = 0; p < params_.size(); ++p) {
        if (values[p].shape != params_[p].value.shape) {
            throw ShapeMismatch("value shape mismatch for " + params_[p].name);
        }
        params_[p].value = values[p];
    }
    ++version_;
}

template <typename T>
std::vector<nn::Tensor<T>> Network<T>::snapshot_values() const {
    std::vector<nn::Tensor<T>> values;
    values.reserve(params_.size());
    for (const Param<T> &p : params_) values.push_back(p.value);
    return values;
}

} // namespace ecg::model
