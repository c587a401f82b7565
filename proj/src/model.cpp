#include "ecgbeatnet/model.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "ecgbeatnet/errors.hpp"
#include "ecgbeatnet/io.hpp"

namespace ecg::model {

namespace {

constexpr uint16_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[4] = {'E', 'B', 'N', 'C'};

// Epoch shuffles draw from streams disjoint from the init streams (1..6).
constexpr uint64_t kEpochStreamBase = 1ULL << 32;

} // namespace

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)> &fn) {
    if (threads <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int n_workers = static_cast<int>(std::min<int64_t>(threads, n));
    std::atomic<int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            try {
                for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto &worker : workers) worker.join();
    if (first_error) std::rethrow_exception(first_error);
}

void ModelConfig::validate() const {
    if (in_channels < 1) {
        throw ConfigError("in_channels must be at least 1, got " + std::to_string(in_channels));
    }
    if (window_len <= 0 || window_len % 8 != 0) {
        throw ConfigError("window_len must be a positive multiple of 8, got " +
                          std::to_string(window_len));
    }
}

void AdamHyper::validate() const {
    if (lr < 0) throw ConfigError("learning rate must be non-negative");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (eps <= 0) throw ConfigError("Adam epsilon must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
}

nn::Tensor<float> window_tensor(const dataset::BeatWindow &window, int in_channels,
                                int window_len) {
    const size_t expected = static_cast<size_t>(in_channels) * static_cast<size_t>(window_len);
    if (window.channels.size() != expected) {
        throw ShapeMismatch("beat window from record " + window.record_id + " holds " +
                            std::to_string(window.channels.size()) + " samples, model expects " +
                            std::to_string(expected));
    }
    return nn::Tensor<float>({in_channels, window_len}, window.channels);
}

std::pair<wfdb::BeatClass, nn::Tensor<float>> predict(const NetworkF &net,
                                                      const nn::Tensor<float> &window) {
    const ForwardCache<float> cache = net.forward(window);
    nn::Tensor<float> probs = nn::softmax(cache.logits);
    // max_element returns the first maximum, i.e. the lower class index on ties
    const auto best = std::max_element(probs.data.begin(), probs.data.end());
    const auto cls = static_cast<wfdb::BeatClass>(best - probs.data.begin());
    return {cls, std::move(probs)};
}

EvalStats evaluate(const NetworkF &net, std::span<const dataset::BeatWindow> windows,
                   std::span<const uint32_t> indices, const std::array<double, 5> &weights,
                   int threads) {
    EvalStats stats;
    stats.n = static_cast<int64_t>(indices.size());
    if (indices.empty()) {
        stats.mean_loss = std::numeric_limits<double>::quiet_NaN();
        stats.accuracy = std::numeric_limits<double>::quiet_NaN();
        return stats;
    }
    const ModelConfig &config = net.config();
    std::vector<double> losses(indices.size());
    std::vector<uint8_t> correct(indices.size());
    parallel_for(static_cast<int64_t>(indices.size()), threads, [&](int64_t i) {
        const dataset::BeatWindow &window = windows[indices[static_cast<size_t>(i)]];
        const auto input = window_tensor(window, config.in_channels, config.window_len);
        const auto cache = net.forward(input);
        const int target = static_cast<int>(window.label);
        const auto xent = nn::softmax_xent(cache.logits, target,
                                           static_cast<float>(weights[static_cast<size_t>(target)]));
        losses[static_cast<size_t>(i)] = xent.loss;
        const auto best = std::max_element(cache.logits.data.begin(), cache.logits.data.end());
        correct[static_cast<size_t>(i)] = (best - cache.logits.data.begin()) == target;
    });
    double loss_sum = 0.0;
    int64_t n_correct = 0;
    for (size_t i = 0; i < indices.size(); ++i) {
        loss_sum += losses[i];
        n_correct += correct[i];
    }
    stats.mean_loss = loss_sum / static_cast<double>(indices.size());
    stats.accuracy = static_cast<double>(n_correct) / static_cast<double>(indices.size());
    return stats;
}

std::pair<double, int64_t> accumulate_batch(NetworkF &net,
                                            std::span<const dataset::BeatWindow> windows,
                                            std::span<const uint32_t> indices,
                                            const std::array<double, 5> &weights, int threads) {
    const int64_t batch = static_cast<int64_t>(indices.size());
    if (batch == 0) throw EmptyTrainSet("batch is empty");
    const ModelConfig &config = net.config();

    std::vector<Gradients<float>> slots(static_cast<size_t>(batch));
    std::vector<double> losses(static_cast<size_t>(batch));
    std::vector<uint8_t> correct(static_cast<size_t>(batch));
    parallel_for(batch, threads, [&](int64_t i) {
        const dataset::BeatWindow &window = windows[indices[static_cast<size_t>(i)]];
        const auto input = window_tensor(window, config.in_channels, config.window_len);
        const auto cache = net.forward(input);
        const int target = static_cast<int>(window.label);
        const auto xent = nn::softmax_xent(cache.logits, target,
                                           static_cast<float>(weights[static_cast<size_t>(target)]));
        losses[static_cast<size_t>(i)] = xent.loss;
        const auto best = std::max_element(cache.logits.data.begin(), cache.logits.data.end());
        correct[static_cast<size_t>(i)] = (best - cache.logits.data.begin()) == target;
        Gradients<float> sink = net.make_gradients();
        net.backward_into(cache, xent.dlogits, sink);
        slots[static_cast<size_t>(i)] = std::move(sink);
    });

    // Ordered reduction in example-index order keeps results independent of
    // the thread schedule; the averaged result lands in the params' grads.
    net.zero_grad();
    auto &params = net.params();
    const float scale = 1.0f / static_cast<float>(batch);
    for (int64_t i = 0; i < batch; ++i) {
        for (size_t p = 0; p < params.size(); ++p) {
            auto &grad = params[p].grad.data;
            const auto &add = slots[static_cast<size_t>(i)].by_param[p].data;
            for (size_t j = 0; j < grad.size(); ++j) grad[j] += add[j];
        }
    }
    for (auto &param : params) {
        for (float &g : param.grad.data) g *= scale;
    }

    double loss_sum = 0.0;
    int64_t n_correct = 0;
    for (int64_t i = 0; i < batch; ++i) {
        loss_sum += losses[static_cast<size_t>(i)];
        n_correct += correct[static_cast<size_t>(i)];
    }
    return {loss_sum, n_correct};
}

TrainResult train(NetworkF &net, std::span<const dataset::BeatWindow> windows,
                  const dataset::DatasetSplit &split, const AdamHyper &hyper,
                  const std::array<double, 5> &weights, int threads,
                  const std::function<void(const EpochStats &)> &on_epoch) {
    hyper.validate();
    if (split.train.empty()) {
        throw EmptyTrainSet("training bucket is empty");
    }
    const uint64_t seed = net.config().seed;

    TrainResult result;
    double best_val_accuracy = -1.0;
    std::vector<nn::Tensor<float>> best_values;
    int64_t step = 0;

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::vector<uint32_t> order(split.train.begin(), split.train.end());
        rng::Generator shuffler(seed, kEpochStreamBase + static_cast<uint64_t>(epoch));
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        int64_t correct_sum = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hyper.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
            const std::span<const uint32_t> batch(order.data() + start, end - start);
            const auto [batch_loss, batch_correct] =
                accumulate_batch(net, windows, batch, weights, threads);
            loss_sum += batch_loss;
            correct_sum += batch_correct;
            net.adam_step(hyper, ++step);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_accuracy = static_cast<double>(correct_sum) / static_cast<double>(order.size());
        const EvalStats val = evaluate(net, windows, split.val, weights, threads);
        stats.val_loss = val.mean_loss;
        stats.val_accuracy = val.accuracy;
        result.stats.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (!split.val.empty() && stats.val_accuracy > best_val_accuracy) {
            best_val_accuracy = stats.val_accuracy;
            best_values = net.snapshot_values();
            result.best_epoch = epoch;
        }
    }

    if (result.best_epoch > 0) {
        net.set_values(best_values);
    }
    result.adam_steps = step;
    return result;
}

void save_checkpoint(const std::filesystem::path &path, const NetworkF &net,
                     const CheckpointMeta &meta) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    io::put_u16(out, kCheckpointVersion);
    io::put_u16(out, static_cast<uint16_t>(net.config().in_channels));
    io::put_u16(out, static_cast<uint16_t>(net.config().window_len));
    io::put_u64(out, net.config().seed);
    io::put_u32(out, meta.epoch);
    io::put_u64(out, meta.split_seed);
    io::put_u64(out, meta.adam_step);
    io::put_u16(out, static_cast<uint16_t>(net.params().size()));
    for (const Param<float> &param : net.params()) {
        out.push_back(static_cast<uint8_t>(param.name.size()));
        out.insert(out.end(), param.name.begin(), param.name.end());
        out.push_back(static_cast<uint8_t>(param.value.shape.size()));
        for (int d : param.value.shape) io::put_u32(out, static_cast<uint32_t>(d));
        for (float v : param.value.data) io::put_f32(out, v);
    }
    io::atomic_write(path, out);
}

namespace {

LoadedCheckpoint load_checkpoint_impl(const std::filesystem::path &path,
                                      const ModelConfig *expected) {
    const auto bytes = io::read_file_bytes(path);
    io::ByteReader reader(bytes, "checkpoint " + path.string());
    if (reader.get_string(4) != std::string(kCheckpointMagic, 4)) {
        throw BadMagic("checkpoint " + path.string() + ": magic is not EBNC");
    }
    const uint16_t version = reader.get_u16();
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint " + path.string() + ": version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    ModelConfig stored;
    stored.in_channels = reader.get_u16();
    stored.window_len = reader.get_u16();
    stored.seed = reader.get_u64();
    if (expected && !(stored == *expected)) {
        throw ConfigMismatch("checkpoint " + path.string() + " was written for in_channels=" +
                             std::to_string(stored.in_channels) + ", window_len=" +
                             std::to_string(stored.window_len) + ", seed=" +
                             std::to_string(stored.seed) + "; requested config disagrees");
    }

    CheckpointMeta meta;
    meta.epoch = reader.get_u32();
    meta.split_seed = reader.get_u64();
    meta.adam_step = reader.get_u64();

    NetworkF net(stored);
    const uint16_t n_params = reader.get_u16();
    if (n_params != net.params().size()) {
        throw CorruptPayload("checkpoint " + path.string() + " stores " +
                             std::to_string(n_params) + " parameters, architecture has " +
                             std::to_string(net.params().size()));
    }
    std::vector<nn::Tensor<float>> values;
    values.reserve(n_params);
    for (size_t p = 0; p < n_params; ++p) {
        const std::string name = reader.get_string(reader.get_u8());
        if (name != net.params()[p].name) {
            throw CorruptPayload("checkpoint " + path.string() + ": parameter " +
                                 std::to_string(p) + " is named '" + name + "', expected '" +
                                 net.params()[p].name + "'");
        }
        const uint8_t ndim = reader.get_u8();
        std::vector<int> shape(ndim);
        for (uint8_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(reader.get_u32());
        if (shape != net.params()[p].value.shape) {
            throw CorruptPayload("checkpoint " + path.string() + ": parameter '" + name +
                                 "' shape does not match the architecture");
        }
        nn::Tensor<float> value(shape);
        for (float &v : value.data) v = reader.get_f32();
        values.push_back(std::move(value));
    }
    reader.expect_end();
    net.set_values(values);
    return {std::move(net), meta};
}

} // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path &path, const ModelConfig &expected) {
    return load_checkpoint_impl(path, &expected);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path &path) {
    return load_checkpoint_impl(path, nullptr);
}

} // namespace ecg::model
