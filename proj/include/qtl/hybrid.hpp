// The hybrid model: extractor -> reducer -> squash -> encode -> VQC ->
// measure -> classifier, with classical twins where the quantum block is
// replaced by a dense+tanh layer of the same widths.
//
// Transfer-learning (TL) modes keep the extractor frozen; NoTL modes train
// everything. Gradients for the quantum segment come from parameter-shift
// Jacobians and enter the surrounding classical backprop by chain rule.
// Frozen layers always receive gradients (they are needed upstream); the
// optimizer just never applies them.

#pragma once

#include "qtl/classical.hpp"
#include "qtl/data.hpp"
#include "qtl/encoding.hpp"
#include "qtl/matrix.hpp"
#include "qtl/rng.hpp"
#include "qtl/vqc.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qtl::hybrid {

enum class ModelMode { QuantumTL, QuantumNoTL, ClassicalTL, ClassicalNoTL };

inline bool is_quantum(ModelMode mode) {
    return mode == ModelMode::QuantumTL || mode == ModelMode::QuantumNoTL;
}

inline bool is_transfer(ModelMode mode) {
    return mode == ModelMode::QuantumTL || mode == ModelMode::ClassicalTL;
}

inline std::string mode_name(ModelMode mode) {
    switch (mode) {
    case ModelMode::QuantumTL: return "quantum_tl";
    case ModelMode::QuantumNoTL: return "quantum_no_tl";
    case ModelMode::ClassicalTL: return "classical_tl";
    case ModelMode::ClassicalNoTL: return "classical_no_tl";
    }
    return "quantum_tl";
}

inline ModelMode mode_from_name(const std::string& name) {
    if (name == "quantum_tl") return ModelMode::QuantumTL;
    if (name == "quantum_no_tl") return ModelMode::QuantumNoTL;
    if (name == "classical_tl") return ModelMode::ClassicalTL;
    if (name == "classical_no_tl") return ModelMode::ClassicalNoTL;
    throw std::invalid_argument("unknown model mode: " + name);
}

// ---------------------------------------------------------------------------
// Extractor: dense -> ReLU -> residual blocks -> dense

struct Extractor {
    classical::DenseLayer input;                     // input_dim -> width
    std::vector<classical::ResidualBlock> blocks;    // width -> width
    classical::DenseLayer output;                    // width -> feature_dim

    int input_dim() const { return input.in_width(); }
    int feature_dim() const { return output.out_width(); }

    bool frozen() const {
        bool all = input.frozen && output.frozen;
        for (const auto& block : blocks) all = all && block.frozen();
        return all;
    }

    void set_frozen(bool value) {
        input.frozen = output.frozen = value;
        for (auto& block : blocks) block.set_frozen(value);
    }
};

struct ModelConfig {
    ModelMode mode = ModelMode::QuantumTL;
    int input_dim = 16;
    int extractor_width = 32;
    int n_residual_blocks = 2;
    int feature_dim = 16;
    int n_qubits = 6;
    int n_layers = 6;
    int n_classes = 2;
    double angle_scale = std::numbers::pi / 2;
    vqc::EntanglerTopology topology = vqc::EntanglerTopology::Linear;
    double vqc_init_stddev = 0.01;
    bool fixed_mix = false; // NoTL only: fixed orthogonal matrix before the classifier

    void validate() const {
        if (input_dim < 1 || extractor_width < 1 || feature_dim < 1)
            throw std::invalid_argument("ModelConfig: widths must be positive");
        if (n_residual_blocks < 0)
            throw std::invalid_argument("ModelConfig: n_residual_blocks must be >= 0");
        if (n_qubits < 2 || n_qubits > qsim::kMaxQubits)
            throw std::invalid_argument("ModelConfig: n_qubits must be in [2, " +
                                        std::to_string(qsim::kMaxQubits) + "]");
        if (n_layers < 0) throw std::invalid_argument("ModelConfig: n_layers must be >= 0");
        if (n_classes < 2) throw std::invalid_argument("ModelConfig: n_classes must be >= 2");
        if (!(angle_scale > 0.0))
            throw std::invalid_argument("ModelConfig: angle_scale must be positive");
        if (fixed_mix && is_transfer(mode))
            throw std::invalid_argument("ModelConfig: fixed_mix applies to NoTL modes only");
    }
};

struct SeedRecord {
    std::string stage;
    std::uint64_t seed = 0;
};

struct HybridModel {
    ModelMode mode = ModelMode::QuantumTL;
    Extractor extractor;
    classical::DenseLayer reducer;         // feature_dim -> n_qubits
    encoding::EncodingSpec encoding_spec;
    vqc::CircuitParams circuit;            // quantum modes
    classical::DenseLayer substitute;      // classical modes: n_qubits -> n_qubits, tanh
    classical::DenseLayer classifier;      // n_qubits -> n_classes
    std::optional<Matrix> fixed_mix;       // applied between readout and classifier
    std::vector<SeedRecord> seed_lineage;

    int input_dim() const { return extractor.input_dim(); }
    int n_qubits() const { return reducer.out_width(); }
    int n_classes() const { return classifier.out_width(); }

    void validate() const {
        if (extractor.feature_dim() != reducer.in_width())
            throw std::invalid_argument("HybridModel: extractor/reducer width mismatch");
        if (encoding_spec.n_features != n_qubits())
            throw std::invalid_argument("HybridModel: encoding width mismatch");
        if (classifier.in_width() != n_qubits())
            throw std::invalid_argument("HybridModel: classifier width mismatch");
        if (is_quantum(mode)) {
            if (circuit.n_qubits != n_qubits())
                throw std::invalid_argument("HybridModel: circuit width mismatch");
        } else {
            if (substitute.in_width() != n_qubits() || substitute.out_width() != n_qubits())
                throw std::invalid_argument("HybridModel: substitute width mismatch");
        }
        if (is_transfer(mode) && !extractor.frozen())
            throw std::invalid_argument("HybridModel: TL modes require a frozen extractor");
        if (fixed_mix && fixed_mix->rows != n_qubits())
            throw std::invalid_argument("HybridModel: fixed_mix dimension mismatch");
    }
};

namespace detail {

/// Random orthogonal matrix: Gaussian entries, then Gram-Schmidt.
inline Matrix random_orthogonal(int dim, Rng& rng) {
    Matrix m(dim, dim);
    for (double& v : m.data) v = rng.normal();
    for (int r = 0; r < dim; ++r) {
        for (int prev = 0; prev < r; ++prev) {
            double dot = 0.0;
            for (int c = 0; c < dim; ++c) dot += m(r, c) * m(prev, c);
            for (int c = 0; c < dim; ++c) m(r, c) -= dot * m(prev, c);
        }
        double norm = 0.0;
        for (int c = 0; c < dim; ++c) norm += m(r, c) * m(r, c);
        norm = std::sqrt(norm);
        for (int c = 0; c < dim; ++c) m(r, c) /= norm;
    }
    return m;
}

} // namespace detail

inline Extractor make_extractor(const ModelConfig& config, Rng& rng) {
    Extractor extractor;
    extractor.input = classical::make_dense(config.input_dim, config.extractor_width, rng);
    for (int b = 0; b < config.n_residual_blocks; ++b)
        extractor.blocks.push_back(classical::make_residual(config.extractor_width, rng));
    extractor.output = classical::make_dense(config.extractor_width, config.feature_dim, rng);
    return extractor;
}

inline HybridModel make_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    HybridModel model;
    model.mode = config.mode;
    model.extractor = make_extractor(config, rng);
    model.reducer = classical::make_dense(config.feature_dim, config.n_qubits, rng);
    model.encoding_spec = {config.n_qubits, config.angle_scale};
    if (is_quantum(config.mode))
        model.circuit = vqc::CircuitParams::random_init(config.n_qubits, config.n_layers, rng,
                                                        config.vqc_init_stddev, config.topology);
    else
        model.substitute = classical::make_dense(config.n_qubits, config.n_qubits, rng);
    model.classifier = classical::make_dense(config.n_qubits, config.n_classes, rng);
    if (config.fixed_mix) model.fixed_mix = detail::random_orthogonal(config.n_qubits, rng);
    if (is_transfer(config.mode)) model.extractor.set_frozen(true);
    model.seed_lineage.push_back({"init", seed});
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// Forward

struct ForwardCache {
    std::vector<double> input;
    std::vector<double> ext_pre;    // extractor input layer output, pre-ReLU
    std::vector<classical::ResidualCache> block_caches;
    std::vector<double> ext_hidden; // input to the extractor output layer
    std::vector<double> features;
    std::vector<double> reduced;    // reducer output, pre-squash
    std::vector<double> angles;
    std::vector<double> sub_pre;    // classical modes: substitute output, pre-tanh
    std::vector<double> readout;    // measurement vector z, or tanh(sub_pre)
    std::vector<double> head_in;    // readout, or fixed_mix * readout
    std::vector<double> logits;
};

inline std::vector<double> extractor_forward(const Extractor& extractor,
                                             std::span<const double> x,
                                             ForwardCache* cache = nullptr) {
    std::vector<double> pre = classical::dense_forward(extractor.input, x);
    std::vector<double> h = classical::relu(pre);
    std::vector<classical::ResidualCache> block_caches(extractor.blocks.size());
    for (std::size_t b = 0; b < extractor.blocks.size(); ++b)
        h = classical::residual_forward(extractor.blocks[b], h,
                                        cache ? &block_caches[b] : nullptr);
    std::vector<double> features = classical::dense_forward(extractor.output, h);
    if (cache) {
        cache->ext_pre = std::move(pre);
        cache->block_caches = std::move(block_caches);
        cache->ext_hidden = std::move(h);
        cache->features = features;
    }
    return features;
}

inline std::vector<double> forward(const HybridModel& model, std::span<const double> x,
                                   ForwardCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != model.input_dim())
        throw std::invalid_argument("forward: input width " + std::to_string(x.size()) +
                                    " != model input_dim " + std::to_string(model.input_dim()));
    if (cache) cache->input.assign(x.begin(), x.end());

    const std::vector<double> features = extractor_forward(model.extractor, x, cache);
    std::vector<double> reduced = classical::dense_forward(model.reducer, features);
    std::vector<double> angles = encoding::squash(reduced, model.encoding_spec);

    std::vector<double> readout;
    std::vector<double> sub_pre;
    if (is_quantum(model.mode)) {
        readout = vqc::forward_z(angles, model.circuit);
    } else {
        sub_pre = classical::dense_forward(model.substitute, angles);
        readout.resize(sub_pre.size());
        for (std::size_t i = 0; i < sub_pre.size(); ++i) readout[i] = std::tanh(sub_pre[i]);
    }

    std::vector<double> head_in =
        model.fixed_mix ? matvec(*model.fixed_mix, readout) : readout;
    std::vector<double> logits = classical::dense_forward(model.classifier, head_in);

    if (cache) {
        cache->reduced = std::move(reduced);
        cache->angles = std::move(angles);
        cache->sub_pre = std::move(sub_pre);
        cache->readout = std::move(readout);
        cache->head_in = std::move(head_in);
        cache->logits = logits;
    }
    return logits;
}

// ---------------------------------------------------------------------------
// Backward

struct ModelGrads {
    classical::DenseGrads ext_input;
    std::vector<classical::ResidualGrads> ext_blocks;
    classical::DenseGrads ext_output;
    classical::DenseGrads reducer;
    std::vector<double> circuit;
    classical::DenseGrads substitute;
    classical::DenseGrads classifier;
};

inline ModelGrads zero_grads(const HybridModel& model) {
    ModelGrads grads;
    grads.ext_input = classical::zero_grads(model.extractor.input);
    for (const auto& block : model.extractor.blocks)
        grads.ext_blocks.push_back(classical::zero_grads(block));
    grads.ext_output = classical::zero_grads(model.extractor.output);
    grads.reducer = classical::zero_grads(model.reducer);
    if (is_quantum(model.mode))
        grads.circuit.assign(model.circuit.angles.size(), 0.0);
    else
        grads.substitute = classical::zero_grads(model.substitute);
    grads.classifier = classical::zero_grads(model.classifier);
    return grads;
}

namespace detail {

inline void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void add_into(classical::DenseGrads& dst, const classical::DenseGrads& src) {
    add_into(dst.weights.data, src.weights.data);
    add_into(dst.bias, src.bias);
}

inline void scale(std::vector<double>& values, double factor) {
    for (double& v : values) v *= factor;
}

inline void scale(classical::DenseGrads& grads, double factor) {
    scale(grads.weights.data, factor);
    scale(grads.bias, factor);
}

} // namespace detail

inline void accumulate(ModelGrads& dst, const ModelGrads& src) {
    detail::add_into(dst.ext_input, src.ext_input);
    for (std::size_t b = 0; b < dst.ext_blocks.size(); ++b) {
        detail::add_into(dst.ext_blocks[b].first, src.ext_blocks[b].first);
        detail::add_into(dst.ext_blocks[b].second, src.ext_blocks[b].second);
    }
    detail::add_into(dst.ext_output, src.ext_output);
    detail::add_into(dst.reducer, src.reducer);
    detail::add_into(dst.circuit, src.circuit);
    detail::add_into(dst.substitute.weights.data, src.substitute.weights.data);
    detail::add_into(dst.substitute.bias, src.substitute.bias);
    detail::add_into(dst.classifier, src.classifier);
}

inline void scale(ModelGrads& grads, double factor) {
    detail::scale(grads.ext_input, factor);
    for (auto& block : grads.ext_blocks) {
        detail::scale(block.first, factor);
        detail::scale(block.second, factor);
    }
    detail::scale(grads.ext_output, factor);
    detail::scale(grads.reducer, factor);
    detail::scale(grads.circuit, factor);
    detail::scale(grads.substitute, factor);
    detail::scale(grads.classifier, factor);
}

/// Parameter arrays in a fixed order, paired with their gradients and frozen
/// flags; drives both the optimizer and checkpoint serialization.
inline std::vector<classical::ParamBinding> bind_params(HybridModel& model, ModelGrads& grads) {
    std::vector<classical::ParamBinding> bindings;
    const auto bind_dense = [&](classical::DenseLayer& layer, classical::DenseGrads& g) {
        bindings.push_back({&layer.weights.data, &g.weights.data, layer.frozen});
        bindings.push_back({&layer.bias, &g.bias, layer.frozen});
    };
    bind_dense(model.extractor.input, grads.ext_input);
    for (std::size_t b = 0; b < model.extractor.blocks.size(); ++b) {
        bind_dense(model.extractor.blocks[b].first, grads.ext_blocks[b].first);
        bind_dense(model.extractor.blocks[b].second, grads.ext_blocks[b].second);
    }
    bind_dense(model.extractor.output, grads.ext_output);
    bind_dense(model.reducer, grads.reducer);
    if (is_quantum(model.mode))
        bindings.push_back({&model.circuit.angles, &grads.circuit, false});
    else
        bind_dense(model.substitute, grads.substitute);
    bind_dense(model.classifier, grads.classifier);
    return bindings;
}

/// dx through the extractor; parameter gradients accumulate into `grads`.
inline std::vector<double> extractor_backward(const Extractor& extractor,
                                              const ForwardCache& cache,
                                              std::span<const double> d_features,
                                              ModelGrads& grads) {
    std::vector<double> dh = classical::dense_backward(extractor.output, cache.ext_hidden,
                                                       d_features, grads.ext_output);
    for (int b = static_cast<int>(extractor.blocks.size()) - 1; b >= 0; --b)
        dh = classical::residual_backward(extractor.blocks[b], cache.block_caches[b], dh,
                                          grads.ext_blocks[b]);
    const std::vector<double> d_pre = classical::relu_backward(cache.ext_pre, dh);
    return classical::dense_backward(extractor.input, cache.input, d_pre, grads.ext_input);
}

struct BackwardResult {
    double loss = 0.0;
    ModelGrads grads;
};

/// Loss and gradients for every parameter; optionally also dL/dx.
inline BackwardResult backward(const HybridModel& model, std::span<const double> x, int label,
                               std::vector<double>* input_grad_out = nullptr) {
    ForwardCache cache;
    forward(model, x, &cache);
    const classical::LossResult loss = classical::cross_entropy(cache.logits, label);

    BackwardResult result;
    result.loss = loss.loss;
    result.grads = zero_grads(model);
    ModelGrads& grads = result.grads;

    std::vector<double> d_head_in =
        classical::dense_backward(model.classifier, cache.head_in, loss.dlogits,
                                  grads.classifier);
    std::vector<double> d_readout =
        model.fixed_mix ? matvec_transposed(*model.fixed_mix, d_head_in)
                        : std::move(d_head_in);

    std::vector<double> d_angles;
    if (is_quantum(model.mode)) {
        // chain rule through the circuit: dL/dp = sum_i dL/dz_i * dz_i/dp
        const Matrix jac_params = vqc::jacobian_param_shift(cache.angles, model.circuit);
        for (int j = 0; j < jac_params.cols; ++j) {
            double acc = 0.0;
            for (int i = 0; i < jac_params.rows; ++i) acc += d_readout[i] * jac_params(i, j);
            grads.circuit[j] = acc;
        }
        const Matrix jac_inputs = vqc::jacobian_wrt_inputs(cache.angles, model.circuit);
        d_angles.assign(jac_inputs.cols, 0.0);
        for (int j = 0; j < jac_inputs.cols; ++j)
            for (int i = 0; i < jac_inputs.rows; ++i)
                d_angles[j] += d_readout[i] * jac_inputs(i, j);
    } else {
        // readout = tanh(sub_pre)
        std::vector<double> d_sub_pre(d_readout.size());
        for (std::size_t i = 0; i < d_readout.size(); ++i)
            d_sub_pre[i] = d_readout[i] * (1.0 - cache.readout[i] * cache.readout[i]);
        d_angles = classical::dense_backward(model.substitute, cache.angles, d_sub_pre,
                                             grads.substitute);
    }

    // squash: d angle / d reduced is diagonal
    const std::vector<double> squash_deriv =
        encoding::squash_derivative(cache.reduced, model.encoding_spec.angle_scale);
    std::vector<double> d_reduced(d_angles.size());
    for (std::size_t i = 0; i < d_angles.size(); ++i)
        d_reduced[i] = d_angles[i] * squash_deriv[i];

    std::vector<double> d_features =
        classical::dense_backward(model.reducer, cache.features, d_reduced, grads.reducer);

    std::vector<double> dx = extractor_backward(model.extractor, cache, d_features, grads);
    if (input_grad_out) *input_grad_out = std::move(dx);
    return result;
}

/// dL/dx only (white-box attacks); gradients of parameters are discarded.
inline std::vector<double> input_gradient(const HybridModel& model, std::span<const double> x,
                                          int label) {
    std::vector<double> dx;
    backward(model, x, label, &dx);
    return dx;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    classical::OptimizerKind optimizer = classical::OptimizerKind::Adam;
    double learning_rate = 4e-4;
    classical::Schedule schedule;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
    }

    classical::OptimizerState make_optimizer() const {
        classical::OptimizerState opt;
        opt.kind = optimizer;
        opt.learning_rate = learning_rate;
        opt.schedule = schedule;
        return opt;
    }
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double test_acc = std::numeric_limits<double>::quiet_NaN();
};

inline int predict(const HybridModel& model, std::span<const double> x) {
    const std::vector<double> logits = forward(model, x);
    int best = 0;
    for (int c = 1; c < static_cast<int>(logits.size()); ++c)
        if (logits[c] > logits[best]) best = c; // ties resolve to the lowest index
    return best;
}

inline double evaluate(const HybridModel& model, const data::Dataset& dataset) {
    if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    int correct = 0;
    for (int i = 0; i < dataset.size(); ++i)
        correct += (predict(model, dataset.sample(i)) == dataset.labels[i]);
    return static_cast<double>(correct) / dataset.size();
}

namespace detail {

/// Per-sample backward passes run in parallel; the reduction is sequential in
/// sample order, so results do not depend on the thread count.
inline std::vector<BackwardResult> batch_backward(const HybridModel& model,
                                                  std::span<const std::vector<double>> xs,
                                                  std::span<const int> labels, int threads) {
    const int n = static_cast<int>(xs.size());
    std::vector<BackwardResult> results(n);
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) results[i] = backward(model, xs[i], labels[i]);
        return results;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) results[i] = backward(model, xs[i], labels[i]);
        });
    for (auto& t : pool) t.join();
    return results;
}

} // namespace detail

/// One optimizer step on the mean loss over the given samples; returns that
/// mean loss.
inline double train_on_batch(HybridModel& model, classical::OptimizerState& opt,
                             std::span<const std::vector<double>> xs, std::span<const int> labels,
                             int threads = 1) {
    if (xs.empty()) throw std::invalid_argument("train_on_batch: empty batch");
    if (xs.size() != labels.size())
        throw std::invalid_argument("train_on_batch: sample/label count mismatch");

    const std::vector<BackwardResult> per_sample =
        detail::batch_backward(model, xs, labels, threads);

    ModelGrads total = zero_grads(model);
    double loss = 0.0;
    for (const BackwardResult& r : per_sample) {
        accumulate(total, r.grads);
        loss += r.loss;
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    scale(total, inv);
    loss *= inv;

    const std::vector<classical::ParamBinding> bindings = bind_params(model, total);
    classical::optimizer_step(opt, bindings);
    return loss;
}

/// Mini-batch training. History has one entry per epoch; test accuracy is NaN
/// when no test set is supplied. Frozen parameters never change.
inline std::vector<EpochStats> train(HybridModel& model, const data::Dataset& train_set,
                                     const TrainConfig& config,
                                     const data::Dataset* test_set = nullptr) {
    config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (train_set.dim != model.input_dim())
        throw std::invalid_argument("train: dataset width does not match the model");
    for (int label : train_set.labels)
        if (label >= model.n_classes())
            throw std::invalid_argument("train: label exceeds model classes");

    classical::OptimizerState opt = config.make_optimizer();
    model.seed_lineage.push_back({"train", config.seed});

    std::vector<EpochStats> history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.epoch = epoch;
        double loss_sum = 0.0;
        for (const std::vector<int>& batch :
             data::batches(train_set, config.batch_size, config.seed, epoch)) {
            std::vector<std::vector<double>> xs;
            std::vector<int> labels;
            xs.reserve(batch.size());
            for (int i : batch) {
                const auto row = train_set.sample(i);
                xs.emplace_back(row.begin(), row.end());
                labels.push_back(train_set.labels[i]);
            }
            loss_sum +=
                train_on_batch(model, opt, xs, labels, config.threads) * batch.size();
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / train_set.size();
        stats.train_acc = evaluate(model, train_set);
        if (test_set) stats.test_acc = evaluate(model, *test_set);
        history.push_back(stats);
    }
    return history;
}

/// Source-task pretraining of the extractor through a temporary dense head.
/// The extractor comes back unfrozen; TL callers freeze it afterwards.
inline std::vector<EpochStats> pretrain_extractor(Extractor& extractor,
                                                  const data::Dataset& source,
                                                  const TrainConfig& config) {
    config.validate();
    if (source.size() == 0) throw std::invalid_argument("pretrain_extractor: empty dataset");
    if (source.dim != extractor.input_dim())
        throw std::invalid_argument("pretrain_extractor: dataset width mismatch");

    extractor.set_frozen(false);
    Rng rng(config.seed);
    classical::DenseLayer head =
        classical::make_dense(extractor.feature_dim(), source.n_classes, rng);

    classical::OptimizerState opt = config.make_optimizer();

    const auto head_logits = [&](std::span<const double> x, ForwardCache* cache) {
        const std::vector<double> features = extractor_forward(extractor, x, cache);
        return classical::dense_forward(head, features);
    };

    std::vector<EpochStats> history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.epoch = epoch;
        double loss_sum = 0.0;
        for (const std::vector<int>& batch :
             data::batches(source, config.batch_size, config.seed, epoch)) {
            ModelGrads grads; // extractor slices only
            grads.ext_input = classical::zero_grads(extractor.input);
            for (const auto& block : extractor.blocks)
                grads.ext_blocks.push_back(classical::zero_grads(block));
            grads.ext_output = classical::zero_grads(extractor.output);
            classical::DenseGrads head_grads = classical::zero_grads(head);

            for (int i : batch) {
                ForwardCache cache;
                cache.input.assign(source.sample(i).begin(), source.sample(i).end());
                const std::vector<double> logits = head_logits(source.sample(i), &cache);
                classical::LossResult loss = classical::cross_entropy(logits, source.labels[i]);
                loss_sum += loss.loss;
                for (double& g : loss.dlogits) g /= static_cast<double>(batch.size());

                const std::vector<double> d_features = classical::dense_backward(
                    head, cache.features, loss.dlogits, head_grads);
                extractor_backward(extractor, cache, d_features, grads);
            }

            std::vector<classical::ParamBinding> bindings;
            const auto bind_dense = [&](classical::DenseLayer& layer, classical::DenseGrads& g) {
                bindings.push_back({&layer.weights.data, &g.weights.data, layer.frozen});
                bindings.push_back({&layer.bias, &g.bias, layer.frozen});
            };
            bind_dense(extractor.input, grads.ext_input);
            for (std::size_t b = 0; b < extractor.blocks.size(); ++b) {
                bind_dense(extractor.blocks[b].first, grads.ext_blocks[b].first);
                bind_dense(extractor.blocks[b].second, grads.ext_blocks[b].second);
            }
            bind_dense(extractor.output, grads.ext_output);
            bind_dense(head, head_grads);
            classical::optimizer_step(opt, bindings);
        }

        int correct = 0;
        for (int i = 0; i < source.size(); ++i) {
            const std::vector<double> logits = head_logits(source.sample(i), nullptr);
            int best = 0;
            for (int c = 1; c < static_cast<int>(logits.size()); ++c)
                if (logits[c] > logits[best]) best = c;
            correct += (best == source.labels[i]);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / source.size();
        stats.train_acc = static_cast<double>(correct) / source.size();
        history.push_back(stats);
    }
    return history;
}

} // namespace qtl::hybrid
