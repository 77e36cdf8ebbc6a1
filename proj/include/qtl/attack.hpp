// FGSM adversarial examples, adversarial training, robustness reports.
//
// The attack is white-box: gradients are taken through the full model with
// the true label, x_adv = x + epsilon * sign(dL/dx), with sign(0) = 0 so a
// zero budget or a dead gradient leaves the input untouched bit for bit.
// Adversarial training regenerates attacks from the current parameters for
// every batch and trains on the clean batch plus its attacked copy; the
// perturbation is re-projected into [-epsilon, epsilon] after generation.

#pragma once

#include "qtl/data.hpp"
#include "qtl/hybrid.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtl::attack {

struct AttackConfig {
    double epsilon = 0.1;                                  // L-infinity budget, input units
    std::optional<std::pair<double, double>> clamp_range;  // valid data range, if any

    void validate() const {
        if (!(epsilon >= 0.0)) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
        if (clamp_range && !(clamp_range->first < clamp_range->second))
            throw std::invalid_argument("AttackConfig: clamp range must satisfy lo < hi");
    }
};

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline std::vector<double> fgsm(const hybrid::HybridModel& model, std::span<const double> x,
                                int label, const AttackConfig& config) {
    config.validate();
    if (config.epsilon == 0.0) return {x.begin(), x.end()};

    const std::vector<double> grad = hybrid::input_gradient(model, x, label);
    std::vector<double> adv(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x[i] + config.epsilon * sign_or_zero(grad[i]);
        if (config.clamp_range)
            v = std::clamp(v, config.clamp_range->first, config.clamp_range->second);
        // the budget holds even when x starts outside the clamp range
        v = std::clamp(v, x[i] - config.epsilon, x[i] + config.epsilon);
        adv[i] = v;
    }
    return adv;
}

/// Accuracy on FGSM-perturbed samples; gradients use each sample's true label.
inline double attacked_accuracy(const hybrid::HybridModel& model, const data::Dataset& dataset,
                                const AttackConfig& config) {
    if (dataset.size() == 0) throw std::invalid_argument("attacked_accuracy: empty dataset");
    int correct = 0;
    for (int i = 0; i < dataset.size(); ++i) {
        const std::vector<double> adv = fgsm(model, dataset.sample(i), dataset.labels[i], config);
        correct += (hybrid::predict(model, adv) == dataset.labels[i]);
    }
    return static_cast<double>(correct) / dataset.size();
}

/// Min-max training: every batch is the clean samples plus FGSM copies made
/// with the current parameters (50/50 mixing). At epsilon 0 this degenerates
/// to training on per-batch duplicated data.
inline std::vector<hybrid::EpochStats> adversarial_train(hybrid::HybridModel& model,
                                                         const data::Dataset& train_set,
                                                         const AttackConfig& attack_config,
                                                         const hybrid::TrainConfig& train_config) {
    attack_config.validate();
    train_config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("adversarial_train: empty dataset");
    if (train_set.dim != model.input_dim())
        throw std::invalid_argument("adversarial_train: dataset width does not match the model");

    classical::OptimizerState opt = train_config.make_optimizer();
    model.seed_lineage.push_back({"adversarial_train", train_config.seed});
    const double eps = attack_config.epsilon;

    std::vector<hybrid::EpochStats> history;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        opt.epoch = epoch;
        double loss_sum = 0.0;
        int sample_count = 0;
        for (const std::vector<int>& batch :
             data::batches(train_set, train_config.batch_size, train_config.seed, epoch)) {
            std::vector<std::vector<double>> xs;
            std::vector<int> labels;
            xs.reserve(2 * batch.size());
            for (int i : batch) {
                const auto row = train_set.sample(i);
                xs.emplace_back(row.begin(), row.end());
                labels.push_back(train_set.labels[i]);
            }
            for (std::size_t k = 0; k < batch.size(); ++k) {
                std::vector<double> adv = fgsm(model, xs[k], labels[k], attack_config);
                // project the perturbation back into the threat set
                for (std::size_t d = 0; d < adv.size(); ++d)
                    adv[d] = xs[k][d] + std::clamp(adv[d] - xs[k][d], -eps, eps);
                xs.push_back(std::move(adv));
                labels.push_back(labels[k]);
            }
            loss_sum += hybrid::train_on_batch(model, opt, xs, labels, train_config.threads) *
                        static_cast<double>(xs.size());
            sample_count += static_cast<int>(xs.size());
        }
        hybrid::EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / sample_count;
        stats.train_acc = hybrid::evaluate(model, train_set);
        history.push_back(stats);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Robustness reports

struct RobustnessRow {
    double epsilon = 0.0;
    double clean_acc = std::numeric_limits<double>::quiet_NaN();
    double attack_acc = std::numeric_limits<double>::quiet_NaN();
    double adv_train_acc = std::numeric_limits<double>::quiet_NaN();
};

struct RobustnessReport {
    std::vector<RobustnessRow> rows;

    void validate() const {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && !(rows[i].epsilon > rows[i - 1].epsilon))
                throw std::invalid_argument("RobustnessReport: epsilons must strictly increase");
            for (double acc : {rows[i].clean_acc, rows[i].attack_acc, rows[i].adv_train_acc})
                if (!std::isnan(acc) && (acc < 0.0 || acc > 1.0))
                    throw std::invalid_argument("RobustnessReport: accuracy outside [0, 1]");
        }
    }

    /// Insert or merge a row at its epsilon; NaN fields never overwrite values.
    void upsert(const RobustnessRow& row) {
        auto it = rows.begin();
        while (it != rows.end() && it->epsilon < row.epsilon) ++it;
        if (it != rows.end() && it->epsilon == row.epsilon) {
            if (!std::isnan(row.clean_acc)) it->clean_acc = row.clean_acc;
            if (!std::isnan(row.attack_acc)) it->attack_acc = row.attack_acc;
            if (!std::isnan(row.adv_train_acc)) it->adv_train_acc = row.adv_train_acc;
        } else {
            rows.insert(it, row);
        }
    }
};

inline std::string report_to_csv(const RobustnessReport& report) {
    report.validate();
    std::string out = "epsilon,clean_acc,attack_acc,adv_train_acc\n";
    char buf[128];
    for (const RobustnessRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", row.epsilon, row.clean_acc,
                      row.attack_acc, row.adv_train_acc);
        out += buf;
    }
    return out;
}

inline RobustnessReport report_from_csv(const std::string& text) {
    RobustnessReport report;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.substr(0, pos) != "epsilon,clean_acc,attack_acc,adv_train_acc")
        throw std::runtime_error("robustness report: bad header");
    ++pos;
    int line_no = 1;
    while (pos < text.size()) {
        ++line_no;
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        RobustnessRow row;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &row.epsilon, &row.clean_acc,
                        &row.attack_acc, &row.adv_train_acc) != 4)
            throw std::runtime_error("robustness report: bad row at line " +
                                     std::to_string(line_no));
        report.rows.push_back(row);
    }
    report.validate();
    return report;
}

inline void save_report(const RobustnessReport& report, const std::string& path) {
    data::write_file_atomic(path, report_to_csv(report));
}

inline RobustnessReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open robustness report: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return report_from_csv(buffer.str());
}

/// Full protocol for one model family: train a standard model, measure clean
/// and attacked accuracy per epsilon, adversarially train a fresh model per
/// epsilon and measure its attacked accuracy.
inline RobustnessReport robustness_sweep(
    const std::function<hybrid::HybridModel()>& make_model, const data::Dataset& train_set,
    const data::Dataset& test_set, const std::vector<double>& epsilons,
    const hybrid::TrainConfig& train_config,
    std::optional<std::pair<double, double>> clamp_range = std::nullopt) {
    if (epsilons.empty()) throw std::invalid_argument("robustness_sweep: no epsilons");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] >= 0.0))
            throw std::invalid_argument("robustness_sweep: epsilons must be >= 0");
        if (i > 0 && !(epsilons[i] > epsilons[i - 1]))
            throw std::invalid_argument("robustness_sweep: epsilons must strictly increase");
    }

    hybrid::HybridModel standard = make_model();
    hybrid::train(standard, train_set, train_config);
    const double clean_acc = hybrid::evaluate(standard, test_set);

    RobustnessReport report;
    for (double eps : epsilons) {
        const AttackConfig attack_config{eps, clamp_range};
        RobustnessRow row;
        row.epsilon = eps;
        row.clean_acc = clean_acc;
        row.attack_acc = attacked_accuracy(standard, test_set, attack_config);

        hybrid::HybridModel robust = make_model();
        adversarial_train(robust, train_set, attack_config, train_config);
        row.adv_train_acc = attacked_accuracy(robust, test_set, attack_config);
        report.rows.push_back(row);
    }
    report.validate();
    return report;
}

} // namespace qtl::attack
