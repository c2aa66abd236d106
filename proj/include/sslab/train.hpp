// SSL training loop: view-pair generation, two-view forward/backward,
// SGD updates, per-epoch metrics, periodic kNN evaluation, checkpointing.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sslab/checkpoint.hpp"
#include "sslab/config.hpp"
#include "sslab/data.hpp"
#include "sslab/eval.hpp"
#include "sslab/image.hpp"
#include "sslab/loss.hpp"
#include "sslab/model.hpp"
#include "sslab/results.hpp"

namespace sslab {

inline Dataset load_dataset(const DatasetSpec& spec) {
    if (spec.type == "cifar10") {
        auto [train, test] = load_cifar10(spec.dir);
        return spec.split == "test" ? std::move(test) : std::move(train);
    }
    return gen_synthetic(spec.synth);
}

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    double collapse_stat = 0.0;
    double knn_accuracy = -1.0;  // -1: not evaluated this epoch
    std::string status = "ok";
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    double final_loss = 0.0;
    double final_knn_accuracy = -1.0;
    double final_collapse = 0.0;
    std::string metrics_csv;
    Checkpoint checkpoint;
};

inline std::string metrics_csv_header() { return "epoch,mean_loss,collapse_stat,knn_accuracy,status\n"; }

inline std::string metrics_csv_row(const EpochMetrics& m) {
    std::ostringstream os;
    os << m.epoch << ',' << format_double(m.mean_loss) << ',' << format_double(m.collapse_stat) << ',';
    if (m.knn_accuracy >= 0.0) os << format_double(m.knn_accuracy);
    os << ',' << m.status << '\n';
    return os.str();
}

// kNN protocol: reference and query embeddings drawn from a labeled dataset;
// the first ref_count samples form the reference table.
inline double run_knn_eval(ModelParams<float>& params, const EvalCfg& eval) {
    Dataset ds = load_dataset(eval.dataset);
    if (!ds.labeled()) throw ParameterError("eval dataset must be labeled");
    const int n = static_cast<int>(ds.size());
    const int n_ref = std::min(eval.ref_count, n);
    const int n_query = std::min(eval.query_count, n - n_ref);
    if (n_ref < 1 || n_query < 1) throw ParameterError("eval dataset too small for ref/query split");

    Dataset ref, query;
    ref.class_names = query.class_names = ds.class_names;
    ref.images.assign(ds.images.begin(), ds.images.begin() + n_ref);
    ref.labels.assign(ds.labels.begin(), ds.labels.begin() + n_ref);
    query.images.assign(ds.images.begin() + n_ref, ds.images.begin() + n_ref + n_query);
    query.labels.assign(ds.labels.begin() + n_ref, ds.labels.begin() + n_ref + n_query);

    EmbeddingTable ref_table = embed_dataset(params, ref);
    EmbeddingTable query_table = embed_dataset(params, query);
    const int k = std::min(eval.k, n_ref);
    const auto pred = knn_classify(ref_table, query_table.rows, k);
    return accuracy(pred, query.labels);
}

// For CIFAR eval the reference comes from the train split and the queries
// from the test split; synthetic eval splits one generated set.
inline double run_knn_eval_cifar(ModelParams<float>& params, const EvalCfg& eval) {
    auto [train, test] = load_cifar10(eval.dataset.dir);
    const int n_ref = std::min<int>(eval.ref_count, static_cast<int>(train.size()));
    const int n_query = std::min<int>(eval.query_count, static_cast<int>(test.size()));
    Dataset ref, query;
    ref.images.assign(train.images.begin(), train.images.begin() + n_ref);
    ref.labels.assign(train.labels.begin(), train.labels.begin() + n_ref);
    query.images.assign(test.images.begin(), test.images.begin() + n_query);
    query.labels.assign(test.labels.begin(), test.labels.begin() + n_query);
    EmbeddingTable ref_table = embed_dataset(params, ref);
    EmbeddingTable query_table = embed_dataset(params, query);
    const auto pred = knn_classify(ref_table, query_table.rows, std::min(eval.k, n_ref));
    return accuracy(pred, query.labels);
}

inline double knn_eval(ModelParams<float>& params, const EvalCfg& eval) {
    return eval.dataset.type == "cifar10" ? run_knn_eval_cifar(params, eval) : run_knn_eval(params, eval);
}

// One full training run. Deterministic given the config (incl. seed).
// When out_dir is non-empty, writes metrics.csv, checkpoint.bin and the
// resolved config.json there.
inline TrainResult run_train(RunConfig cfg) {
    if (cfg.epochs < 0 || cfg.batch_size < 2) throw ParameterError("run_train: invalid epochs/batch_size");
    Dataset train_ds = load_dataset(cfg.dataset);
    if (train_ds.size() < static_cast<size_t>(cfg.batch_size))
        throw ParameterError("run_train: dataset smaller than one batch");

    if (!cfg.input_stats_set) {
        channel_stats(train_ds, cfg.arch.input_mean, cfg.arch.input_std);
        cfg.input_stats_set = true;
    }

    Rng master(cfg.seed);
    ModelParams<float> params = init_params<float>(master, cfg.arch);
    OptState<float> opt = init_opt_state(params);

    const double base_lr = cfg.optim.lr;
    const double collapse_floor = 0.1 / std::sqrt(static_cast<double>(cfg.arch.embed_dim));
    int low_collapse_streak = 0;

    TrainResult result;
    std::ostringstream csv;
    csv << metrics_csv_header();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        OptCfg step_cfg = cfg.optim;
        if (cfg.cosine_lr_decay)
            step_cfg.lr = base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / cfg.epochs));

        const auto batches = batch_iter(train_ds.size(), cfg.seed, epoch, cfg.batch_size);
        double loss_sum = 0.0;
        double collapse_sum = 0.0;
        long long steps = 0;

        for (const auto& batch_idx : batches) {
            const int B = static_cast<int>(batch_idx.size());
            std::vector<Image> v1(B), v2(B);
            std::vector<double> phi(B);
            for (int i = 0; i < B; ++i) {
                Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(batch_idx[i])));
                ViewPair vp = make_view_pair(rng, train_ds.images[batch_idx[i]], cfg.aug, cfg.photometric,
                                             cfg.arch.in_size);
                v1[i] = std::move(vp.v1);
                v2[i] = std::move(vp.v2);
                phi[i] = vp.geom.phi;
            }
            ForwardCache<float> c1, c2;
            const auto out1 = forward(params, v1, /*training=*/true, &c1);
            const auto out2 = forward(params, v2, /*training=*/true, &c2);

            Mat<float> gp1(B, cfg.arch.embed_dim), gp2(B, cfg.arch.embed_dim);
            double batch_loss = 0.0;
            const float inv_b = 1.0f / static_cast<float>(B);
            for (int i = 0; i < B; ++i) {
                const auto lo = simsiam_loss<float>(out1.p.row(i), out1.z.row(i), out2.p.row(i),
                                                    out2.z.row(i), cfg.margin, phi[i]);
                batch_loss += lo.value;
                for (int j = 0; j < cfg.arch.embed_dim; ++j) {
                    gp1.at(i, j) = lo.grad_p1[j] * inv_b;
                    gp2.at(i, j) = lo.grad_p2[j] * inv_b;
                }
            }
            batch_loss /= B;
            ModelParams<float> grads = backward(params, c1, c2, gp1, gp2);
            sgd_step(params, grads, step_cfg, opt);

            loss_sum += batch_loss;
            collapse_sum += collapse_monitor(out1.z);
            ++steps;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.mean_loss = steps ? loss_sum / steps : 0.0;
        m.collapse_stat = steps ? collapse_sum / steps : 0.0;
        low_collapse_streak = m.collapse_stat < collapse_floor ? low_collapse_streak + 1 : 0;
        if (low_collapse_streak >= 3) m.status = "collapse_warning";

        const bool last_epoch = epoch == cfg.epochs - 1;
        if (cfg.eval.enabled &&
            (last_epoch || (cfg.eval.every_epochs > 0 && (epoch + 1) % cfg.eval.every_epochs == 0)))
            m.knn_accuracy = knn_eval(params, cfg.eval);

        csv << metrics_csv_row(m);
        result.metrics.push_back(m);
    }

    if (!result.metrics.empty()) {
        result.final_loss = result.metrics.back().mean_loss;
        result.final_collapse = result.metrics.back().collapse_stat;
        result.final_knn_accuracy = result.metrics.back().knn_accuracy;
    }
    result.metrics_csv = csv.str();

    std::ostringstream rng_state;
    rng_state << master.engine();
    result.checkpoint = Checkpoint{std::move(params), std::move(opt), cfg.seed, cfg.epochs, rng_state.str()};

    if (!cfg.out_dir.empty()) {
        const std::filesystem::path dir(cfg.out_dir);
        std::filesystem::create_directories(dir);
        std::ofstream(dir / "metrics.csv") << result.metrics_csv;
        std::ofstream(dir / "config.json") << to_json(cfg).dump(2) << '\n';
        save_checkpoint(dir / "checkpoint.bin", result.checkpoint);
    }
    return result;
}

}  // namespace sslab
