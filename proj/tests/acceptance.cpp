// Acceptance gate: one checkable criterion per invocation (argv[1] in 1..9),
// or all of them when run without arguments. Prints exactly one
// PASS/FAIL/FLAG line per criterion. Criteria 5-7 are qualitative trend
// reproductions: a miss is reported as FLAG (exit 0) with artifacts emitted
// for inspection. Long-running criteria reuse completed runs found in the
// output directory (SSLAB_ACCEPTANCE_DIR, default ./acceptance_out), so an
// interrupted invocation resumes instead of restarting.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sslab/config.hpp"
#include "sslab/preview.hpp"
#include "sslab/results.hpp"
#include "sslab/svg.hpp"
#include "sslab/sweep.hpp"
#include "sslab/train.hpp"

using namespace sslab;
namespace fs = std::filesystem;

namespace {

fs::path accept_dir() {
    const char* env = std::getenv("SSLAB_ACCEPTANCE_DIR");
    const fs::path dir = env ? fs::path(env) : fs::path("acceptance_out");
    fs::create_directories(dir);
    return dir;
}

void report(int crit, const std::string& verdict, const std::string& detail) {
    std::cout << "criterion " << crit << ": " << verdict << " - " << detail << std::endl;
}

// Canonical defaults, identical to parsing an empty JSON config.
RunConfig default_config() { return config_from_json(json::object()); }

long long mask_intersection_area(const Rect& a, const Rect& b, const ImageDims& dims) {
    std::vector<unsigned char> ma(static_cast<size_t>(dims.w) * dims.h, 0), mb = ma;
    for (int y = a.y; y < a.y + a.h; ++y)
        for (int x = a.x; x < a.x + a.w; ++x) ma[static_cast<size_t>(y) * dims.w + x] = 1;
    for (int y = b.y; y < b.y + b.h; ++y)
        for (int x = b.x; x < b.x + b.w; ++x) mb[static_cast<size_t>(y) * dims.w + x] = 1;
    long long n = 0;
    for (size_t i = 0; i < ma.size(); ++i) n += ma[i] && mb[i];
    return n;
}

// Reuses a finished training run if its metrics.csv already holds all epochs.
struct RunOutcome {
    double final_knn = -1.0;
    double min_collapse = 1e9;
    bool complete = false;
};

RunOutcome load_run_outcome(const fs::path& dir, int epochs) {
    RunOutcome out;
    std::ifstream in(dir / "metrics.csv");
    if (!in) return out;
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) return out;
        out.min_collapse = std::min(out.min_collapse, std::stod(f[2]));
        if (!f[3].empty()) out.final_knn = std::stod(f[3]);
        ++rows;
    }
    out.complete = rows == epochs;
    return out;
}

RunOutcome train_or_resume(RunConfig cfg, const fs::path& dir) {
    RunOutcome cached = load_run_outcome(dir, cfg.epochs);
    if (cached.complete) return cached;
    cfg.out_dir = dir.string();
    run_train(cfg);
    return load_run_outcome(dir, cfg.epochs);
}

// Seed-mean of the final-epoch "ok" rows per sweep value.
std::map<std::string, double> seed_means(const std::vector<SweepRow>& rows) {
    std::map<std::pair<std::string, std::uint64_t>, SweepRow> last;
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        const auto key = std::make_pair(r.value, r.seed);
        const auto it = last.find(key);
        if (it == last.end() || r.epoch >= it->second.epoch) last[key] = r;
    }
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& [key, r] : last) {
        acc[key.first].first += r.knn_accuracy;
        acc[key.first].second += 1;
    }
    std::map<std::string, double> means;
    for (const auto& [v, p] : acc) means[v] = p.first / p.second;
    return means;
}

std::string fmt_means(const std::map<std::string, double>& m) {
    std::ostringstream os;
    os.precision(4);
    bool first = true;
    for (const auto& [v, a] : m) {
        os << (first ? "" : ", ") << v << "=" << a;
        first = false;
    }
    return os.str();
}

void emit_chart(const fs::path& dir, const std::vector<SweepRow>& rows, const std::string& title) {
    try {
        std::ofstream(dir / "chart.svg") << render_sweep_svg(rows, title);
    } catch (const std::exception&) {
        // no plottable rows; nothing to chart
    }
}

// --- criteria ---------------------------------------------------------------

bool criterion_1() {
    int mismatches = 0;
    for (const int size : {32, 64}) {
        const ImageDims dims{size, size};
        Rng rng(0xC1);
        for (int i = 0; i < 10000; ++i) {
            const int w1 = rng.uniform_int(1, size), h1 = rng.uniform_int(1, size);
            const int w2 = rng.uniform_int(1, size), h2 = rng.uniform_int(1, size);
            const Rect a{rng.uniform_int(0, size - w1), rng.uniform_int(0, size - h1), w1, h1};
            const Rect b{rng.uniform_int(0, size - w2), rng.uniform_int(0, size - h2), w2, h2};
            const auto o = intersect(a, b);
            if ((o ? o->area() : 0) != mask_intersection_area(a, b, dims)) ++mismatches;
        }
    }
    int bad_cells = 0;
    std::ostringstream detail;
    for (const int size : {32, 64}) {
        const ImageDims dims{size, size};
        const double tol = size >= 64 ? 0.01 : 0.03;
        for (const double target : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            int ok = 0;
            const int n = 2000;
            for (int i = 0; i < n; ++i) {
                Rng rng(derive_seed(0xC1A, static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(i)));
                const RectPair p = sample_overlap_pair(rng, dims, target);
                if (std::abs(p.overlap_ratio - target) <= tol) ++ok;
            }
            if (ok < static_cast<int>(0.99 * n)) ++bad_cells;
        }
    }
    const bool pass = mismatches == 0 && bad_cells == 0;
    report(1, pass ? "PASS" : "FAIL",
           "geometry exactness: " + std::to_string(mismatches) + "/20000 intersection mismatches, " +
               std::to_string(bad_cells) + "/10 overlap cells out of tolerance");
    return pass;
}

bool criterion_2() {
    Rng rng(0xC2);
    auto rand_vec = [&](int d) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.normal();
        return v;
    };
    int checked = 0, grad_fail = 0, value_fail = 0, gate_fail = 0;
    const double eps = 1e-5;
    while (checked < 1000) {
        const auto p1 = rand_vec(8), z1 = rand_vec(8), p2 = rand_vec(8), z2 = rand_vec(8);
        MarginSpec spec;
        const int mode = checked % 3;
        const double phi = rng.uniform(0.0, 45.0);
        if (mode == 0) spec = MarginSpec::none();
        if (mode == 1) spec = MarginSpec::fixed(rng.uniform(0.0, 1.5));
        if (mode == 2) spec = MarginSpec::distance(rng.uniform(0.01, 0.05));

        const auto out = simsiam_loss(p1, z1, p2, z2, spec, phi);
        if (out.value < -2.0 || out.value > 2.0) ++value_fail;
        if (out.gated_1)
            for (const double g : out.grad_p1)
                if (g != 0.0) ++gate_fail;

        // Finite differences are meaningless across the gate kink; redraw.
        const double thr = margin_threshold(spec, phi);
        if (std::abs(-cosine(p1, z2) - thr) < 1e-3 || std::abs(-cosine(p2, z1) - thr) < 1e-3) continue;

        for (size_t j = 0; j < p1.size(); ++j) {
            auto plus = p1, minus = p1;
            plus[j] += eps;
            minus[j] -= eps;
            const double fd = (simsiam_loss(plus, z1, p2, z2, spec, phi).value -
                               simsiam_loss(minus, z1, p2, z2, spec, phi).value) /
                              (2 * eps);
            if (std::abs(out.grad_p1[j] - fd) / std::max(std::abs(fd), 1e-6) > 1e-4) ++grad_fail;
        }
        ++checked;
    }
    const bool pass = grad_fail == 0 && value_fail == 0 && gate_fail == 0;
    report(2, pass ? "PASS" : "FAIL",
           "loss gradients vs finite differences on 1000 draws: " + std::to_string(grad_fail) +
               " gradient, " + std::to_string(value_fail) + " range, " + std::to_string(gate_fail) +
               " gating failures");
    return pass;
}

bool criterion_3() {
    Rng rng(0xC3);
    ArchCfg arch;
    auto params = init_params<double>(rng, arch);
    std::vector<Image> v1, v2;
    for (int i = 0; i < 8; ++i) {
        Image img(32, 32, 3);
        for (float& v : img.data) v = static_cast<float>(rng.uniform());
        (i < 4 ? v1 : v2).push_back(std::move(img));
    }
    const std::vector<double> phi{3.0, 10.0, 0.5, 22.0};
    const MarginSpec spec = MarginSpec::none();

    ForwardCache<double> c1, c2;
    const auto o1 = forward(params, v1, true, &c1);
    const auto o2 = forward(params, v2, true, &c2);
    const int B = 4, D = arch.embed_dim;
    Mat<double> gp1(B, D), gp2(B, D);
    for (int i = 0; i < B; ++i) {
        const auto lo = simsiam_loss<double>(o1.p.row(i), o1.z.row(i), o2.p.row(i), o2.z.row(i), spec, phi[i]);
        for (int j = 0; j < D; ++j) {
            gp1.at(i, j) = lo.grad_p1[j] / B;
            gp2.at(i, j) = lo.grad_p2[j] / B;
        }
    }
    auto analytic = backward(params, c1, c2, gp1, gp2);

    // Mean loss with the stop-gradient arguments frozen at their base values:
    // the exact function the analytic backward differentiates.
    auto loss_at = [&]() {
        const auto f1 = forward(params, v1, true);
        const auto f2 = forward(params, v2, true);
        double total = 0;
        for (int i = 0; i < B; ++i)
            total += simsiam_loss<double>(f1.p.row(i), o1.z.row(i), f2.p.row(i), o2.z.row(i), spec, phi[i])
                         .value;
        return total / B;
    };

    std::vector<std::vector<double>*> tensors, grads;
    for_each_learnable(params, [&](std::vector<double>& v) { tensors.push_back(&v); });
    for_each_learnable(analytic, [&](std::vector<double>& v) { grads.push_back(&v); });

    Rng pick(0xC3C);
    const double eps = 1e-5;
    int checked = 0, failures = 0;
    double max_rel = 0;
    for (size_t t = 0; t < tensors.size(); ++t) {
        const int n_coords = std::min<int>(12, static_cast<int>(tensors[t]->size()));
        for (int s = 0; s < n_coords; ++s) {
            const int idx = pick.uniform_int(0, static_cast<int>(tensors[t]->size()) - 1);
            double& coord = (*tensors[t])[idx];
            const double saved = coord;
            const double an = (*grads[t])[idx];
            auto fd_at = [&](double step) {
                coord = saved + step;
                const double lp = loss_at();
                coord = saved - step;
                const double lm = loss_at();
                coord = saved;
                return (lp - lm) / (2 * step);
            };
            double fd = fd_at(eps);
            double rel = std::abs(an - fd) / std::max({std::abs(fd), std::abs(an), 1e-6});
            if (rel > 1e-3) {
                // A ReLU/maxpool kink inside the step window inflates the
                // difference; a genuine gradient bug does not shrink with it.
                fd = fd_at(eps / 10);
                rel = std::abs(an - fd) / std::max({std::abs(fd), std::abs(an), 1e-6});
            }
            max_rel = std::max(max_rel, rel);
            if (rel > 1e-3) ++failures;
            ++checked;
        }
    }
    std::ostringstream detail;
    detail.precision(3);
    detail << "full-network finite-difference check on " << checked << " sampled coordinates, max rel err "
           << max_rel;
    report(3, failures == 0 ? "PASS" : "FAIL", detail.str());
    return failures == 0;
}

bool criterion_4() {
    const fs::path base_dir = accept_dir() / "c4_training_sanity";
    const double floor = 0.5 / std::sqrt(64.0);
    bool pass = true;
    std::ostringstream detail;
    detail.precision(4);
    detail << "kNN over 3 seeds:";
    for (const std::uint64_t seed : {1, 2, 3}) {
        RunConfig cfg = default_config();
        cfg.seed = seed;
        const RunOutcome out = train_or_resume(cfg, base_dir / ("seed_" + std::to_string(seed)));
        detail << ' ' << out.final_knn << " (min collapse " << out.min_collapse << ')';
        if (out.final_knn < 0.5 || out.min_collapse <= floor) pass = false;
    }
    report(4, pass ? "PASS" : "FAIL", "training sanity, " + detail.str());
    return pass;
}

bool criterion_5() {
    const fs::path dir = accept_dir() / "c5_overlap_sweep";
    RunConfig base = default_config();
    SweepSpec sweep{"overlap_ratio", {"0.1", "0.3", "0.5", "0.7", "0.9"}, {1, 2, 3}};
    const auto rows = run_sweep(base, sweep, dir);
    emit_chart(dir, rows, "kNN accuracy vs overlap ratio");
    const auto means = seed_means(rows);
    const bool have_all = means.count("0.1") && means.count("0.3") && means.count("0.5") && means.count("0.9");
    bool pass = false;
    if (have_all) {
        const double mid = std::max(means.at("0.3"), means.at("0.5"));
        pass = mid >= means.at("0.1") + 0.01 && mid >= means.at("0.9") + 0.01;
    }
    report(5, pass ? "PASS" : "FLAG",
           "inverted-U overlap trend, seed means: " + fmt_means(means) +
               (pass ? "" : " (trend not met; see " + dir.string() + ")"));
    return true;  // soft criterion
}

bool criterion_6() {
    RunConfig plain = default_config();
    plain.aug = CutoutSpec{0.3};
    RunConfig blur = default_config();
    blur.aug = CutoutBlurSpec{0.3, 0.0};  // sigma defaults to 10% of the region side

    SweepSpec sweep{"cutout_size", {"0.2", "0.3", "0.4"}, {1, 2, 3}};
    const fs::path dp = accept_dir() / "c6_cutout";
    const fs::path db = accept_dir() / "c6_cutout_blur";
    const auto rows_plain = run_sweep(plain, sweep, dp);
    const auto rows_blur = run_sweep(blur, sweep, db);
    emit_chart(dp, rows_plain, "kNN accuracy vs cutout size (cutout)");
    emit_chart(db, rows_blur, "kNN accuracy vs cutout size (cutout-blur)");

    const auto mp = seed_means(rows_plain);
    const auto mb = seed_means(rows_blur);
    bool pass = true;
    std::ostringstream detail;
    detail.precision(4);
    for (const std::string size : {"0.2", "0.3", "0.4"}) {
        if (!mp.count(size) || !mb.count(size)) {
            pass = false;
            continue;
        }
        detail << " [" << size << ": blur " << mb.at(size) << " vs cutout " << mp.at(size) << "]";
        if (mb.at(size) < mp.at(size)) pass = false;
    }
    report(6, pass ? "PASS" : "FLAG", "cutout-blur vs cutout seed means:" + detail.str());
    return true;  // soft criterion
}

bool criterion_7() {
    const fs::path dir = accept_dir() / "c7_margin_modes";
    RunConfig base = default_config();
    base.dataset.synth.mode = SynthMode::SceneCentric;
    base.margin = MarginSpec::fixed(0.2);  // seeds the fixed-m used by the sweep
    SweepSpec sweep{"margin_mode", {"none", "fixed", "distance"}, {1, 2, 3}};
    const auto rows = run_sweep(base, sweep, dir);
    emit_chart(dir, rows, "kNN accuracy vs margin mode (scene-centric training)");
    const auto means = seed_means(rows);
    bool pass = false;
    if (means.count("none") && means.count("fixed") && means.count("distance"))
        pass = means.at("distance") >= means.at("none") + 0.01 && means.at("distance") >= means.at("fixed");
    report(7, pass ? "PASS" : "FLAG",
           "margin ordering, seed means: " + fmt_means(means) +
               (pass ? "" : " (ordering not met; see " + dir.string() + ")"));
    return true;  // soft criterion
}

bool criterion_8() {
    const fs::path dir = accept_dir() / "c8_determinism";
    fs::remove_all(dir);

    RunConfig cfg = default_config();
    cfg.dataset.synth.n_samples = 128;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.eval.dataset.synth.n_samples = 120;
    cfg.eval.ref_count = 60;
    cfg.eval.query_count = 60;
    cfg.out_dir.clear();
    const TrainResult a = run_train(cfg);
    const TrainResult b = run_train(cfg);
    const bool train_ok = a.metrics_csv == b.metrics_csv;

    SweepSpec sweep{"overlap_ratio", {"0.3", "0.6"}, {1, 2}};
    run_sweep(cfg, sweep, dir / "killed", 2);  // simulated kill after 2 cells
    run_sweep(cfg, sweep, dir / "killed");     // resume
    run_sweep(cfg, sweep, dir / "straight");   // uninterrupted reference
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    const bool sweep_ok =
        slurp(dir / "killed" / "results.csv") == slurp(dir / "straight" / "results.csv") &&
        !slurp(dir / "killed" / "results.csv").empty();

    const bool pass = train_ok && sweep_ok;
    report(8, pass ? "PASS" : "FAIL",
           std::string("determinism: train CSV byte-identical=") + (train_ok ? "yes" : "no") +
               ", kill+resume sweep equals uninterrupted sweep=" + (sweep_ok ? "yes" : "no"));
    return pass;
}

unsigned char fixture_byte(int file, int rec, int offset) {
    return static_cast<unsigned char>((file * 131 + rec * 31 + offset * 7 + (offset >> 6)) & 0xFF);
}

void write_fixture_batches(const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<std::string> names;
    for (int i = 1; i <= 5; ++i) names.push_back("data_batch_" + std::to_string(i) + ".bin");
    names.push_back("test_batch.bin");
    for (int f = 0; f < 6; ++f) {
        const fs::path path = dir / names[f];
        if (fs::exists(path) && fs::file_size(path) ==
                                    static_cast<std::uintmax_t>(kCifarRecordBytes) * kCifarRecordsPerBatch)
            continue;
        std::ofstream out(path, std::ios::binary);
        std::vector<unsigned char> rec(kCifarRecordBytes);
        for (int r = 0; r < kCifarRecordsPerBatch; ++r) {
            rec[0] = static_cast<unsigned char>((f * 3 + r) % 10);
            for (int o = 1; o < kCifarRecordBytes; ++o) rec[o] = fixture_byte(f, r, o);
            out.write(reinterpret_cast<const char*>(rec.data()), kCifarRecordBytes);
        }
    }
}

bool criterion_9() {
    // SSLAB_CIFAR_DIR points at a real CIFAR-10 binary directory when one is
    // available; otherwise format-exact generated batches stand in.
    const char* env = std::getenv("SSLAB_CIFAR_DIR");
    fs::path dir;
    bool fixtures = false;
    if (env) {
        dir = env;
    } else {
        dir = accept_dir() / "c9_cifar_fixture";
        write_fixture_batches(dir);
        fixtures = true;
    }

    bool counts_ok = true, roundtrip_ok = true;
    std::vector<std::string> files;
    for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
    files.push_back("test_batch.bin");
    for (const auto& name : files) {
        const fs::path path = dir / name;
        if (fs::file_size(path) != static_cast<std::uintmax_t>(kCifarRecordBytes) * kCifarRecordsPerBatch)
            counts_ok = false;
        Dataset ds;
        try {
            load_cifar_batch_file(path, ds);
        } catch (const std::exception&) {
            counts_ok = false;
            continue;
        }
        if (ds.size() != kCifarRecordsPerBatch) counts_ok = false;
        // Byte round-trip of every record against the raw file.
        std::ifstream raw(path, std::ios::binary);
        std::vector<unsigned char> buf(kCifarRecordBytes);
        for (size_t r = 0; r < ds.size(); ++r) {
            raw.read(reinterpret_cast<char*>(buf.data()), kCifarRecordBytes);
            const auto ser = serialize_cifar_record(ds.labels[r], ds.images[r]);
            if (!std::equal(buf.begin(), buf.end(), ser.begin())) {
                roundtrip_ok = false;
                break;
            }
        }
    }

    // Independent reference reader for the first record of data_batch_1.bin.
    bool reference_ok = false;
    const fs::path script = accept_dir() / "c9_ref_reader.py";
    std::ofstream(script) << "import sys\n"
                             "d = open(sys.argv[1], 'rb').read(3073)\n"
                             "print(d[0], d[1], d[1 + 513], d[1 + 1024], d[1 + 2048 + 1023])\n";
    const std::string cmd = "python3 " + script.string() + " " + (dir / "data_batch_1.bin").string();
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
        int label = -1, b0 = -1, b513 = -1, g0 = -1, blast = -1;
        const int n = std::fscanf(pipe, "%d %d %d %d %d", &label, &b0, &b513, &g0, &blast);
        pclose(pipe);
        if (n == 5) {
            Dataset ds;
            load_cifar_batch_file(dir / "data_batch_1.bin", ds);
            const auto rec = serialize_cifar_record(ds.labels[0], ds.images[0]);
            reference_ok = label == ds.labels[0] && b0 == rec[1] && b513 == rec[1 + 513] &&
                           g0 == rec[1 + 1024] && blast == rec[1 + 2048 + 1023];
        }
    }

    const bool pass = counts_ok && roundtrip_ok && reference_ok;
    report(9, pass ? "PASS" : "FAIL",
           std::string("CIFAR-10 ingestion (") + (fixtures ? "generated format-exact batches" : env) +
               "): record counts=" + (counts_ok ? "ok" : "bad") +
               ", byte round-trip=" + (roundtrip_ok ? "ok" : "bad") +
               ", independent reference reader=" + (reference_ok ? "ok" : "bad"));
    return pass;
}

}  // namespace

int main(int argc, char** argv) {
    bool (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                            criterion_6, criterion_7, criterion_8, criterion_9};
    try {
        if (argc > 1) {
            const int n = std::atoi(argv[1]);
            if (n < 1 || n > 9) {
                std::cerr << "usage: acceptance [1-9]\n";
                return 2;
            }
            return criteria[n - 1]() ? 0 : 1;
        }
        int failures = 0;
        for (int n = 1; n <= 9; ++n)
            if (!criteria[n - 1]()) ++failures;
        return failures == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance: unhandled error: " << e.what() << '\n';
        return 2;
    }
}
