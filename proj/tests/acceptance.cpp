// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "uod/coco_io.hpp"
#include "uod/eval_metrics.hpp"
#include "uod/part_discovery.hpp"
#include "uod/pipeline.hpp"
#include "uod/proposal_ranking.hpp"
#include "uod/semantic_clustering.hpp"
#include "uod/spectral_graph.hpp"
#include "uod/synthetic.hpp"

#include "fixtures.hpp"
#include "micro_datasets.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace uod;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first few failure messages of a criterion.
class Tally {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
    }
    std::size_t failures() const { return failures_; }
    Outcome outcome(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, summary + " | " + std::to_string(failures_) + " failed check(s): " + messages_};
    }

private:
    std::size_t failures_ = 0;
    std::string messages_;
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os.precision(digits);
    os << std::fixed << v;
    return os.str();
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- eigen

// Tokens drawn around a few latent directions, so the graphs have structure.
AffinityGraph token_graph(std::mt19937_64& rng, std::size_t n) {
    const std::size_t dim = 8, groups = 2 + rng() % 3;
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<std::vector<float>> centres(groups, std::vector<float>(dim));
    for (auto& c : centres)
        for (auto& x : c) x = g(rng);
    std::vector<float> tokens;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centres[rng() % groups];
        for (std::size_t d = 0; d < dim; ++d) tokens.push_back(c[d] + 0.6f * g(rng));
    }
    return build_affinity(tokens, dim);
}

double independent_residual(const AffinityGraph& g, const EigenBasis& b, std::size_t k) {
    const std::size_t n = g.n_nodes;
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += g.at(i, j);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double wy = 0.0;
        for (std::size_t j = 0; j < n; ++j) wy += g.at(i, j) * b.at(j, k);
        const double dy = deg[i] * b.at(i, k);
        const double r = dy - wy - b.eigenvalues[k] * dy;
        num += r * r;
        den += dy * dy;
    }
    return std::sqrt(num / den);
}

Outcome eigen_correctness() {
    Tally t;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    std::size_t lanczos = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 20 + rng() % 181;
        const std::size_t nv = 2 + rng() % 4;
        const auto g = token_graph(rng, n);
        EigenOptions o;
        if (rep % 2 == 1) {
            o.dense_below = 0;
            ++lanczos;
        }
        try {
            const auto b = eigendecompose(g, nv, o);
            for (std::size_t k = 0; k < nv; ++k) {
                const double r = independent_residual(g, b, k);
                worst = std::max(worst, r);
                t.expect(r <= 1e-6, "graph " + std::to_string(rep) + " pair " + std::to_string(k) + " residual " + std::to_string(r));
                if (k > 0) t.expect(b.eigenvalues[k] >= b.eigenvalues[k - 1], "graph " + std::to_string(rep) + " not ascending");
            }
        } catch (const std::exception& e) {
            t.expect(false, "graph " + std::to_string(rep) + ": " + e.what());
        }
    }

    // Two cliques joined only by floor weights: the sign of the first vector splits them.
    const std::size_t a = 13, n = 30;
    std::vector<float> tokens;
    for (std::size_t i = 0; i < n; ++i) {
        tokens.push_back(i < a ? 1.0f : 0.0f);
        tokens.push_back(i < a ? 0.0f : 1.0f);
    }
    const auto cliques = build_affinity(tokens, 2);
    for (std::size_t dense_below : {std::size_t{400}, std::size_t{0}}) {
        EigenOptions o;
        o.dense_below = dense_below;
        const auto b = eigendecompose(cliques, 2, o);
        bool split = true;
        for (std::size_t i = 0; i < n; ++i) split = split && ((b.at(i, 0) > 0) == (b.at(0, 0) > 0)) == (i < a);
        t.expect(split, "two-clique block structure not recovered (dense_below " + std::to_string(dense_below) + ")");
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    t.expect(secs < 30.0, "runtime " + fmt(secs, 1) + " s");
    return t.outcome("50 graphs (" + std::to_string(lanczos) + " via Lanczos), worst residual " + sci(worst) +
                     ", two cliques split, " + fmt(secs, 2) + " s");
}

// ---------------------------------------------------------------- part discovery

Outcome part_discovery_contract() {
    Tally t;
    std::size_t correct = 0;
    for (int f = 0; f < 100; ++f) {
        std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(f));
        const auto planted = testing::planted_space(rng, 1 + static_cast<std::size_t>(f % 5));
        DiscoveryParams p;
        p.seed = static_cast<std::uint64_t>(f);
        try {
            const auto m = discover_parts(planted.space, p);
            for (int rerun = 0; rerun < 2; ++rerun) {
                const auto again = discover_parts(planted.space, p);
                t.expect(again.labels == m.labels && again.k == m.k, "fixture " + std::to_string(f) + " not deterministic");
            }
            t.expect(m.k >= 2 && m.k <= p.k_max, "fixture " + std::to_string(f) + " K out of range");
            const auto areas = m.areas();
            t.expect(areas[static_cast<std::size_t>(m.background_id)] == *std::max_element(areas.begin(), areas.end()),
                     "fixture " + std::to_string(f) + " background is not the largest cluster");
            correct += (m.k - 1 == planted.n_blobs);
        } catch (const std::exception& e) {
            t.expect(false, "fixture " + std::to_string(f) + ": " + e.what());
        }
    }
    t.expect(correct >= 90, "only " + std::to_string(correct) + "/100 counts correct");
    return t.outcome(std::to_string(correct) + "/100 planted counts recovered, deterministic over 3 runs");
}

// ---------------------------------------------------------------- objectness

struct BenchImage {
    ProposalSet proposals;
    GroundTruth truth;
};

// Planted objects (textured, semantically distinct), a homogeneous but
// distinct region, a textured region that looks like the background, and
// scattered background boxes.
BenchImage benchmark_image(std::mt19937_64& rng, std::size_t index) {
    const std::uint32_t size = 256, dim = 32;
    BenchImage img;
    img.proposals.image_id = "bench_" + std::to_string(index);
    img.proposals.image_width = img.proposals.image_height = size;
    img.truth.image_id = img.proposals.image_id;
    img.truth.width = img.truth.height = size;

    std::normal_distribution<float> noise(0.0f, 0.15f);
    auto direction = [&](std::size_t axis) {
        std::vector<float> v(dim);
        for (auto& x : v) x = noise(rng);
        v[axis] += 1.0f;
        return v;
    };
    std::vector<Box> taken;
    auto place = [&](double lo, double hi) -> std::optional<Box> {
        std::uniform_real_distribution<double> s(lo, hi);
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double w = std::floor(s(rng)), h = std::floor(s(rng));
            const double x = std::floor(std::uniform_real_distribution<double>(0, size - w)(rng));
            const double y = std::floor(std::uniform_real_distribution<double>(0, size - h)(rng));
            const Box b{x, y, x + w, y + h};
            bool free = true;
            for (const auto& o : taken) free = free && iou(o, b) == 0.0 && !(b.x1 < o.x2 && o.x1 < b.x2 && b.y1 < o.y2 && o.y1 < b.y2);
            if (free) {
                taken.push_back(b);
                return b;
            }
        }
        return std::nullopt;
    };
    auto add = [&](const Box& b, std::vector<float> cls, std::size_t bins) {
        Proposal p;
        p.box = b;
        p.cls = std::move(cls);
        p.histogram = testing::histogram_for(b, rng, 32, bins);
        img.proposals.proposals.push_back(std::move(p));
    };
    auto cluster = [&](const Box& b, std::size_t axis, std::size_t bins) {
        const double dx = 0.1 * b.width(), dy = 0.1 * b.height();
        const Box copies[4] = {b, {b.x1 + dx, b.y1, b.x2, b.y2 - dy}, {b.x1, b.y1 + dy, b.x2 - dx, b.y2},
                               {b.x1 + dx, b.y1 + dy, b.x2 - dx, b.y2 - dy}};
        for (const auto& c : copies) add(c, direction(axis), bins);
    };

    const std::size_t n_obj = 1 + rng() % 3;
    for (std::size_t k = 0; k < n_obj; ++k) {
        if (auto b = place(50, 90)) {
            img.truth.boxes.push_back(*b);
            cluster(*b, 1 + rng() % 4, 128);
        }
    }
    if (auto b = place(50, 90)) cluster(*b, 10 + index % 8, 2);  // homogeneous, distinct
    if (auto b = place(50, 90)) cluster(*b, 0, 128);             // textured, background-like
    for (int k = 0; k < 12; ++k) {
        if (auto b = place(8, 16)) add(*b, direction(0), 4);
    }
    std::vector<std::uint32_t> ranks(img.proposals.proposals.size());
    std::iota(ranks.begin(), ranks.end(), 0u);
    std::shuffle(ranks.begin(), ranks.end(), rng);
    for (std::size_t i = 0; i < ranks.size(); ++i) img.proposals.proposals[i].original_rank = ranks[i];
    return img;
}

Outcome objectness_oracle() {
    Tally t;
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rng() % 40;
        const auto ps = testing::random_proposals(rng, n, 8);
        RankingParams p;
        p.alpha = static_cast<double>(rng() % 101) / 100.0;
        p.iou_threshold = 0.05 + 0.9 * static_cast<double>(rng() % 100) / 100.0;
        p.aggregation = rng() % 2 ? NeighborAggregation::sum : NeighborAggregation::average;
        p.max_considered = 2 + rng() % 45;
        oracle::ObjectnessOptions o;
        o.alpha = p.alpha;
        o.t = p.iou_threshold;
        o.average = p.aggregation == NeighborAggregation::average;
        o.cap = p.max_considered;
        const auto got = objectness_scores(ps, p);
        const auto want = oracle::objectness(ps, o);
        t.expect(got.order.size() == want.size(), "set " + std::to_string(rep) + " size");
        for (std::size_t k = 0; k < got.order.size(); ++k) {
            const auto it = want.find(got.order[k]);
            if (it == want.end()) {
                t.expect(false, "set " + std::to_string(rep) + " unexpected proposal");
                continue;
            }
            worst = std::max(worst, std::abs(got.scores[k] - it->second));
            t.expect(std::abs(got.scores[k] - it->second) <= 1e-12, "set " + std::to_string(rep) + " score");
            if (k > 0) t.expect(got.scores[k] <= got.scores[k - 1], "set " + std::to_string(rep) + " not sorted");
        }
    }

    // alpha = 1: histograms have no influence; alpha = 0: entropy alone orders.
    for (int rep = 0; rep < 20; ++rep) {
        auto ps = testing::random_proposals(rng, 15, 8);
        RankingParams p;
        p.alpha = 1.0;
        const auto before = objectness_scores(ps, p);
        for (auto& pr : ps.proposals) pr.histogram = testing::histogram_for(pr.box, rng, 0, 1 + rng() % 256);
        const auto after = objectness_scores(ps, p);
        t.expect(before.order == after.order && before.scores == after.scores, "alpha=1 depends on histograms");

        p.alpha = 0.0;
        const auto ent = objectness_scores(ps, p);
        std::vector<double> h;
        for (const auto& pr : ps.proposals) h.push_back(oracle::histogram_entropy(pr.histogram));
        const auto nh = oracle::normalize01(h);
        for (std::size_t k = 0; k < ent.order.size(); ++k) {
            t.expect(std::abs(ent.scores[k] - nh[ent.order[k]]) <= 1e-12, "alpha=0 score is not the entropy term");
            if (k > 0) t.expect(h[ent.order[k]] <= h[ent.order[k - 1]] + 1e-12, "alpha=0 not ordered by entropy");
        }
    }

    // Detection rate of the full score against the two-term variants.
    std::vector<BenchImage> bench;
    std::mt19937_64 brng(4242);
    for (std::size_t i = 0; i < 50; ++i) bench.push_back(benchmark_image(brng, i));
    std::vector<GroundTruth> gts;
    for (const auto& b : bench) gts.push_back(b.truth);
    auto rate = [&](ScoreTerms terms, std::size_t k) {
        RankingParams p;
        p.terms = terms;
        std::vector<RankedBoxes> ranked;
        for (const auto& b : bench) {
            const auto r = objectness_scores(b.proposals, p);
            RankedBoxes rb{b.proposals.image_id, {}};
            for (auto i : r.order) rb.boxes.push_back(b.proposals.proposals[i].box);
            ranked.push_back(std::move(rb));
        }
        return detection_rate(ranked, gts, k, 0.5);
    };
    std::string table;
    for (std::size_t k : {1, 4, 10, 20}) {
        const double full = rate({true, true, true}, k);
        const double sim_dis = rate({true, true, false}, k);
        const double sim_ent = rate({true, false, true}, k);
        t.expect(full >= sim_dis && full >= sim_ent, "k=" + std::to_string(k) + " full " + fmt(full) + " < variant");
        table += " k=" + std::to_string(k) + ":" + fmt(full, 2) + "/" + fmt(sim_dis, 2) + "/" + fmt(sim_ent, 2);
    }
    return t.outcome("200 sets, worst diff " + sci(worst) + "; ablations hold; recall full/sim+dis/sim+ent" + table);
}

// ---------------------------------------------------------------- metrics

Outcome metric_oracles() {
    Tally t;
    std::mt19937_64 rng(99);
    double worst = 0.0;
    const auto thr = coco_iou_thresholds();
    for (int rep = 0; rep < 500; ++rep) {
        const auto m = testing::box_micro(rng);
        const double a = ap50(m.dets, m.gts);
        const double ao = oracle::ap(m.odets, m.imgs, 0.5);
        worst = std::max(worst, std::abs(a - ao));
        t.expect(std::abs(a - ao) <= 1e-9, "ap50 case " + std::to_string(rep));
        const auto r = odap(m.dets, m.gts, thr);
        for (std::size_t k = 0; k < thr.size(); ++k) {
            const double o = oracle::odap(m.odets, m.imgs, thr[k]);
            worst = std::max(worst, std::abs(r.per_threshold[k] - o));
            t.expect(std::abs(r.per_threshold[k] - o) <= 1e-9, "odap case " + std::to_string(rep));
        }
        t.expect(r.mean <= r.per_threshold[0], "odAP@[50:95] > odAP@50 in case " + std::to_string(rep));

        const auto mm = testing::mask_micro(rng);
        const double mi = miou(mm.preds, mm.gts);
        const double mo = oracle::miou(mm.images);
        worst = std::max(worst, std::abs(mi - mo));
        t.expect(std::abs(mi - mo) <= 1e-9, "miou case " + std::to_string(rep));

        // perfect predictions
        std::vector<Detection> perfect;
        for (const auto& g : m.gts)
            for (const auto& b : g.boxes) perfect.push_back({g.image_id, b, 1.0, 0, std::nullopt});
        t.expect(ap50(perfect, m.gts) == 1.0, "perfect ap50 case " + std::to_string(rep));
        t.expect(odap(perfect, m.gts, thr).mean == 1.0, "perfect odap case " + std::to_string(rep));
        std::vector<ImageMasks> exact;
        for (const auto& g : mm.gts) exact.push_back({g.image_id, g.masks});
        t.expect(miou(exact, mm.gts) == 1.0, "perfect miou case " + std::to_string(rep));
    }
    return t.outcome("500 micro-datasets, worst diff " + sci(worst) + ", perfect = 1.0, odAP@[50:95] <= odAP@50");
}

// ---------------------------------------------------------------- pipeline

Outcome pipeline_round_trip() {
    Tally t;
    testing::TempDir root("acceptance");
    SyntheticOptions so;
    so.n_images = 3;
    so.seed = 4;
    const auto data = make_synthetic_dataset(so);
    write_synthetic_dataset(data, root.path() / "archives");

    auto run = [&](const std::string& name) {
        auto c = parse_config("seed = 7\ntop_p = 4\nbottom_q = 3\nk_range = 2..5\n");
        c.archive_dir = root.path() / "archives";
        c.output_dir = root.path() / name;
        const auto r = run_discover(c);
        t.expect(r.manifest.exit_code() == 0 && r.instances.size() == 3, name + " run incomplete");
        export_pseudo_labels(load_instance_sets(c.output_dir), root.path() / (name + ".json"));
        return slurp(root.path() / (name + ".json"));
    };
    const std::string first = run("first"), second = run("second");
    t.expect(first == second, "pseudo-label JSON differs between runs");

    const auto sets = load_instance_sets(root.path() / "first");
    std::vector<Detection> direct;
    std::vector<ImageMasks> masks;
    std::size_t n_inst = 0;
    for (const auto& s : sets) {
        masks.push_back({s.image_id, {}});
        for (const auto& i : s.instances) {
            direct.push_back({s.image_id, i.bbox, i.confidence, i.class_id, i.mask});
            masks.back().masks.push_back(i.mask);
            const Rle r = rle_encode(i.mask);
            t.expect(r.counts == oracle::run_lengths(i.mask), "RLE counts differ from the run-length oracle");
            t.expect(rle_decode(r) == i.mask, "RLE decode differs from the source mask");
            ++n_inst;
        }
    }
    const auto exported = nlohmann::json::parse(first);
    const auto back = detections_from_json(exported);
    t.expect(back.size() == direct.size(), "exported annotation count");
    for (std::size_t k = 0; k < std::min(back.size(), direct.size()); ++k) {
        const bool same = back[k].image_id == direct[k].image_id && back[k].score == direct[k].score &&
                          back[k].bbox.x1 == direct[k].bbox.x1 && back[k].bbox.y1 == direct[k].bbox.y1 &&
                          back[k].bbox.x2 == direct[k].bbox.x2 && back[k].bbox.y2 == direct[k].bbox.y2 &&
                          back[k].mask && *back[k].mask == *direct[k].mask;
        t.expect(same, "annotation " + std::to_string(k) + " not recovered losslessly");
    }
    const std::vector<EvalTask> tasks{EvalTask::ap50, EvalTask::odap, EvalTask::miou};
    const auto report = evaluate(exported, ground_truth_to_json(data.ground_truth), tasks);
    const auto thr = coco_iou_thresholds();
    t.expect(report["metrics"]["ap50"].get<double>() == ap50(direct, data.ground_truth), "evaluated ap50 differs");
    t.expect(report["metrics"]["odap50_95"].get<double>() == odap(direct, data.ground_truth, thr).mean, "evaluated odap differs");
    t.expect(report["metrics"]["miou"].get<double>() == miou(masks, data.ground_truth), "evaluated miou differs");
    return t.outcome("2 runs byte-identical (" + std::to_string(first.size()) + " bytes, " + std::to_string(n_inst) +
                     " instances); export->evaluate lossless; RLE exact");
}

// ---------------------------------------------------------------- clustering

Outcome clustering_model_selection() {
    Tally t;
    std::size_t recovered = 0;
    const std::size_t dim = 512;
    for (int pool = 0; pool < 20; ++pool) {
        std::mt19937_64 rng(500 + static_cast<std::uint64_t>(pool));
        const std::size_t blobs = 2 + static_cast<std::size_t>(pool % 5);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> pts;
        for (std::size_t b = 0; b < blobs; ++b) {
            std::vector<double> c(dim);
            for (auto& x : c) x = n(rng);
            for (int i = 0; i < 25; ++i)
                for (std::size_t d = 0; d < dim; ++d) pts.push_back(c[d] + 0.3 * n(rng));
        }
        const auto r = select_k({pts, dim}, {2, 10}, static_cast<std::uint64_t>(pool));
        recovered += r.k == blobs;
        t.expect(r.k == blobs, "pool " + std::to_string(pool) + ": " + std::to_string(r.k) + " != " + std::to_string(blobs));
    }
    const double h = std::sqrt(3.0) / 2.0;
    const std::vector<double> six{0, 0, 1, 0, 0.5, h, 10, 0, 11, 0, 10.5, h};
    const std::vector<int> labels{0, 0, 0, 1, 1, 1};
    const double r91 = std::sqrt(91.0), r111 = std::sqrt(111.0);
    const double b[6] = {(21 + r111) / 3, (19 + r91) / 3, (10 + r91 + r111) / 3,
                         (19 + r91) / 3,  (21 + r111) / 3, (10 + r91 + r111) / 3};
    double want = 0;
    for (double bi : b) want += (bi - 1.0) / bi / 6.0;
    const double got = silhouette_score({six, 2}, labels);
    t.expect(std::abs(got - want) <= 1e-12, "6-point silhouette " + std::to_string(got) + " vs " + std::to_string(want));
    return t.outcome(std::to_string(recovered) + "/20 pools recovered; 6-point silhouette " + fmt(got, 12));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"eigen-correctness", eigen_correctness},
        {"part-discovery-contract", part_discovery_contract},
        {"objectness-oracle", objectness_oracle},
        {"metric-oracles", metric_oracles},
        {"pipeline-determinism-round-trip", pipeline_round_trip},
        {"clustering-model-selection", clustering_model_selection},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  %-32s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
