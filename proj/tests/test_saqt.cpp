#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "glint/saqt/builder.hpp"

using namespace glint;
using namespace glint::saqt;
namespace fs = std::filesystem;

namespace {

SemanticEmbedding embed_of(Eigen::VectorXd v) {
    SemanticEmbedding e;
    e.vector = std::move(v);
    e.extractor_tag = "test";
    return e;
}

ImageTensor noise_image(int h, int w, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageTensor t;
    t.h = h;
    t.w = w;
    t.data.resize(3, static_cast<Eigen::Index>(h) * w);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < t.data.cols(); ++j) t.data(i, j) = u(rng);
    return t;
}

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = fs::temp_directory_path() / ("glint_" + name);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path path() const { return path_; }

private:
    fs::path path_;
};

// fixture corpus: pristine images on disk + MOS grid, plus HQ images
struct Fixture {
    TempDir dir{"saqt_fixture"};
    LabeledCorpus corpus;
    std::string hq_dir;

    Fixture(int n_pristine, int n_hq,
            const std::vector<std::string>& families,
            bool hq_duplicates_pristine = false) {
        fs::create_directories(dir.path() / "pristine");
        fs::create_directories(dir.path() / "hq");
        hq_dir = (dir.path() / "hq").string();
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> mos(0.5, 8.5);
        for (int i = 0; i < n_pristine; ++i) {
            CorpusEntry e;
            e.id = "p" + std::to_string(i);
            e.path = (dir.path() / "pristine" / (e.id + ".png")).string();
            save_png(noise_image(64, 64, 1000 + i), e.path);
            for (const auto& f : families) {
                std::vector<double> v(5);
                for (auto& x : v) x = std::round(mos(rng) * 10.0) / 10.0;
                e.mos[f] = v;
            }
            corpus.entries.push_back(std::move(e));
        }
        for (int j = 0; j < n_hq; ++j) {
            unsigned seed = hq_duplicates_pristine ? 1000 + (j % n_pristine)
                                                   : 2000 + j;
            save_png(noise_image(64, 64, seed),
                     (dir.path() / "hq" / ("h" + std::to_string(j) + ".png"))
                         .string());
        }
    }
};

}  // namespace

TEST(SemanticDistance, IdenticalIsZero) {
    Eigen::VectorXd v = Eigen::VectorXd::Random(2048);
    EXPECT_DOUBLE_EQ(semantic_distance(embed_of(v), embed_of(v)), 0.0);
}

TEST(SemanticDistance, OrthogonalIsOne) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(4), b = Eigen::VectorXd::Zero(4);
    a(0) = 3.0;
    b(1) = 7.0;
    EXPECT_DOUBLE_EQ(semantic_distance(embed_of(a), embed_of(b)), 1.0);
}

TEST(SemanticDistance, AntipodalIsTwo) {
    Eigen::VectorXd v = Eigen::VectorXd::Random(16);
    EXPECT_NEAR(semantic_distance(embed_of(v), embed_of(-v)), 2.0, 1e-12);
}

TEST(SemanticDistance, SymmetricAndBounded) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(0, 1);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd a(32), b(32);
        for (int i = 0; i < 32; ++i) {
            a(i) = d(rng);
            b(i) = d(rng);
        }
        double ab = semantic_distance(embed_of(a), embed_of(b));
        double ba = semantic_distance(embed_of(b), embed_of(a));
        EXPECT_DOUBLE_EQ(ab, ba);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 2.0);
    }
}

TEST(SemanticDistance, ZeroNormRejected) {
    EXPECT_THROW(semantic_distance(embed_of(Eigen::VectorXd::Zero(8)),
                                   embed_of(Eigen::VectorXd::Ones(8))),
                 NumericError);
}

TEST(MatchPristine, SelfMatchIsZeroDistance) {
    std::vector<SemanticEmbedding> corpus;
    for (int i = 0; i < 5; ++i)
        corpus.push_back(embed_of(Eigen::VectorXd::Random(64)));
    auto [idx, dist] = match_pristine(corpus[2], corpus);
    EXPECT_EQ(idx, 2u);
    EXPECT_DOUBLE_EQ(dist, 0.0);
}

TEST(MatchPristine, MatchesBruteForceOracle) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d(0, 1);
    auto rand_embed = [&] {
        Eigen::VectorXd v(48);
        for (int i = 0; i < 48; ++i) v(i) = d(rng);
        return embed_of(v);
    };
    std::vector<SemanticEmbedding> corpus;
    for (int i = 0; i < 100; ++i) corpus.push_back(rand_embed());
    for (int q = 0; q < 100; ++q) {
        auto query = rand_embed();
        // oracle: compute every distance, then take the first minimum
        std::size_t oracle_idx = 0;
        double oracle_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            double dd = semantic_distance(query, corpus[i]);
            if (dd < oracle_d) {
                oracle_d = dd;
                oracle_idx = i;
            }
        }
        auto [idx, dist] = match_pristine(query, corpus);
        EXPECT_EQ(idx, oracle_idx);
        EXPECT_DOUBLE_EQ(dist, oracle_d);
    }
}

TEST(MatchPristine, TieBreaksToLowerIndex) {
    // duplicate entries give bitwise-equal distances; lower index must win
    Eigen::VectorXd q = Eigen::VectorXd::Random(8);
    std::vector<SemanticEmbedding> corpus{embed_of(q), embed_of(q)};
    auto [idx, dist] = match_pristine(embed_of(q), corpus);
    EXPECT_EQ(idx, 0u);
    EXPECT_NEAR(dist, 0.0, 1e-14);
}

TEST(MatchPristine, EmptyCorpusRejected) {
    EXPECT_THROW(match_pristine(embed_of(Eigen::VectorXd::Ones(8)), {}),
                 InputError);
}

TEST(EmbeddingExtractor, OutputLength2048AndDeterministic) {
    EmbeddingExtractor ex(5);
    auto img = noise_image(96, 80, 4);
    auto a = ex(img, "a");
    auto b = ex(img, "a");
    EXPECT_EQ(a.vector.size(), 2048);
    EXPECT_EQ(a.vector, b.vector);
    EXPECT_EQ(a.extractor_tag, "glint-cnn-v1");
}

TEST(EmbeddingExtractor, ZeroImageFinite) {
    EmbeddingExtractor ex(6);
    ImageTensor img;
    img.h = img.w = 64;
    img.data = ag::Mat::Zero(3, 64 * 64);
    auto e = ex(img, "z");
    EXPECT_TRUE(e.vector.allFinite());
}

TEST(TransferLabels, ExactCopyOfMatchedMos) {
    LabeledCorpus corpus;
    CorpusEntry e;
    e.id = "p0";
    e.mos["gaussian_blur"] = {7.0, 6.0, 4.2, 3.0, 1.0};
    corpus.entries.push_back(e);
    DistortionBank bank;
    auto specs = std::vector<DistortionSpec>{bank.spec("gaussian_blur", 3, 0)};
    auto recs = transfer_labels("h0", 0, 0.1, corpus, specs);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].label, 4.2);  // bitwise copy
    EXPECT_EQ(recs[0].matched_pristine_id, "p0");
}

TEST(TransferLabels, GridArithmetic) {
    LabeledCorpus corpus;
    CorpusEntry e;
    e.id = "p0";
    std::vector<std::string> fams{"gaussian_blur", "white_noise", "jpeg",
                                  "pixelate", "darken"};
    for (const auto& f : fams) e.mos[f] = {8, 6, 4, 3, 1};
    corpus.entries.push_back(e);
    DistortionBank bank;
    auto specs = bank.enumerate_specs(fams, 1, 5);
    auto recs = transfer_labels("h0", 0, 0.0, corpus, specs);
    EXPECT_EQ(recs.size(), 25u);
}

TEST(TransferLabels, MissingMosCellNamesCulprit) {
    LabeledCorpus corpus;
    CorpusEntry e;
    e.id = "p7";
    e.mos["gaussian_blur"] = {8, 6, 4, 3, 1};
    corpus.entries.push_back(e);
    DistortionBank bank;
    auto specs = std::vector<DistortionSpec>{bank.spec("jpeg", 2, 0)};
    try {
        transfer_labels("h0", 0, 0.0, corpus, specs);
        FAIL();
    } catch (const DataError& err) {
        std::string msg = err.what();
        EXPECT_NE(msg.find("p7"), std::string::npos);
        EXPECT_NE(msg.find("jpeg"), std::string::npos);
        EXPECT_NE(msg.find("2"), std::string::npos);
    }
}

TEST(BuildDataset, RecordCountArithmetic) {
    std::vector<std::string> fams{"gaussian_blur", "white_noise"};
    Fixture fx(4, 10, fams);
    DistortionBank bank;
    EmbeddingExtractor ex(11);
    BuildConfig cfg;
    cfg.families = fams;
    cfg.write_images = false;
    auto [manifest, stats] = build_dataset(fx.hq_dir, fx.corpus, bank, ex, cfg);
    EXPECT_EQ(stats.hq_images, 10u);
    EXPECT_EQ(manifest.records.size(), 10u * 2 * 5);
    for (const auto& r : manifest.records) {
        EXPECT_GE(r.semantic_distance, 0.0);
        EXPECT_LE(r.semantic_distance, 2.0);
    }
}

TEST(BuildDataset, SelfMatchCorpusGivesZeroDistancesAndExactLabels) {
    std::vector<std::string> fams{"gaussian_blur"};
    Fixture fx(4, 4, fams, /*hq_duplicates_pristine=*/true);
    DistortionBank bank;
    EmbeddingExtractor ex(12);
    BuildConfig cfg;
    cfg.families = fams;
    cfg.write_images = false;
    auto [manifest, stats] = build_dataset(fx.hq_dir, fx.corpus, bank, ex, cfg);
    std::map<std::string, std::size_t> pristine_index;
    for (std::size_t i = 0; i < fx.corpus.entries.size(); ++i)
        pristine_index[fx.corpus.entries[i].id] = i;
    for (const auto& r : manifest.records) {
        EXPECT_NEAR(r.semantic_distance, 0.0, 1e-12) << r.hq_id;
        auto src = pristine_index.at(r.matched_pristine_id);
        EXPECT_EQ(r.label, fx.corpus.mos_at(src, r.family, r.level));
    }
    EXPECT_NEAR(stats.distance_mean, 0.0, 1e-12);
}

TEST(BuildDataset, IdempotentManifestBytes) {
    std::vector<std::string> fams{"white_noise"};
    Fixture fx(3, 5, fams);
    DistortionBank bank;
    EmbeddingExtractor ex(13);
    BuildConfig cfg;
    cfg.families = fams;
    cfg.seed = 42;
    cfg.write_images = false;
    TempDir out("saqt_idem");
    auto run = [&](const std::string& name) {
        auto [manifest, stats] =
            build_dataset(fx.hq_dir, fx.corpus, bank, ex, cfg);
        std::string p = (out.path() / name).string();
        manifest.save(p);
        std::ifstream f(p);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    EXPECT_EQ(run("a.jsonl"), run("b.jsonl"));
}

TEST(BuildDataset, WritesDegradedImagesAndManifestRoundTrips) {
    std::vector<std::string> fams{"gaussian_blur"};
    Fixture fx(2, 2, fams);
    DistortionBank bank;
    EmbeddingExtractor ex(14);
    TempDir out("saqt_imgs");
    BuildConfig cfg;
    cfg.families = fams;
    cfg.out_dir = (out.path() / "degraded").string();
    auto [manifest, stats] = build_dataset(fx.hq_dir, fx.corpus, bank, ex, cfg);
    ASSERT_EQ(manifest.records.size(), 10u);
    for (const auto& r : manifest.records) EXPECT_TRUE(fs::exists(r.image_path));

    std::string mpath = (out.path() / "manifest.jsonl").string();
    manifest.save(mpath);
    auto loaded = DatasetManifest::load(mpath);
    ASSERT_EQ(loaded.records.size(), manifest.records.size());
    EXPECT_EQ(loaded.header.at("extractor_tag"), ex.tag());
    for (std::size_t i = 0; i < loaded.records.size(); ++i)
        EXPECT_EQ(loaded.records[i].label, manifest.records[i].label);
}

TEST(Corpus, NativeMosRescaledToZeroNine) {
    TempDir dir("corpus_rescale");
    std::string path = (dir.path() / "corpus.json").string();
    {
        std::ofstream f(path);
        f << R"({"entries":[{"id":"p0","path":"",
                "mos":{"gaussian_blur":[20,40,60,80,100]}}],
                "native_range":[20,100]})";
    }
    auto corpus = load_corpus(path);
    EXPECT_DOUBLE_EQ(corpus.mos_at(0, "gaussian_blur", 1), 0.0);
    EXPECT_DOUBLE_EQ(corpus.mos_at(0, "gaussian_blur", 5), 9.0);
    EXPECT_DOUBLE_EQ(corpus.mos_at(0, "gaussian_blur", 3), 4.5);
}
