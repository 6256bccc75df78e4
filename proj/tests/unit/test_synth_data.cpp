#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "hdc/rng.hpp"
#include "hdc/dataset.hpp"
#include "hdc/model.hpp"
#include "hdc/synth.hpp"

using namespace hdc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("hdc_test_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(p);
    return p;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            std::ifstream f(e.path(), std::ios::binary);
            out[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(f), {});
        }
    }
    return out;
}

data::GenerateOptions small_options() {
    data::GenerateOptions o;
    o.seed = 4;
    o.n_total = 25;
    o.labeled_fraction = 0.2;
    o.height = 32;
    o.width = 32;
    o.val = 3;
    o.test = 4;
    return o;
}

}  // namespace

TEST(Synth, Deterministic) {
    EXPECT_EQ(synth::generate_sample(1, 7, 64, 64).image, synth::generate_sample(1, 7, 64, 64).image);
    EXPECT_EQ(synth::generate_sample(1, 7, 64, 64).mask, synth::generate_sample(1, 7, 64, 64).mask);
    EXPECT_NE(synth::generate_sample(1, 7, 64, 64).image, synth::generate_sample(1, 8, 64, 64).image);
}

TEST(Synth, ForegroundFractionAndRange) {
    for (std::uint64_t id = 0; id < 60; ++id) {
        const auto s = synth::generate_sample(3, id, 64, 64);
        const double f = synth::foreground_fraction(s.mask);
        EXPECT_GE(f, 0.03);
        EXPECT_LE(f, 0.5);
        for (float v : s.image.pixels) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
    }
}

TEST(Synth, ThreeClassesPresent) {
    synth::SynthParams p;
    p.classes = 3;
    for (std::uint64_t id = 0; id < 10; ++id) {
        const auto s = synth::generate_sample(5, id, 64, 64, p);
        std::set<int> seen(s.mask.labels.begin(), s.mask.labels.end());
        EXPECT_EQ(seen, (std::set<int>{0, 1, 2}));
    }
}

TEST(Synth, ForegroundIsBrighterOnAverage) {
    double fg = 0, bg = 0;
    std::size_t nf = 0, nb = 0;
    for (std::uint64_t id = 0; id < 10; ++id) {
        const auto s = synth::generate_sample(6, id, 64, 64);
        for (std::size_t i = 0; i < s.mask.labels.size(); ++i) {
            (s.mask.labels[i] ? fg : bg) += s.image.pixels[i];
            ++(s.mask.labels[i] ? nf : nb);
        }
    }
    EXPECT_GT(fg / nf, bg / nb);
}

TEST(Synth, RejectsBadSize) {
    EXPECT_THROW(synth::generate_sample(0, 0, 30, 64), ContractError);
}

TEST(Pgm, RoundTripAndQuantization) {
    const auto dir = scratch("pgm");
    fs::create_directories(dir);
    const auto s = synth::generate_sample(2, 0, 32, 48);
    data::write_pgm(dir / "a.pgm", {48, 32, data::quantize(s.image)});
    EXPECT_EQ(fs::file_size(dir / "a.pgm"), std::string("P5\n48 32\n255\n").size() + 32 * 48);
    const auto back = data::read_pgm(dir / "a.pgm");
    const auto img = data::dequantize(back.height, back.width, back.bytes);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_LE(std::abs(img.pixels[i] - s.image.pixels[i]), 1.0 / 510 + 1e-7);
    fs::remove_all(dir);
}

TEST(Pgm, ErrorsNameThePath) {
    const auto dir = scratch("pgmbad");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\nabc";
    }
    try {
        data::read_pgm(dir / "short.pgm");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("short.pgm"), std::string::npos);
    }
    EXPECT_THROW(data::read_pgm(dir / "missing.pgm"), IoError);
    fs::remove_all(dir);
}

TEST(Dataset, CountsFromFraction) {
    const auto dir = scratch("counts");
    data::GenerateOptions o = small_options();
    o.n_total = 50;
    o.labeled_fraction = 0.08;
    const auto m = data::generate_dataset(o, dir);
    EXPECT_EQ(m.labeled, 4u);
    EXPECT_EQ(m.unlabeled, 46u);
    EXPECT_EQ(m.indices("train", true).size(), 4u);
    EXPECT_EQ(m.indices("train").size(), 50u);
    EXPECT_EQ(m.indices("val").size(), 3u);
    EXPECT_EQ(m.indices("test").size(), 4u);
    o.labeled_fraction = 0.0;
    EXPECT_THROW(data::generate_dataset(o, dir / "zero"), ContractError);
    fs::remove_all(dir);
}

TEST(Dataset, ManifestRoundTripAndFileSizes) {
    const auto dir = scratch("roundtrip");
    const auto m = data::generate_dataset(small_options(), dir);
    const auto back = data::read_manifest(dir / "manifest.txt");
    EXPECT_TRUE(back.same_content(m));
    EXPECT_EQ(back.entries, m.entries);
    for (const auto& e : m.entries) {
        for (const auto& rel : {std::optional<std::string>(e.image), e.mask}) {
            if (!rel) continue;
            const auto p = data::read_pgm(dir / *rel);
            EXPECT_EQ(p.bytes.size(), m.height * m.width);
        }
    }
    fs::remove_all(dir);
}

TEST(Dataset, RegenerationIsIdentical) {
    const auto a = scratch("regen_a"), b = scratch("regen_b");
    data::generate_dataset(small_options(), a);
    data::generate_dataset(small_options(), b);
    EXPECT_EQ(tree_contents(a), tree_contents(b));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Dataset, LoadBatchRespectsLabels) {
    const auto dir = scratch("load");
    const auto m = data::generate_dataset(small_options(), dir);
    const auto unl = m.indices("train");
    std::vector<std::size_t> unlabeled_ids;
    for (auto i : unl)
        if (!m.entries[i].mask) unlabeled_ids.push_back(i);
    ASSERT_FALSE(unlabeled_ids.empty());

    std::vector<fs::path> opened;
    data::set_open_observer([&](const fs::path& p) { opened.push_back(p); });
    const auto batch = data::load_batch(m, std::span(unlabeled_ids).first(2), false);
    data::set_open_observer(nullptr);
    for (const auto& s : batch) {
        EXPECT_FALSE(s.labeled);
        EXPECT_FALSE(s.mask);
    }
    for (const auto& p : opened) EXPECT_EQ(p.string().find("mask"), std::string::npos) << p;
    EXPECT_THROW(data::load_batch(m, std::span(unlabeled_ids).first(1), true), ContractError);

    const auto lab = m.indices("train", true);
    const auto loaded = data::load_batch(m, lab, true);
    std::vector<Image> imgs;
    for (const auto& s : loaded) {
        EXPECT_TRUE(s.mask);
        imgs.push_back(s.image);
    }
    EXPECT_EQ(model::batch_tensor<float>(imgs, 3).shape, (Shape{lab.size(), 3, 32, 32}));

    // Generated samples survive the 8-bit encode within half a quantization step.
    const auto& first = loaded.front();
    const auto original = synth::generate_sample(m.seed, first.index, 32, 32);
    for (std::size_t i = 0; i < first.image.pixels.size(); ++i)
        EXPECT_LE(std::abs(first.image.pixels[i] - original.image.pixels[i]), 1.0 / 510 + 1e-7);
    EXPECT_EQ(*first.mask, original.mask);
    fs::remove_all(dir);
}

TEST(Dataset, HiddenMasksAreNotInManifest) {
    const auto dir = scratch("hidden");
    const auto m = data::generate_dataset(small_options(), dir);
    std::ifstream f(dir / "manifest.txt");
    const std::string text((std::istreambuf_iterator<char>(f)), {});
    EXPECT_EQ(text.find("hidden"), std::string::npos);
    for (auto i : m.indices("train"))
        if (!m.entries[i].mask) EXPECT_TRUE(fs::exists(data::hidden_mask_path(m, i)));
    fs::remove_all(dir);
}

TEST(Manifest, RejectsCorruptHeader) {
    const auto dir = scratch("corrupt");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "manifest.txt") << "seed=1\nwidth=32\nheight=32\nclasses=2\nlabeled=5\nunlabeled=0\n"
                                               "train\timages/a.pgm\tUNLABELED\n";
    }
    EXPECT_ANY_THROW(data::read_manifest(dir / "manifest.txt"));
    fs::remove_all(dir);
}
