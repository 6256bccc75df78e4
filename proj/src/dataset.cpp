#include "hdc/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "hdc/errors.hpp"
#include "hdc/parallel.hpp"
#include "hdc/rng.hpp"
#include "hdc/synth.hpp"

namespace hdc::data {

namespace {

std::mutex observer_mutex;
OpenObserver observer;

void notify_open(const fs::path& p) {
    std::lock_guard lock(observer_mutex);
    if (observer) {
        observer(p);
    }
}

[[noreturn]] void io_fail(const fs::path& p, const std::string& why) {
    throw IoError(p.string() + ": " + why);
}

std::string read_file(const fs::path& p) {
    notify_open(p);
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        io_fail(p, "cannot open");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        io_fail(p, "cannot open for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        io_fail(p, "write failed");
    }
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::string& s, std::size_t& pos, const fs::path& p) {
    for (;;) {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        }
        if (pos < s.size() && s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') {
                ++pos;
            }
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
    }
    if (start == pos) {
        io_fail(p, "truncated PGM header");
    }
    return s.substr(start, pos - start);
}

std::size_t parse_size(const std::string& tok, const fs::path& p, const char* what) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit((unsigned char)c); })) {
        io_fail(p, std::string("bad PGM ") + what + " '" + tok + "'");
    }
    return std::stoul(tok);
}

std::string name_for(const std::string& split, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu.pgm", split.c_str(), k);
    return buf;
}

}  // namespace

void set_open_observer(OpenObserver obs) {
    std::lock_guard lock(observer_mutex);
    observer = std::move(obs);
}

void write_pgm(const fs::path& path, const Pgm& pgm) {
    if (pgm.bytes.size() != pgm.width * pgm.height) {
        throw ContractError("write_pgm: payload size does not match " + std::to_string(pgm.width) + "x" +
                            std::to_string(pgm.height));
    }
    std::string out = "P5\n" + std::to_string(pgm.width) + " " + std::to_string(pgm.height) + "\n255\n";
    out.append(pgm.bytes.begin(), pgm.bytes.end());
    write_file(path, out);
}

Pgm read_pgm(const fs::path& path) {
    const std::string s = read_file(path);
    std::size_t pos = 0;
    if (pgm_token(s, pos, path) != "P5") {
        io_fail(path, "not a binary PGM (magic P5 expected)");
    }
    Pgm pgm;
    pgm.width = parse_size(pgm_token(s, pos, path), path, "width");
    pgm.height = parse_size(pgm_token(s, pos, path), path, "height");
    if (parse_size(pgm_token(s, pos, path), path, "maxval") != 255) {
        io_fail(path, "only maxval 255 is supported");
    }
    if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos]))) {
        io_fail(path, "missing separator after PGM header");
    }
    ++pos;
    const std::size_t need = pgm.width * pgm.height;
    if (s.size() - pos != need) {
        io_fail(path, "payload has " + std::to_string(s.size() - pos) + " bytes, expected " + std::to_string(need));
    }
    pgm.bytes.assign(s.begin() + static_cast<std::ptrdiff_t>(pos), s.end());
    return pgm;
}

std::vector<std::uint8_t> quantize(const Image& img) {
    std::vector<std::uint8_t> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

Image dequantize(std::size_t height, std::size_t width, std::span<const std::uint8_t> bytes) {
    Image img(height, width);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
    }
    return img;
}

std::vector<std::size_t> Manifest::indices(const std::string& split, bool labeled_only) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].split == split && (!labeled_only || entries[i].mask)) {
            out.push_back(i);
        }
    }
    return out;
}

bool Manifest::same_content(const Manifest& o) const {
    return seed == o.seed && width == o.width && height == o.height && classes == o.classes &&
           labeled == o.labeled && unlabeled == o.unlabeled && entries == o.entries;
}

void write_manifest(const Manifest& m, const fs::path& path) {
    std::ostringstream out;
    out << "seed=" << m.seed << "\nwidth=" << m.width << "\nheight=" << m.height << "\nclasses=" << m.classes
        << "\nlabeled=" << m.labeled << "\nunlabeled=" << m.unlabeled << "\n";
    for (const auto& e : m.entries) {
        out << e.split << '\t' << e.image << '\t' << (e.mask ? *e.mask : std::string(kUnlabeled)) << '\n';
    }
    write_file(path, out.str());
}

Manifest read_manifest(const fs::path& path) {
    std::istringstream in(read_file(path));
    Manifest m;
    m.root = path.parent_path();
    std::map<std::string, std::string> header;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                io_fail(path, "line " + std::to_string(lineno) + ": expected key=value or a tab-separated record");
            }
            header[line.substr(0, eq)] = line.substr(eq + 1);
            continue;
        }
        const auto tab2 = line.find('\t', tab + 1);
        if (tab2 == std::string::npos) {
            io_fail(path, "line " + std::to_string(lineno) + ": record needs three fields");
        }
        ManifestEntry e;
        e.split = line.substr(0, tab);
        e.image = line.substr(tab + 1, tab2 - tab - 1);
        const std::string mask = line.substr(tab2 + 1);
        if (mask != kUnlabeled) {
            e.mask = mask;
        }
        if (e.split != "train" && e.split != "val" && e.split != "test") {
            io_fail(path, "line " + std::to_string(lineno) + ": unknown split '" + e.split + "'");
        }
        m.entries.push_back(std::move(e));
    }
    auto get = [&](const char* key) -> std::uint64_t {
        const auto it = header.find(key);
        if (it == header.end()) {
            io_fail(path, std::string("missing header key '") + key + "'");
        }
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            io_fail(path, std::string("bad value for '") + key + "'");
        }
    };
    m.seed = get("seed");
    m.width = get("width");
    m.height = get("height");
    m.classes = header.contains("classes") ? get("classes") : 2;
    m.labeled = get("labeled");
    m.unlabeled = get("unlabeled");
    std::size_t lab = 0, unl = 0;
    for (const auto& e : m.entries) {
        if (e.split == "train") {
            (e.mask ? lab : unl) += 1;
        } else if (!e.mask) {
            io_fail(path, e.split + " entry " + e.image + " has no mask");
        }
    }
    if (lab != m.labeled || unl != m.unlabeled) {
        io_fail(path, "header counts labeled=" + std::to_string(m.labeled) + " unlabeled=" +
                          std::to_string(m.unlabeled) + " disagree with records (" + std::to_string(lab) + ", " +
                          std::to_string(unl) + ")");
    }
    return m;
}

fs::path hidden_mask_path(const Manifest& m, std::size_t index) {
    return m.root / "hidden_masks" / fs::path(m.entries.at(index).image).filename();
}

Manifest generate_dataset(const GenerateOptions& opt, const fs::path& out_dir) {
    if (!(opt.labeled_fraction > 0.0 && opt.labeled_fraction <= 1.0)) {
        throw ContractError("labeled fraction must lie in (0, 1], got " + std::to_string(opt.labeled_fraction));
    }
    if (opt.n_total == 0) {
        throw ContractError("n_total must be positive");
    }
    const std::size_t m_lab =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(double(opt.n_total) * opt.labeled_fraction)));

    std::error_code ec;
    for (const char* sub : {"images", "masks", "hidden_masks"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec) {
            throw IoError((out_dir / sub).string() + ": " + ec.message());
        }
    }

    // Labeled subset of the training pool: a seeded Fisher-Yates shuffle, first M positions.
    std::vector<std::size_t> order(opt.n_total);
    std::iota(order.begin(), order.end(), 0);
    SeededRng split_rng = SeededRng(opt.seed).derive(0x5eed5);
    for (std::size_t i = opt.n_total; i > 1; --i) {
        std::swap(order[i - 1], order[split_rng.below(i)]);
    }
    std::vector<bool> is_labeled(opt.n_total, false);
    for (std::size_t i = 0; i < m_lab; ++i) {
        is_labeled[order[i]] = true;
    }

    Manifest m;
    m.root = out_dir;
    m.seed = opt.seed;
    m.width = opt.width;
    m.height = opt.height;
    m.classes = opt.classes;
    m.labeled = m_lab;
    m.unlabeled = opt.n_total - m_lab;

    struct Job {
        std::string split;
        std::size_t k;
        std::uint64_t id;
        bool labeled;
    };
    std::vector<Job> jobs;
    std::uint64_t id = 0;
    for (std::size_t k = 0; k < opt.n_total; ++k) {
        jobs.push_back({"train", k, id++, is_labeled[k]});
    }
    for (std::size_t k = 0; k < opt.val; ++k) {
        jobs.push_back({"val", k, id++, true});
    }
    for (std::size_t k = 0; k < opt.test; ++k) {
        jobs.push_back({"test", k, id++, true});
    }

    synth::SynthParams params;
    params.classes = opt.classes;
    m.entries.resize(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const synth::Sample s = synth::generate_sample(opt.seed, job.id, opt.height, opt.width, params);
        const std::string name = name_for(job.split, job.k);
        ManifestEntry e{job.split, "images/" + name, std::nullopt};
        write_pgm(out_dir / e.image, {opt.width, opt.height, quantize(s.image)});
        const Pgm mask{opt.width, opt.height, s.mask.labels};
        if (job.labeled) {
            e.mask = "masks/" + name;
            write_pgm(out_dir / *e.mask, mask);
        } else {
            write_pgm(out_dir / "hidden_masks" / name, mask);
        }
        m.entries[j] = std::move(e);
    });
    write_manifest(m, out_dir / "manifest.txt");
    return m;
}

std::vector<LoadedSample> load_batch(const Manifest& m, std::span<const std::size_t> indices, bool labeled_only) {
    std::vector<LoadedSample> out;
    out.reserve(indices.size());
    for (const std::size_t i : indices) {
        if (i >= m.entries.size()) {
            throw ContractError("load_batch: index " + std::to_string(i) + " out of range (" +
                                std::to_string(m.entries.size()) + " entries)");
        }
        const ManifestEntry& e = m.entries[i];
        if (labeled_only && !e.mask) {
            throw ContractError("load_batch: entry " + std::to_string(i) + " (" + e.image + ") is unlabeled");
        }
        const fs::path ip = m.root / e.image;
        const Pgm img = read_pgm(ip);
        if (img.width != m.width || img.height != m.height) {
            io_fail(ip, "size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " does not match manifest " + std::to_string(m.width) + "x" + std::to_string(m.height));
        }
        LoadedSample s;
        s.index = i;
        s.image = dequantize(img.height, img.width, img.bytes);
        if (e.mask) {
            const fs::path mp = m.root / *e.mask;
            const Pgm mask = read_pgm(mp);
            if (mask.width != m.width || mask.height != m.height) {
                io_fail(mp, "mask size does not match the manifest");
            }
            for (const auto v : mask.bytes) {
                if (v >= m.classes) {
                    io_fail(mp, "class index " + std::to_string(v) + " >= classes " + std::to_string(m.classes));
                }
            }
            LabelMap lm(mask.height, mask.width);
            lm.labels = mask.bytes;
            s.mask = std::move(lm);
            s.labeled = true;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace hdc::data
