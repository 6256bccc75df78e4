#include "hdc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <zlib.h>

#include "hdc/errors.hpp"

namespace hdc::ckpt {

namespace {

std::uint32_t crc(std::string_view s) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

class Writer {
  public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string& bytes() { return out_; }

  private:
    std::string out_;
};

class Reader {
  public:
    Reader(std::string_view data, std::uint64_t base) : d_(data), base_(base) {}

    std::uint64_t offset() const { return base_ + pos_; }
    void need(std::uint64_t n, const char* what) const {
        if (d_.size() - pos_ < n) {
            throw FormatError(std::string("truncated ") + what, offset());
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(d_[pos_++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= std::uint32_t(static_cast<std::uint8_t>(d_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= std::uint64_t(static_cast<std::uint8_t>(d_[pos_++])) << (8 * i);
        }
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(d_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == d_.size(); }

  private:
    std::string_view d_;
    std::uint64_t base_;
    std::size_t pos_ = 0;
};

std::string encode_payload(const Section& s) {
    if (s.kind == Section::Kind::text) {
        return s.text;
    }
    Writer w;
    w.u32(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) {
        w.str(t.name);
        w.u32(static_cast<std::uint32_t>(t.value.rank()));
        for (const auto d : t.value.shape) {
            w.u32(static_cast<std::uint32_t>(d));
        }
        for (const float v : t.value.data) {
            w.f32(v);
        }
    }
    return std::move(w.bytes());
}

std::vector<NamedTensor> decode_tensors(std::string_view payload, std::uint64_t base) {
    Reader r(payload, base);
    const std::uint32_t count = r.u32("tensor count");
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.str("tensor name");
        const std::uint32_t rank = r.u32("tensor rank");
        if (rank > 8) {
            throw FormatError("tensor '" + t.name + "' has implausible rank " + std::to_string(rank), r.offset());
        }
        Shape shape;
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            shape.push_back(r.u32("tensor dims"));
            n *= shape.back();
        }
        r.need(n * 4, "tensor payload");
        Tensor<float> v(shape);
        for (auto& x : v.data) {
            x = r.f32("tensor payload");
        }
        t.value = std::move(v);
        out.push_back(std::move(t));
    }
    if (!r.done()) {
        throw FormatError("trailing bytes in tensor section", r.offset());
    }
    return out;
}

}  // namespace

const Section& Checkpoint::get(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) {
            return s;
        }
    }
    throw FormatError("checkpoint has no section '" + name + "'", 0);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) {
            return true;
        }
    }
    return false;
}

std::string encode(const Checkpoint& c) {
    std::vector<std::string> payloads;
    for (const auto& s : c.sections) {
        payloads.push_back(encode_payload(s));
    }
    std::uint64_t header = 4 + 4 + 4 + 4;  // magic, version, count, header CRC
    for (const auto& s : c.sections) {
        header += 4 + s.name.size() + 1 + 8 + 8;
    }
    Writer w;
    w.raw("HDC1");
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(c.sections.size()));
    std::uint64_t offset = header;
    for (std::size_t i = 0; i < c.sections.size(); ++i) {
        w.str(c.sections[i].name);
        w.u8(static_cast<std::uint8_t>(c.sections[i].kind));
        w.u64(offset);
        w.u64(payloads[i].size());
        offset += payloads[i].size() + 4;
    }
    w.u32(crc(w.bytes()));
    for (const auto& p : payloads) {
        w.raw(p);
        w.u32(crc(p));
    }
    return std::move(w.bytes());
}

Checkpoint decode(std::string_view bytes) {
    Reader r(bytes, 0);
    r.need(4, "magic");
    if (bytes.substr(0, 4) != "HDC1") {
        throw FormatError("bad magic (expected HDC1)", 0);
    }
    Reader h(bytes.substr(4), 4);
    const std::uint32_t version = h.u32("version");
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const std::uint32_t count = h.u32("section count");
    struct Entry {
        std::string name;
        Section::Kind kind;
        std::uint64_t offset, size;
    };
    std::vector<Entry> table;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = h.str("section name");
        const std::uint8_t kind = h.u8("section kind");
        if (kind > 1) {
            throw FormatError("unknown section kind " + std::to_string(kind), h.offset() - 1);
        }
        e.kind = static_cast<Section::Kind>(kind);
        e.offset = h.u64("section offset");
        e.size = h.u64("section size");
        table.push_back(std::move(e));
    }
    const std::uint64_t header_end = h.offset();
    const std::uint32_t stored = h.u32("header checksum");
    if (stored != crc(bytes.substr(0, header_end))) {
        throw FormatError("header checksum mismatch", header_end);
    }
    Checkpoint c;
    // Payloads follow the header back to back, each trailed by its checksum.
    std::uint64_t expected = header_end + 4;
    for (const auto& e : table) {
        if (e.offset != expected) {
            throw FormatError("section '" + e.name + "' is not where the table says it should be", e.offset);
        }
        if (e.offset > bytes.size() || bytes.size() - e.offset < e.size + 4 || e.size > bytes.size()) {
            throw FormatError("section '" + e.name + "' extends past end of file", std::min<std::uint64_t>(e.offset, bytes.size()));
        }
        const std::string_view payload = bytes.substr(e.offset, e.size);
        Reader tail(bytes.substr(e.offset + e.size, 4), e.offset + e.size);
        if (tail.u32("section checksum") != crc(payload)) {
            throw FormatError("checksum mismatch in section '" + e.name + "'", e.offset);
        }
        Section s;
        s.name = e.name;
        s.kind = e.kind;
        if (e.kind == Section::Kind::text) {
            s.text = std::string(payload);
        } else {
            s.tensors = decode_tensors(payload, e.offset);
        }
        c.sections.push_back(std::move(s));
        expected = e.offset + e.size + 4;
    }
    if (expected != bytes.size()) {
        throw FormatError("trailing bytes after the last section", expected);
    }
    return c;
}

void save(const Checkpoint& c, const std::filesystem::path& path) {
    const std::string bytes = encode(c);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError(tmp.string() + ": cannot open for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError(tmp.string() + ": write failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError(path.string() + ": " + ec.message());
    }
}

Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string() + ": cannot open checkpoint");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode(ss.str());
}

}  // namespace hdc::ckpt
