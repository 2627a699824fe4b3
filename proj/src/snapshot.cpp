#include "bgest/error.hpp"
#include "bgest/repset.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace bgest {

namespace {

constexpr std::array<char, 8> kMagic = {'B', 'G', 'E', 'S', 'T', 'S', 'N', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) { le(v, 4); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }

private:
    void le(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }

    [[noreturn]] void fail(const std::string& what) const {
        throw SnapshotError("snapshot '" + path_.string() + "': " + what);
    }

private:
    std::uint64_t le(int bytes) {
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            const int c = in_.get();
            if (c == std::char_traits<char>::eof()) fail("truncated");
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
        }
        return v;
    }
    std::ifstream& in_;
    const std::filesystem::path& path_;
};

}  // namespace

void save_snapshot(const ModelSnapshot& snapshot, const std::filesystem::path& path) {
    const SceneModel& m = snapshot.model;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WriteError("cannot open snapshot '" + path.string() + "' for writing");
    out.write(kMagic.data(), kMagic.size());
    Writer w(out);
    w.u32(kVersion);
    w.i32(m.frame_width);
    w.i32(m.frame_height);
    w.i32(m.grid.block_size);
    w.f64(m.fps);
    w.f64(m.thresholds.t1);
    w.f64(m.thresholds.t2);
    w.f64(m.thresholds.q31_mean);
    w.f64(m.thresholds.q31_std);
    w.u64(m.frames_ingested);
    for (const auto& set : m.sets) {
        w.u32(static_cast<std::uint32_t>(set.size()));
        for (const auto& rep : set.reps) {
            w.u64(rep.weight);
            w.f64(rep.variance);
            for (double v : rep.mean) w.f64(v);
        }
    }
    if (snapshot.background) {
        if (snapshot.background->size() != m.sets.size()) {
            throw ContractViolation("snapshot background has wrong node count");
        }
        w.u8(1);
        for (int idx : *snapshot.background) w.i32(idx);
    } else {
        w.u8(0);
    }
    if (!out) throw WriteError("failed writing snapshot '" + path.string() + "'");
}

ModelSnapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("cannot open snapshot '" + path.string() + "'");
    Reader r(in, path);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) r.fail("bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) r.fail("unsupported version " + std::to_string(version));

    const int width = r.i32();
    const int height = r.i32();
    const int block = r.i32();
    const double fps = r.f64();
    NoiseThresholds th;
    th.t1 = r.f64();
    th.t2 = r.f64();
    th.q31_mean = r.f64();
    th.q31_std = r.f64();
    if (width <= 0 || height <= 0 || block <= 0 || width < block || height < block) r.fail("bad geometry");

    ModelSnapshot snap;
    snap.model = SceneModel::create(width, height, block, fps, th);
    snap.model.frames_ingested = r.u64();
    const auto dim = static_cast<std::size_t>(snap.model.grid.label_dim());
    for (auto& set : snap.model.sets) {
        const std::uint32_t s = r.u32();
        if (s > snap.model.frames_ingested) r.fail("representative count exceeds frames ingested");
        set.reps.resize(s);
        for (auto& rep : set.reps) {
            rep.weight = r.u64();
            rep.variance = r.f64();
            rep.mean.resize(dim);
            for (auto& v : rep.mean) v = r.f64();
            if (rep.weight == 0) r.fail("zero-weight representative");
        }
    }
    if (r.u8() == 1) {
        std::vector<int> bg(snap.model.sets.size());
        for (std::size_t i = 0; i < bg.size(); ++i) {
            bg[i] = r.i32();
            if (bg[i] < -1 || bg[i] >= static_cast<int>(snap.model.sets[i].size())) r.fail("label index out of range");
        }
        snap.background = std::move(bg);
    }
    return snap;
}

}  // namespace bgest
