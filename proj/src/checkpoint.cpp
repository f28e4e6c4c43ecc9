#include "hcl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "hcl/error.hpp"

namespace hcl {
namespace {

constexpr char kMagic[8] = {'H', 'C', 'L', 'C', 'K', 'P', 'T', '1'};

class Writer {
public:
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void block(std::span<const double> values) {
        u64(values.size());
        for (double v : values) f64(v);
    }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::vector<double> block(std::size_t expected, const char* name) {
        const auto n = u64();
        if (n != expected)
            throw DataError(std::string("checkpoint block ") + name + " has unexpected size");
        std::vector<double> out(n);
        for (double& v : out) v = f64();
        return out;
    }
    void magic() {
        need(sizeof kMagic);
        if (std::memcmp(buf_.data(), kMagic, sizeof kMagic) != 0)
            throw DataError("not a checkpoint file (bad magic)");
        pos_ += sizeof kMagic;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw DataError("truncated checkpoint");
    }
    std::string buf_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Matrix to_matrix(std::vector<double> values, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.flat().begin());
    return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto& enc = ckpt.encoder;
    const auto& d = enc.dims();
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u64(kCheckpointVersion);
    w.u64(enc.seed());
    w.u64(enc.normalizes() ? 1 : 0);
    w.u64(d.d_in);
    w.u64(d.d_mid);
    w.u64(d.d_h1);
    w.u64(d.d_out);
    w.block(enc.backbone().flat());
    for (const auto& b : enc.head().blocks()) w.block(b.values);

    const auto& opt = ckpt.optimizer;
    w.u64(opt.steps());
    w.f64(opt.config().learning_rate);
    w.f64(opt.config().beta1);
    w.f64(opt.config().beta2);
    w.f64(opt.config().epsilon);
    w.u64(opt.first_moments().size());
    for (std::size_t b = 0; b < opt.first_moments().size(); ++b) {
        w.block(opt.first_moments()[b]);
        w.block(opt.second_moments()[b]);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));

    nlohmann::json side{{"version", kCheckpointVersion},
                        {"seed", enc.seed()},
                        {"normalize_embeddings", enc.normalizes()},
                        {"dims", {{"d_in", d.d_in}, {"d_mid", d.d_mid}, {"d_h1", d.d_h1}, {"d_out", d.d_out}}},
                        {"optimizer_steps", opt.steps()},
                        {"payload_fnv1a64", fnv1a(w.bytes())},
                        {"metadata", ckpt.metadata}};
    std::ofstream meta(path.string() + ".json");
    if (!meta) throw DataError("cannot write checkpoint sidecar for " + path.string());
    meta << side.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Reader r(ss.str());
    r.magic();
    if (r.u64() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    const std::uint64_t seed = r.u64();
    const bool normalize = r.u64() != 0;
    EncoderDims d;
    d.d_in = r.u64();
    d.d_mid = r.u64();
    d.d_h1 = r.u64();
    d.d_out = r.u64();
    Matrix backbone = to_matrix(r.block(d.d_in * d.d_mid, "backbone"), d.d_in, d.d_mid);
    HeadParams head;
    head.w1 = to_matrix(r.block(d.d_mid * d.d_h1, "w1"), d.d_mid, d.d_h1);
    head.b1 = to_matrix(r.block(d.d_h1, "b1"), 1, d.d_h1);
    head.w2 = to_matrix(r.block(d.d_h1 * d.d_out, "w2"), d.d_h1, d.d_out);
    head.b2 = to_matrix(r.block(d.d_out, "b2"), 1, d.d_out);
    Checkpoint ckpt;
    ckpt.encoder = Encoder(d, seed, normalize, std::move(backbone), std::move(head));

    const std::uint64_t steps = r.u64();
    AdamConfig cfg;
    cfg.learning_rate = r.f64();
    cfg.beta1 = r.f64();
    cfg.beta2 = r.f64();
    cfg.epsilon = r.f64();
    ckpt.optimizer = make_head_optimizer(ckpt.encoder, cfg);
    const auto blocks = r.u64();
    if (blocks != ckpt.optimizer.first_moments().size())
        throw DataError("checkpoint optimizer block count mismatch");
    std::vector<std::vector<double>> m, v;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        const auto n = ckpt.optimizer.first_moments()[b].size();
        m.push_back(r.block(n, "adam_m"));
        v.push_back(r.block(n, "adam_v"));
    }
    ckpt.optimizer.restore(steps, std::move(m), std::move(v));

    std::ifstream meta(path.string() + ".json");
    if (meta) {
        try {
            ckpt.metadata = nlohmann::json::parse(meta).value("metadata", nlohmann::json::object());
        } catch (const nlohmann::json::exception&) {
            ckpt.metadata = nlohmann::json::object();
        }
    }
    return ckpt;
}

}  // namespace hcl
