#include "streamnet/data_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "streamnet/rng.hpp"

namespace streamnet {
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void raw(const std::string& s) { buf_.append(s); }
    const std::string& bytes() const noexcept { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& buf, std::size_t begin, std::size_t end, std::string what)
        : buf_(buf), pos_(begin), end_(end), what_(std::move(what)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return end_ - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > end_ - pos_) {
            throw FormatError(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " +
                              std::to_string(n) + " more bytes, " + std::to_string(end_ - pos_) + " left)");
        }
    }

    const std::string& buf_;
    std::size_t pos_;
    std::size_t end_;
    std::string what_;
};

std::uint64_t fnv1a(const char* data, std::size_t size) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr char kCheckpointMagic[9] = "SNETCKPT";
constexpr char kDumpMagic[9] = "SNTDUMP1";

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("malformed spec line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::uint64_t parse_u64(const std::string& s) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw FormatError("not an unsigned integer: '" + s + "'");
    return v;
}

} // namespace

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------

Dataset read_cifar10_batch(const fs::path& file, Split split) {
    const std::string bytes = read_file(file);
    if (bytes.size() % kCifarRecordBytes != 0) {
        const std::size_t offset = bytes.size() - bytes.size() % kCifarRecordBytes;
        throw FormatError("'" + file.string() + "': truncated record at byte offset " + std::to_string(offset) +
                          " (file size " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(kCifarRecordBytes) + ")");
    }
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    Dataset d;
    d.split = split;
    d.n_classes = 10;
    d.images = Tensor(Shape{n, 3, 32, 32});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t offset = i * kCifarRecordBytes;
        const auto label = static_cast<unsigned char>(bytes[offset]);
        if (label > 9) {
            throw FormatError("'" + file.string() + "': label " + std::to_string(label) + " at byte offset " +
                              std::to_string(offset) + " outside [0, 9]");
        }
        d.labels[i] = label;
        auto dst = d.images.item(i);
        for (std::size_t p = 0; p < kCifarImageBytes; ++p) {
            dst[p] = static_cast<double>(static_cast<unsigned char>(bytes[offset + 1 + p])) / 255.0;
        }
    }
    return d;
}

namespace {
Dataset concat_datasets(const std::vector<Dataset>& parts, Split split) {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    Dataset out;
    out.split = split;
    out.n_classes = parts.empty() ? 0 : parts.front().n_classes;
    const Shape s = parts.front().images.shape();
    out.images = Tensor(Shape{n, s.c, s.h, s.w});
    std::size_t at = 0;
    for (const auto& p : parts) {
        std::copy(p.images.data().begin(), p.images.data().end(), out.images.data().begin() + static_cast<std::ptrdiff_t>(at));
        at += p.images.size();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}
} // namespace

std::pair<Dataset, Dataset> load_cifar10(const fs::path& dir, const CifarOptions& options) {
    std::vector<Dataset> train_parts;
    for (int b = 1; b <= 5; ++b) {
        const fs::path f = dir / ("data_batch_" + std::to_string(b) + ".bin");
        if (!fs::exists(f)) throw FormatError("missing CIFAR-10 batch '" + f.string() + "'");
        train_parts.push_back(read_cifar10_batch(f, Split::train));
    }
    const fs::path test_file = dir / "test_batch.bin";
    if (!fs::exists(test_file)) throw FormatError("missing CIFAR-10 batch '" + test_file.string() + "'");
    Dataset train = concat_datasets(train_parts, Split::train);
    Dataset test = read_cifar10_batch(test_file, Split::test);
    if (options.train_limit > 0) train = stratified_subset(train, options.train_limit, derive_seed(options.subset_seed, {0}));
    if (options.test_limit > 0) test = stratified_subset(test, options.test_limit, derive_seed(options.subset_seed, {1}));
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

void write_raw_dump(const fs::path& path, const Dataset& data, bool float32) {
    ByteWriter w;
    w.raw(std::string(kDumpMagic, 8));
    w.u32(float32 ? 1 : 2);
    w.u32(static_cast<std::uint32_t>(data.n_classes));
    const Shape& s = data.images.shape();
    w.u64(s.n);
    w.u64(s.c);
    w.u64(s.h);
    w.u64(s.w);
    for (double v : data.images.data()) {
        if (float32) {
            w.f32(static_cast<float>(v));
        } else {
            w.f64(v);
        }
    }
    if (data.n_classes > 0) {
        for (int l : data.labels) w.u32(static_cast<std::uint32_t>(l));
    }
    write_file_atomic(path, w.bytes());
}

Dataset read_raw_dump(const fs::path& path, Split split) {
    const std::string bytes = read_file(path);
    const std::string what = "raw dump '" + path.string() + "'";
    if (bytes.size() < 8 || bytes.compare(0, 8, kDumpMagic, 8) != 0) {
        throw FormatError(what + ": bad magic at byte offset 0");
    }
    ByteReader r(bytes, 8, bytes.size(), what);
    const std::uint32_t dtype = r.u32();
    if (dtype != 1 && dtype != 2) {
        throw FormatError(what + ": unknown dtype " + std::to_string(dtype) + " at byte offset 8");
    }
    Dataset d;
    d.split = split;
    d.n_classes = r.u32();
    Shape s;
    s.n = r.u64();
    s.c = r.u64();
    s.h = r.u64();
    s.w = r.u64();
    const std::size_t value_bytes = dtype == 1 ? 4 : 8;
    const std::size_t need = s.size() * value_bytes + (d.n_classes > 0 ? 4 * s.n : 0);
    if (r.remaining() != need) {
        throw FormatError(what + ": payload at byte offset " + std::to_string(r.pos()) + " holds " +
                          std::to_string(r.remaining()) + " bytes, header implies " + std::to_string(need));
    }
    d.images = Tensor(s);
    for (double& v : d.images.data()) v = dtype == 1 ? static_cast<double>(r.f32()) : r.f64();
    if (d.n_classes > 0) {
        d.labels.resize(s.n);
        for (auto& l : d.labels) l = static_cast<int>(r.u32());
    } else {
        d.labels.assign(s.n, 0);
        d.n_classes = 1;
    }
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------

namespace {

struct Rect {
    std::size_t y0, x0, y1, x1;  // half-open
};

std::vector<Rect> class_shape(std::uint64_t seed, std::size_t cls, std::size_t size) {
    Rng rng(derive_seed(seed, {0x5ea9eULL, cls}));
    std::vector<Rect> rects;
    const std::size_t margin = size / 8;
    const std::size_t span = size - 2 * margin;
    for (int i = 0; i < 3; ++i) {
        const std::size_t h = 3 + rng.below(std::max<std::size_t>(span / 3, 1));
        const std::size_t w = 3 + rng.below(std::max<std::size_t>(span / 3, 1));
        const std::size_t y = margin + rng.below(span - std::min(h, span - 1));
        const std::size_t x = margin + rng.below(span - std::min(w, span - 1));
        rects.push_back(Rect{y, x, std::min(y + h, size - margin), std::min(x + w, size - margin)});
    }
    return rects;
}

void render_synthetic(Tensor& images, std::size_t item, const std::vector<Rect>& shape, std::size_t cls,
                      std::size_t n_classes, Rng& rng) {
    const Shape& s = images.shape();
    const double pi = 3.141592653589793;
    // Smooth background: a base level plus two random plane waves, clipped to [0, 1].
    const double base = rng.uniform(0.2, 0.8);
    const double a1 = rng.uniform(0.15, 0.45);
    const double a2 = rng.uniform(0.05, 0.25);
    const double f1 = rng.uniform(0.5, 2.0) * 2.0 * pi / static_cast<double>(s.h);
    const double f2 = rng.uniform(0.5, 3.0) * 2.0 * pi / static_cast<double>(s.w);
    const double t1 = rng.uniform(0.0, pi);
    const double t2 = rng.uniform(0.0, pi);
    const double p1 = rng.uniform(0.0, 2.0 * pi);
    const double p2 = rng.uniform(0.0, 2.0 * pi);
    std::vector<double> tint(s.c);
    for (auto& t : tint) t = rng.uniform(-0.05, 0.05);

    const double band_width = 1.0 / static_cast<double>(n_classes);
    const double lo = band_width * static_cast<double>(cls) + 0.2 * band_width;
    const double hi = band_width * static_cast<double>(cls) + 0.8 * band_width;
    const auto dy = static_cast<std::ptrdiff_t>(rng.below(3)) - 1;
    const auto dx = static_cast<std::ptrdiff_t>(rng.below(3)) - 1;

    for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
            bool inside = false;
            for (const Rect& r : shape) {
                const auto yy = static_cast<std::ptrdiff_t>(y) - dy;
                const auto xx = static_cast<std::ptrdiff_t>(x) - dx;
                if (yy >= static_cast<std::ptrdiff_t>(r.y0) && yy < static_cast<std::ptrdiff_t>(r.y1) &&
                    xx >= static_cast<std::ptrdiff_t>(r.x0) && xx < static_cast<std::ptrdiff_t>(r.x1)) {
                    inside = true;
                    break;
                }
            }
            const double fy = static_cast<double>(y);
            const double fx = static_cast<double>(x);
            const double field = base + a1 * std::sin(f1 * (fy * std::cos(t1) + fx * std::sin(t1)) + p1) +
                                 a2 * std::sin(f2 * (fy * std::cos(t2) + fx * std::sin(t2)) + p2);
            for (std::size_t c = 0; c < s.c; ++c) {
                double v = inside ? rng.uniform(lo, hi) : field + tint[c] + 0.02 * rng.normal();
                images.at(item, c, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
}

Dataset synthesize_split(const SyntheticSpec& spec, std::size_t per_class, Split split,
                         const std::vector<std::vector<Rect>>& shapes) {
    Dataset d;
    d.split = split;
    d.n_classes = spec.n_classes;
    const std::size_t n = per_class * spec.n_classes;
    d.images = Tensor(Shape{n, spec.channels, spec.size, spec.size});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % spec.n_classes;
        d.labels[i] = static_cast<int>(cls);
        Rng rng(derive_seed(spec.seed, {split == Split::train ? 1ULL : 2ULL, i}));
        render_synthetic(d.images, i, shapes[cls], cls, spec.n_classes, rng);
    }
    return d;
}

} // namespace

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_classes < 2 || spec.size < 8 || spec.channels == 0) {
        throw Error("generate_synthetic: need >= 2 classes, size >= 8 and at least one channel");
    }
    std::vector<std::vector<Rect>> shapes;
    for (std::size_t k = 0; k < spec.n_classes; ++k) shapes.push_back(class_shape(spec.seed, k, spec.size));
    return {synthesize_split(spec, spec.train_per_class, Split::train, shapes),
            synthesize_split(spec, spec.test_per_class, Split::test, shapes)};
}

// ---------------------------------------------------------------------------

std::string network_spec_to_text(const NetworkSpec& spec) {
    std::ostringstream os;
    os << "vertex=" << vertex_name(spec.vertex) << '\n'
       << "n_streams=" << spec.n_streams << '\n'
       << "width_multiplier=" << spec.width_multiplier << '\n';
    os << "slices=";
    if (spec.slice_spec) {
        for (std::size_t i = 0; i < spec.slice_spec->boundaries.size(); ++i) {
            os << (i ? "," : "") << format_double(spec.slice_spec->boundaries[i]);
        }
    }
    os << '\n'
       << "membership=" << (spec.membership == SliceMembership::per_channel ? "per_channel" : "luminance") << '\n'
       << "n_classes=" << spec.n_classes << '\n'
       << "conv5_filters=" << spec.conv5_filters << '\n'
       << "fc_hidden=" << spec.fc_hidden << '\n'
       << "fc_layers=" << spec.fc_layers << '\n'
       << "base_filters=" << spec.base_filters[0] << ',' << spec.base_filters[1] << ',' << spec.base_filters[2]
       << ',' << spec.base_filters[3] << '\n'
       << "filter_divisor=" << spec.filter_divisor << '\n'
       << "same_padding=" << (spec.same_padding ? 1 : 0) << '\n'
       << "in_channels=" << spec.in_channels << '\n'
       << "in_height=" << spec.in_height << '\n'
       << "in_width=" << spec.in_width << '\n'
       << "seed=" << spec.seed << '\n';
    return os.str();
}

NetworkSpec network_spec_from_text(const std::string& text) {
    auto kv = parse_kv_text(text);
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("network spec is missing '" + key + "'");
        return it->second;
    };
    NetworkSpec s;
    s.vertex = parse_vertex(take("vertex"));
    s.n_streams = parse_u64(take("n_streams"));
    s.width_multiplier = parse_u64(take("width_multiplier"));
    const std::string slices = take("slices");
    if (!slices.empty()) {
        SliceSpec ss;
        std::stringstream is(slices);
        std::string tok;
        while (std::getline(is, tok, ',')) ss.boundaries.push_back(parse_double(tok));
        s.slice_spec = ss;
    }
    const std::string membership = take("membership");
    if (membership == "per_channel") {
        s.membership = SliceMembership::per_channel;
    } else if (membership == "luminance") {
        s.membership = SliceMembership::luminance;
    } else {
        throw FormatError("unknown slice membership '" + membership + "'");
    }
    s.n_classes = parse_u64(take("n_classes"));
    s.conv5_filters = parse_u64(take("conv5_filters"));
    s.fc_hidden = parse_u64(take("fc_hidden"));
    s.fc_layers = parse_u64(take("fc_layers"));
    {
        std::stringstream is(take("base_filters"));
        std::string tok;
        std::size_t i = 0;
        while (std::getline(is, tok, ',')) {
            if (i == 4) throw FormatError("base_filters holds more than 4 counts");
            s.base_filters[i++] = parse_u64(tok);
        }
        if (i != 4) throw FormatError("base_filters holds fewer than 4 counts");
    }
    s.filter_divisor = parse_u64(take("filter_divisor"));
    s.same_padding = parse_u64(take("same_padding")) != 0;
    s.in_channels = parse_u64(take("in_channels"));
    s.in_height = parse_u64(take("in_height"));
    s.in_width = parse_u64(take("in_width"));
    s.seed = parse_u64(take("seed"));
    return s;
}

void save_checkpoint(const fs::path& path, const Network& net, const AdamState* adam, const CheckpointMeta& meta) {
    ByteWriter body;
    body.str(network_spec_to_text(net.spec()));
    body.u64(meta.seed);
    body.str(meta.config_text);
    const auto params = net.params();
    body.u64(params.size());
    for (const ParamTensor* p : params) {
        body.str(p->id);
        const Shape& s = p->value.shape();
        body.u64(s.n);
        body.u64(s.c);
        body.u64(s.h);
        body.u64(s.w);
        for (double v : p->value.data()) body.f64(v);
    }
    body.u8(adam != nullptr ? 1 : 0);
    if (adam != nullptr) {
        body.f64(adam->config.lr);
        body.f64(adam->config.beta1);
        body.f64(adam->config.beta2);
        body.f64(adam->config.epsilon);
        body.u64(adam->t);
        body.u64(adam->moments.size());
        for (const auto& [id, mo] : adam->moments) {
            body.str(id);
            body.u64(mo.m.size());
            for (double v : mo.m.data()) body.f64(v);
            for (double v : mo.v.data()) body.f64(v);
        }
    }
    body.u8(meta.progress ? 1 : 0);
    if (meta.progress) {
        body.u64(meta.progress->epochs_completed);
        body.u64(meta.progress->logs.size());
        for (const TrainingLog& log : meta.progress->logs) {
            body.str(log.tag);
            body.u64(log.rows.size());
            for (const LogRow& r : log.rows) {
                body.f64(r.epoch);
                body.f64(r.train_loss);
                body.f64(r.clean_acc);
                body.f64(r.noisy_acc);
                body.f64(r.wall_ms);
            }
        }
    }
    ByteWriter file;
    file.raw(std::string(kCheckpointMagic, 8));
    file.u32(kCheckpointVersion);
    file.u64(body.bytes().size());
    file.raw(body.bytes());
    file.u64(fnv1a(body.bytes().data(), body.bytes().size()));
    write_file_atomic(path, file.bytes());
}

Checkpoint load_checkpoint(const fs::path& path) {
    const std::string bytes = read_file(path);
    const std::string what = "checkpoint '" + path.string() + "'";
    if (bytes.size() < 20 || bytes.compare(0, 8, kCheckpointMagic, 8) != 0) {
        throw FormatError(what + ": not a checkpoint (bad magic or shorter than the header)");
    }
    ByteReader header(bytes, 8, bytes.size(), what);
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(what + ": version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t body_len = header.u64();
    const std::size_t body_begin = header.pos();
    if (body_len > bytes.size() - body_begin || bytes.size() - body_begin - body_len != 8) {
        throw FormatError(what + ": checksum failure, file is truncated or has trailing bytes (" +
                          std::to_string(bytes.size()) + " bytes on disk)");
    }
    ByteReader tail(bytes, body_begin + body_len, bytes.size(), what);
    const std::uint64_t stored = tail.u64();
    if (stored != fnv1a(bytes.data() + body_begin, body_len)) {
        throw FormatError(what + ": checksum failure, contents are corrupted");
    }

    ByteReader r(bytes, body_begin, body_begin + body_len, what);
    Network net(network_spec_from_text(r.str()));
    CheckpointMeta meta;
    meta.seed = r.u64();
    meta.config_text = r.str();
    const std::uint64_t n_params = r.u64();
    auto params = net.params();
    if (n_params != params.size()) {
        throw FormatError(what + ": holds " + std::to_string(n_params) + " parameters, spec builds " +
                          std::to_string(params.size()));
    }
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string id = r.str();
        Shape s;
        s.n = r.u64();
        s.c = r.u64();
        s.h = r.u64();
        s.w = r.u64();
        ParamTensor& p = net.param(id);
        if (p.value.shape() != s) {
            throw FormatError(what + ": parameter '" + id + "' has shape " + s.str() + ", expected " +
                              p.value.shape().str());
        }
        for (double& v : p.value.data()) v = r.f64();
    }
    std::optional<AdamState> adam;
    if (r.u8() != 0) {
        AdamState st;
        st.config.lr = r.f64();
        st.config.beta1 = r.f64();
        st.config.beta2 = r.f64();
        st.config.epsilon = r.f64();
        st.t = r.u64();
        const std::uint64_t count = r.u64();
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::string id = r.str();
            const Shape s = net.param(id).value.shape();
            if (r.u64() != s.size()) throw FormatError(what + ": optimizer state size mismatch for '" + id + "'");
            AdamMoments mo{Tensor(s), Tensor(s)};
            for (double& v : mo.m.data()) v = r.f64();
            for (double& v : mo.v.data()) v = r.f64();
            st.moments.emplace(id, std::move(mo));
        }
        adam = std::move(st);
    }
    if (r.u8() != 0) {
        TrainingProgress prog;
        prog.epochs_completed = r.u64();
        const std::uint64_t n_logs = r.u64();
        for (std::uint64_t i = 0; i < n_logs; ++i) {
            TrainingLog log;
            log.tag = r.str();
            const std::uint64_t rows = r.u64();
            for (std::uint64_t j = 0; j < rows; ++j) {
                LogRow row;
                row.epoch = r.f64();
                row.train_loss = r.f64();
                row.clean_acc = r.f64();
                row.noisy_acc = r.f64();
                row.wall_ms = r.f64();
                log.rows.push_back(row);
            }
            prog.logs.push_back(std::move(log));
        }
        meta.progress = std::move(prog);
    }
    return Checkpoint{std::move(net), std::move(adam), std::move(meta)};
}

// ---------------------------------------------------------------------------

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_ppm(const fs::path& path, const Tensor& images, std::size_t index) {
    const Shape& s = images.shape();
    if (s.c != 1 && s.c != 3) throw Error("write_ppm: need 1 or 3 channels, got " + std::to_string(s.c));
    if (index >= s.n) throw Error("write_ppm: item " + std::to_string(index) + " out of range");
    std::string out = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
    out.reserve(out.size() + 3 * s.h * s.w);
    for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                out.push_back(static_cast<char>(to_byte(images.at(index, s.c == 3 ? c : 0, y, x))));
            }
    write_file_atomic(path, out);
}

Tensor read_ppm(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    const std::string what = "PPM '" + path.string() + "'";
    if (next_token() != "P6") throw FormatError(what + ": only binary P6 images are supported");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = parse_u64(next_token());
        h = parse_u64(next_token());
        maxval = parse_u64(next_token());
    } catch (const std::exception&) {
        throw FormatError(what + ": malformed header");
    }
    if (maxval != 255 || w == 0 || h == 0) throw FormatError(what + ": expected 8-bit image with positive size");
    ++pos;  // single whitespace before the raster
    if (bytes.size() < pos + 3 * w * h) {
        throw FormatError(what + ": truncated raster at byte offset " + std::to_string(bytes.size()));
    }
    Tensor t(Shape{1, 3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                t.at(0, c, y, x) = static_cast<double>(static_cast<unsigned char>(bytes[pos++])) / 255.0;
            }
    return t;
}

} // namespace streamnet
