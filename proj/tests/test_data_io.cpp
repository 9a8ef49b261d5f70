#include "doctest.h"
#include "test_support.hpp"

#include <filesystem>
#include <fstream>

#include "streamnet/data_io.hpp"

using namespace streamnet;
using namespace testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("streamnet_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream os(p, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// CIFAR-10 style records; pixel p of record i is (i * 7 + p) % 256, label i % 10.
std::string cifar_records(std::size_t n, std::size_t label_offset = 0) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<char>((i + label_offset) % 10));
        for (std::size_t p = 0; p < kCifarImageBytes; ++p) out.push_back(static_cast<char>((i * 7 + p) % 256));
    }
    return out;
}

bool same_params(const Network& a, const Network& b) {
    const auto pa = a.params();
    const auto pb = b.params();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i]->id != pb[i]->id || !(pa[i]->value == pb[i]->value)) return false;
    return true;
}

} // namespace

TEST_CASE("cifar batch decoding") {
    const fs::path dir = scratch("cifar");
    write_bytes(dir / "b.bin", cifar_records(4));
    const Dataset d = read_cifar10_batch(dir / "b.bin", Split::test);
    CHECK(d.size() == 4);
    CHECK(d.images.shape() == Shape{4, 3, 32, 32});
    CHECK(d.labels == std::vector<int>{0, 1, 2, 3});
    CHECK(d.split == Split::test);
    // Planar layout: channel-major, then row, then column.
    CHECK(d.images.at(1, 0, 0, 0) == doctest::Approx(7.0 / 255.0));
    CHECK(d.images.at(1, 1, 0, 0) == doctest::Approx(static_cast<double>((7 + 1024) % 256) / 255.0));
    CHECK(d.images.at(0, 0, 0, 255 % 32) == doctest::Approx(31.0 / 255.0));
    CHECK(d.images.at(0, 0, 7, 31) == 1.0);  // byte 255 maps exactly to 1
    CHECK_NOTHROW(d.validate());

    write_bytes(dir / "short.bin", cifar_records(3).substr(0, 2 * kCifarRecordBytes + 100));
    try {
        read_cifar10_batch(dir / "short.bin", Split::train);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset " + std::to_string(2 * kCifarRecordBytes)) != std::string::npos);
    }
    std::string bad = cifar_records(2);
    bad[kCifarRecordBytes] = 10;
    write_bytes(dir / "label.bin", bad);
    CHECK_THROWS_AS(read_cifar10_batch(dir / "label.bin", Split::train), FormatError);
    CHECK_THROWS_AS(read_cifar10_batch(dir / "missing.bin", Split::train), Error);
    fs::remove_all(dir);
}

TEST_CASE("cifar directory loading and stratified subsets") {
    const fs::path dir = scratch("cifar_dir");
    for (int b = 1; b <= 5; ++b) write_bytes(dir / ("data_batch_" + std::to_string(b) + ".bin"), cifar_records(20, b));
    CHECK_THROWS_AS(load_cifar10(dir), FormatError);  // test batch missing
    write_bytes(dir / "test_batch.bin", cifar_records(30));
    const auto [train, test] = load_cifar10(dir);
    CHECK(train.size() == 100);
    CHECK(test.size() == 30);
    for (std::size_t c : train.class_counts()) CHECK(c == 10);

    const auto [sub_train, sub_test] = load_cifar10(dir, CifarOptions{25, 10, 3});
    CHECK(sub_train.size() == 25);
    CHECK(sub_test.size() == 10);
    const auto counts = sub_train.class_counts();
    for (std::size_t k = 0; k < 10; ++k) CHECK(counts[k] == (k < 5 ? 3u : 2u));
    const auto again = load_cifar10(dir, CifarOptions{25, 10, 3});
    CHECK(again.first.images == sub_train.images);
    const auto other = load_cifar10(dir, CifarOptions{25, 10, 4});
    CHECK_FALSE(other.first.images == sub_train.images);
    fs::remove_all(dir);
}

TEST_CASE("raw dump round trip") {
    const fs::path dir = scratch("raw");
    Dataset d;
    d.images = random_tensor(Shape{5, 2, 3, 4}, 1, 0.0, 1.0);
    d.labels = {0, 2, 1, 2, 0};
    d.n_classes = 3;
    write_raw_dump(dir / "d64.bin", d);
    const Dataset back = read_raw_dump(dir / "d64.bin", Split::train);
    CHECK(back.images == d.images);
    CHECK(back.labels == d.labels);
    CHECK(back.n_classes == 3);

    write_raw_dump(dir / "d32.bin", d, true);
    const Dataset b32 = read_raw_dump(dir / "d32.bin", Split::test);
    for (std::size_t i = 0; i < d.images.size(); ++i)
        CHECK(b32.images[i] == static_cast<double>(static_cast<float>(d.images[i])));

    const std::string bytes = read_file(dir / "d64.bin");
    write_bytes(dir / "trunc.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_raw_dump(dir / "trunc.bin", Split::train), FormatError);
    std::string magic = bytes;
    magic[0] = 'X';
    write_bytes(dir / "magic.bin", magic);
    CHECK_THROWS_AS(read_raw_dump(dir / "magic.bin", Split::train), FormatError);

    Dataset unlabeled;
    unlabeled.images = random_tensor(Shape{2, 1, 2, 2}, 2, 0.0, 1.0);
    unlabeled.labels = {0, 0};
    unlabeled.n_classes = 0;
    write_raw_dump(dir / "u.bin", unlabeled);
    const Dataset u = read_raw_dump(dir / "u.bin", Split::train);
    CHECK(u.labels == std::vector<int>{0, 0});
    CHECK(u.n_classes == 1);
    fs::remove_all(dir);
}

TEST_CASE("synthetic dataset is deterministic, balanced and in range") {
    const SyntheticSpec spec{10, 20, 10, 3, 32, 1};
    const auto [train, test] = generate_synthetic(spec);
    CHECK(train.size() == 200);
    CHECK(test.size() == 100);
    CHECK(train.images.shape() == Shape{200, 3, 32, 32});
    for (std::size_t c : train.class_counts()) CHECK(c == 20);
    for (std::size_t c : test.class_counts()) CHECK(c == 10);
    const auto px = train.images.data();
    CHECK(*std::min_element(px.begin(), px.end()) >= 0.0);
    CHECK(*std::max_element(px.begin(), px.end()) <= 1.0);
    CHECK_NOTHROW(train.validate());
    const auto again = generate_synthetic(spec);
    CHECK(again.first.images == train.images);
    CHECK(again.second.labels == test.labels);
    SyntheticSpec other = spec;
    other.seed = 2;
    CHECK_FALSE(generate_synthetic(other).first.images == train.images);
    CHECK_FALSE(test.images.batch_slice(0, 10) == train.images.batch_slice(0, 10));

    // Growing the split keeps the earlier items.
    SyntheticSpec bigger = spec;
    bigger.train_per_class = 30;
    CHECK(generate_synthetic(bigger).first.images.batch_slice(0, 200) == train.images);
}

TEST_CASE("synthetic classes concentrate pixels in their own intensity band") {
    const auto [train, test] = generate_synthetic(SyntheticSpec{10, 30, 1, 3, 32, 7});
    std::vector<std::vector<double>> frac(10, std::vector<double>(10, 0.0));  // [class][band]
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto item = train.images.item(i);
        for (double v : item) {
            const double pos = v * 10.0 - std::floor(v * 10.0);
            if (pos < 0.2 || pos > 0.8 || v >= 1.0) continue;
            frac[static_cast<std::size_t>(train.labels[i])][static_cast<std::size_t>(v * 10.0)] += 1.0 / 30.0;
        }
    }
    for (std::size_t k = 0; k < 10; ++k)
        for (std::size_t j = 0; j < 10; ++j)
            if (j != k) CHECK(frac[k][k] > frac[j][k]);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const fs::path dir = scratch("ckpt");
    NetworkSpec s = toy_spec(Vertex::v8, 3);
    Network net = build_network(s);
    AdamState adam = adam_init(net, AdamConfig{1e-3, 0.9, 0.999, 1e-7});
    Rng rng(3);
    for (ParamTensor* p : net.params())
        for (double& g : p->grad.data()) g = rng.uniform(-1.0, 1.0);
    adam_step(adam, net);
    adam_step(adam, net);
    TrainingLog log{"noise_05_3", {{0, 1.5, 0.1, 0.2, 0}, {1, 0.1234567890123, 1.0 / 3.0, 0.25, 12.5}}};
    const CheckpointMeta meta{17, "fingerprint\nline two\n", TrainingProgress{1, {log}}};
    save_checkpoint(dir / "a.ckpt", net, &adam, meta);

    const Checkpoint c = load_checkpoint(dir / "a.ckpt");
    CHECK(c.network.spec() == net.spec());
    CHECK(same_params(c.network, net));
    REQUIRE(c.adam);
    CHECK(c.adam->t == 2);
    CHECK(c.adam->config.beta2 == 0.999);
    for (const auto& [id, m] : adam.moments) {
        CHECK(c.adam->moments.at(id).m == m.m);
        CHECK(c.adam->moments.at(id).v == m.v);
    }
    CHECK(c.meta.seed == 17);
    CHECK(c.meta.config_text == meta.config_text);
    CHECK(c.meta.progress == meta.progress);

    save_checkpoint(dir / "b.ckpt", c.network, &*c.adam, c.meta);
    CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

    save_checkpoint(dir / "noadam.ckpt", net, nullptr);
    const Checkpoint na = load_checkpoint(dir / "noadam.ckpt");
    CHECK_FALSE(na.adam);
    CHECK_FALSE(na.meta.progress);

    const std::string bytes = read_file(dir / "a.ckpt");
    write_bytes(dir / "trunc.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), FormatError);
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    write_bytes(dir / "flip.ckpt", flipped);
    CHECK_THROWS_AS(load_checkpoint(dir / "flip.ckpt"), FormatError);
    std::string version = bytes;
    version[8] = static_cast<char>(kCheckpointVersion + 1);
    write_bytes(dir / "version.ckpt", version);
    try {
        load_checkpoint(dir / "version.ckpt");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), Error);
    fs::remove_all(dir);
}

TEST_CASE("network spec text round trip") {
    for (Vertex v : {Vertex::v1, Vertex::v5, Vertex::v6, Vertex::v7, Vertex::v8}) {
        NetworkSpec s = toy_spec(v, 4);
        s.membership = SliceMembership::luminance;
        s.fc_layers = 2;
        CHECK(network_spec_from_text(network_spec_to_text(s)) == s);
    }
    CHECK_THROWS_AS(network_spec_from_text("vertex=v9\n"), Error);
}

TEST_CASE("ppm round trip and quantization") {
    const fs::path dir = scratch("ppm");
    CHECK(to_byte(0.0) == 0);
    CHECK(to_byte(1.0) == 255);
    CHECK(to_byte(-0.5) == 0);
    CHECK(to_byte(2.0) == 255);
    CHECK(to_byte(0.5) == 128);

    Tensor img(Shape{2, 3, 5, 4});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 256) / 255.0;
    write_ppm(dir / "x.ppm", img, 1);
    const Tensor back = read_ppm(dir / "x.ppm");
    CHECK(back.shape() == Shape{1, 3, 5, 4});
    CHECK(back == img.batch_slice(1, 1));

    Tensor gray(Shape{1, 1, 2, 2});
    gray[3] = 1.0;
    write_ppm(dir / "g.ppm", gray);
    const Tensor g = read_ppm(dir / "g.ppm");
    CHECK(g.at(0, 0, 1, 1) == 1.0);
    CHECK(g.at(0, 2, 1, 1) == 1.0);
    CHECK(g.at(0, 1, 0, 0) == 0.0);

    write_bytes(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), FormatError);
    CHECK_THROWS_AS(write_ppm(dir / "two.ppm", Tensor(Shape{1, 2, 2, 2})), Error);
    fs::remove_all(dir);
}
