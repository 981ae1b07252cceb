#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "osd/checkpoint.hpp"
#include "osd/rng.hpp"

using namespace osd;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "osd_ckpt_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Archive sample_archive() {
    Rng rng(121);
    Archive a;
    a.meta["note"] = "test";
    a.meta["step"] = 42;
    a.tensors["w1"] = rng.normal_tensor({3, 4});
    a.tensors["w2"] = rng.normal_tensor({2, 2, 2});
    a.tensors["b"] = rng.normal_tensor({5});
    return a;
}

}  // namespace

TEST_CASE("archive save and load round trip preserves tensors and metadata") {
    Archive a = sample_archive();
    std::string path = tmp_path("roundtrip.ckpt");
    save_archive(path, a);
    Archive b = load_archive(path);

    CHECK(b.meta["note"] == "test");
    CHECK(b.meta["step"] == 42);
    REQUIRE(b.tensors.size() == a.tensors.size());
    for (const auto& [name, t] : a.tensors) {
        REQUIRE(b.tensors.count(name) == 1);
        const Tensor& u = b.tensors.at(name);
        CHECK(u.shape == t.shape);
        for (int i = 0; i < t.size(); ++i)
            CHECK(u.at(static_cast<int>(i)) == t.at(static_cast<int>(i)));
    }
}

TEST_CASE("save load save produces byte-identical files") {
    Archive a = sample_archive();
    std::string p1 = tmp_path("first.ckpt");
    std::string p2 = tmp_path("second.ckpt");
    save_archive(p1, a);
    Archive b = load_archive(p1);
    save_archive(p2, b);
    CHECK(read_bytes(p1) == read_bytes(p2));
}

TEST_CASE("store round trip keeps values and trainability") {
    ParamStore ps;
    Rng rng(122);
    ps.create("enc.w", rng.normal_tensor({4, 4}));
    ps.create("frozen.w", rng.normal_tensor({3}), false);

    Archive a = archive_from_store(ps);
    std::string path = tmp_path("store.ckpt");
    save_archive(path, a);
    Archive b = load_archive(path);

    ParamStore ps2;
    ps2.create("enc.w", Tensor({4, 4}, 0.0));
    ps2.create("frozen.w", Tensor({3}, 0.0), false);
    archive_into_store(b, ps2);
    for (int i = 0; i < 16; ++i)
        CHECK(ps2.value("enc.w").at(i) == ps.value("enc.w").at(i));
    CHECK(ps2.value("frozen.w").at(0) == ps.value("frozen.w").at(0));
}

TEST_CASE("loading rejects unknown tensors and names the offender") {
    Archive a;
    a.tensors["mystery.w"] = Tensor({2}, {1.0, 2.0});
    ParamStore ps;
    ps.create("known.w", Tensor({2}, 0.0));
    try {
        archive_into_store(a, ps);
        FAIL("expected a rejection");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("mystery.w") != std::string::npos);
    }
}

TEST_CASE("loading rejects shape mismatches and names the offender") {
    Archive a;
    a.tensors["known.w"] = Tensor({3}, {1.0, 2.0, 3.0});
    ParamStore ps;
    ps.create("known.w", Tensor({2}, 0.0));
    try {
        archive_into_store(a, ps);
        FAIL("expected a rejection");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("known.w") != std::string::npos);
    }
}

TEST_CASE("loading a truncated file fails cleanly") {
    Archive a = sample_archive();
    std::string path = tmp_path("full.ckpt");
    save_archive(path, a);
    std::string bytes = read_bytes(path);
    std::string cut = tmp_path("cut.ckpt");
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS(load_archive(cut));
}

TEST_CASE("loading a file with the wrong magic fails cleanly") {
    std::string path = tmp_path("bogus.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTACKPT garbage bytes here";
    }
    CHECK_THROWS(load_archive(path));
}

TEST_CASE("loading a missing file fails cleanly") {
    CHECK_THROWS(load_archive(tmp_path("does_not_exist.ckpt")));
}
