#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gcal/gcle.hpp"
#include "gcal/rng.hpp"

using namespace gcal;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("gcal_test_" + name); }

std::vector<RowMeta> meta_rows(std::size_t n) {
    std::vector<RowMeta> m;
    for (std::size_t i = 0; i < n; ++i)
        m.push_back({static_cast<std::int64_t>(100 + i), static_cast<int>(i / 2), static_cast<int>(i), 0});
    return m;
}

Matrix float_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = static_cast<float>(rng.normal());
    return m;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

GcleErrorKind kind_of(const fs::path& p) {
    try {
        read_gcle(p);
    } catch (const GcleError& e) {
        return e.kind();
    }
    FAIL("expected a GcleError");
    return GcleErrorKind::io;
}

}  // namespace

TEST_SUITE("gcle") {

TEST_CASE("round trip is bit exact") {
    const auto p = tmp("rt.gcle");
    const Matrix m = float_matrix(3, 4, 1);
    write_gcle(p, m, meta_rows(3));
    const auto back = read_gcle(p);
    CHECK(back.matrix == m);
    CHECK(back.meta == meta_rows(3));
    CHECK(read_bytes(p).substr(0, 4) == "GCLE");
    CHECK(read_bytes(p).size() == 16 + 3 * 4 * 4);
    fs::remove(p);
    fs::remove(gcle_meta_path(p));
}

TEST_CASE("empty matrix") {
    const auto p = tmp("empty.gcle");
    write_gcle(p, Matrix(0, 5), {});
    const auto back = read_gcle(p);
    CHECK(back.matrix.rows() == 0);
    CHECK(back.matrix.cols() == 5);
    fs::remove(p);
    fs::remove(gcle_meta_path(p));
}

TEST_CASE("typed errors") {
    const auto p = tmp("bad.gcle");
    write_gcle(p, float_matrix(3, 4, 2), meta_rows(3));
    const std::string good = read_bytes(p);

    std::string bad = good;
    bad[0] = 'X';
    write_bytes(p, bad);
    CHECK(kind_of(p) == GcleErrorKind::bad_magic);

    bad = good;
    bad[4] = 2;
    write_bytes(p, bad);
    CHECK(kind_of(p) == GcleErrorKind::bad_version);

    write_bytes(p, good.substr(0, good.size() - 3));
    CHECK(kind_of(p) == GcleErrorKind::truncated);

    write_bytes(p, good);
    write_gcle(tmp("two.gcle"), float_matrix(2, 4, 3), meta_rows(2));
    fs::copy_file(gcle_meta_path(tmp("two.gcle")), gcle_meta_path(p), fs::copy_options::overwrite_existing);
    CHECK(kind_of(p) == GcleErrorKind::count_mismatch);

    Matrix nan = float_matrix(3, 4, 4);
    nan(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_gcle(p, nan, meta_rows(3)), GcleError);
    bad = good;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 16 + 4 * 5, &q, 4);
    write_bytes(p, bad);
    write_gcle(tmp("meta.gcle"), float_matrix(3, 4, 5), meta_rows(3));
    fs::copy_file(gcle_meta_path(tmp("meta.gcle")), gcle_meta_path(p), fs::copy_options::overwrite_existing);
    CHECK(kind_of(p) == GcleErrorKind::non_finite);

    CHECK(kind_of(tmp("missing.gcle")) == GcleErrorKind::io);
    for (const char* f : {"bad.gcle", "two.gcle", "meta.gcle"}) {
        fs::remove(tmp(f));
        fs::remove(gcle_meta_path(tmp(f)));
    }
}

TEST_CASE("meta/row mismatch on write") {
    CHECK_THROWS_AS(write_gcle(tmp("w.gcle"), float_matrix(3, 4, 6), meta_rows(2)), GcleError);
}

TEST_CASE("import builds an index aligned with the rows") {
    const auto p = tmp("import.gcle");
    const Matrix m = float_matrix(4, 3, 7);
    write_gcle(p, m, meta_rows(4));
    const auto imp = import_embeddings(p);
    CHECK(imp.matrix == m);
    REQUIRE(imp.index.size() == 4);
    CHECK(imp.index.dim() == 3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(imp.index.slice(i).slice_id == static_cast<std::int64_t>(100 + i));
    fs::remove(p);
    fs::remove(gcle_meta_path(p));
}

}
