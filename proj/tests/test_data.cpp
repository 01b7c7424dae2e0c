#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "sparse_infer/dataset.hpp"
#include "sparse_infer/errors.hpp"
#include "sparse_infer/rng.hpp"
#include "sparse_infer/types.hpp"

using namespace sparse_infer;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_CASE("normalize: constant and two-point columns") {
    Matrix x(4, 2);
    x << 1, 2, 1, 2, 1, 2, 1, 2;
    const auto d = normalize(make_dataset(Vector::Ones(4), x));
    CHECK(d.normalized);
    CHECK(d.col_scales[0] == doctest::Approx(1.0));
    CHECK(d.col_scales[1] == doctest::Approx(2.0));
    CHECK(d.x.col(1).isApprox(Vector::Ones(4)));

    Matrix z(2, 1);
    z << 0, 2;
    const auto e = normalize(make_dataset(Vector::Ones(2), z));
    CHECK(e.col_scales[0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(e.x(0, 0) == 0.0);
    CHECK(e.x(1, 0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("normalize is idempotent and unit second moment") {
    Rng rng(SeedSpec{7, 1});
    const Matrix x = test_support::gaussian_matrix(rng, 30, 6) * 3.0;
    const auto once = normalize(make_dataset(rng.normal_vector(30), x));
    const auto twice = normalize(once);
    CHECK(once.x == twice.x);
    CHECK(once.col_scales == twice.col_scales);
    for (Index j = 0; j < once.p(); ++j) CHECK(mean_square(once.x.col(j)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize rejects all-zero column") {
    Matrix x = Matrix::Zero(5, 2);
    x.col(0).setOnes();
    CHECK_THROWS_AS(normalize(make_dataset(Vector::Ones(5), x)), InputError);
}

TEST_CASE("denormalized coefficients reproduce fitted values") {
    Rng rng(SeedSpec{7, 2});
    const Matrix x = test_support::gaussian_matrix(rng, 20, 3) * 5.0;
    const auto raw = make_dataset(rng.normal_vector(20), x);
    const auto d = normalize(raw);
    const Vector b = rng.normal_vector(3);
    CHECK((raw.x * denormalize_coefficients(d, b)).isApprox(d.x * b, 1e-12));
}

TEST_CASE("with_intercept prepends ones") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    const auto d = with_intercept(make_dataset(Vector::Zero(3), x, {"a"}));
    REQUIRE(d.p() == 2);
    CHECK(d.intercept == Index{0});
    CHECK(d.x.col(0) == Vector::Ones(3));
    CHECK(d.name(0) == "(Intercept)");
    CHECK(d.name(1) == "a");
}

TEST_CASE("validate rejects bad shapes") {
    CHECK_THROWS_AS(make_dataset(Vector::Zero(3), Matrix::Zero(4, 1)), InputError);
    CHECK_THROWS_AS(make_dataset(Vector::Zero(1), Matrix::Ones(1, 1)), InputError);
    Matrix bad = Matrix::Ones(3, 1);
    bad(1, 0) = std::nan("");
    CHECK_THROWS_AS(make_dataset(Vector::Zero(3), bad), InputError);
}

TEST_CASE("load_csv parses quoted headers and values") {
    const auto path = write_temp("si_ok.csv", "\xEF\xBB\xBF\"x,1\",y,z\n1,2,3\n2,\"4\",5.5\n3,1,-1e-1\n");
    const auto d = load_csv(path, "y");
    CHECK(d.n() == 3);
    CHECK(d.p() == 2);
    CHECK(d.name(0) == "x,1");
    CHECK(d.name(1) == "z");
    CHECK(d.y[1] == 4.0);
    CHECK(d.x(2, 1) == doctest::Approx(-0.1));
}

TEST_CASE("load_csv errors") {
    CHECK_THROWS_WITH_AS(load_csv("/nonexistent/file.csv", "y"), doctest::Contains("cannot open file"), InputError);
    const auto miss = write_temp("si_miss.csv", "a,b\n1,2\n3,4\n");
    CHECK_THROWS_WITH_AS(load_csv(miss, "y"), doctest::Contains("response column 'y' not found"), InputError);
    const auto text = write_temp("si_text.csv", "a,y\n1,2\nfoo,4\n");
    CHECK_THROWS_WITH_AS(load_csv(text, "y"), doctest::Contains("non-numeric cell"), InputError);
    const auto flat = write_temp("si_flat.csv", "a,y\n1,2\n1,4\n1,5\n");
    CHECK_THROWS_WITH_AS(load_csv(flat, "y"), doctest::Contains("zero-variance column 'a'"), InputError);
    const auto ragged = write_temp("si_ragged.csv", "a,y\n1,2\n1\n");
    CHECK_THROWS_AS(load_csv(ragged, "y"), InputError);
}

TEST_CASE("index set helpers") {
    IndexSet s{5, 1, 3, 1};
    canonicalize(s);
    CHECK(s == IndexSet{1, 3, 5});
    CHECK(set_union({1, 4}, {0, 4}) == IndexSet{0, 1, 4});
    CHECK(complement({0, 2}, 4) == IndexSet{1, 3});
    CHECK(contains(s, 3));
    CHECK_FALSE(contains(s, 2));
}

TEST_CASE("rng streams are keyed, not sequential") {
    const SeedSpec a{11, 3};
    CHECK(gaussian_stream(a, 5) == gaussian_stream(a, 5));
    CHECK(gaussian_stream(a, 5) != gaussian_stream(SeedSpec{11, 4}, 5));
    CHECK(gaussian_stream(a.child(0), 5) != gaussian_stream(a.child(1), 5));
    CHECK(a.child(2) == a.child(2));
    auto perm = random_permutation(a, 50);
    std::sort(perm.begin(), perm.end());
    for (Index i = 0; i < 50; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);
}
