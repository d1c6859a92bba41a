#include <doctest.h>

#include "calibkit/csv.hpp"
#include "calibkit/errors.hpp"
#include "test_support.hpp"

using namespace calibkit;

TEST_CASE("parse a numeric table") {
    const csv::Table t = csv::parse("a,b\n1,2.5\n-3e-2,\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.values(1, 0) == -0.03);
    CHECK(std::isnan(t.values(1, 1)));
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), ParseError);
}

TEST_CASE("parse errors name the line") {
    try {
        csv::parse("a,b\n1,2\n3,x\n", "f.csv");
        FAIL("no exception");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("f.csv: line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(csv::parse("a,b\n1,2,3\n"), ParseError);
    CHECK_THROWS_AS(csv::parse(""), ParseError);
}

TEST_CASE("write/read round trips are exact") {
    const auto dir = test_support::scratch_dir("csv");
    const Eigen::MatrixXd d = test_support::random_matrix(7, 4, 2);
    csv::write_design(dir / "d.csv", d);
    CHECK(csv::read_design(dir / "d.csv") == d);

    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.1, 2.0);
    const Eigen::MatrixXd b = test_support::random_matrix(3, 5, 3) / 3.0;
    csv::write_bundle(dir / "b.csv", t, b);
    Eigen::VectorXd t2;
    CHECK(csv::read_bundle(dir / "b.csv", t2) == b);
    CHECK(t2 == t);
    CHECK(csv::format_double(0.1) == "0.10000000000000001");

    CHECK_THROWS_AS(csv::write_bundle(dir / "x.csv", t, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
    csv::write(dir / "three.csv", {"a", "b", "c"}, Eigen::MatrixXd::Zero(2, 3));
    CHECK_THROWS_AS(csv::read_design(dir / "three.csv"), ParseError);
}
