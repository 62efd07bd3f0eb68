#include "cpnmf/graph.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace cpnmf;

namespace {

Graph parse(const std::string& text, Directedness d = Directedness::Undirected) {
    std::istringstream in(text);
    return parse_edge_list(in, d);
}

}  // namespace

TEST_CASE("edge list: path a-b-c") {
    const Graph g = parse("a b\nb c");
    REQUIRE(g.n() == 3);
    CHECK(g.node_ids() == std::vector<std::string>{"a", "b", "c"});
    MatrixXd expected(3, 3);
    expected << 0, 1, 0, 1, 0, 1, 0, 1, 0;
    CHECK(g.adjacency() == expected);
}

TEST_CASE("edge list: duplicate edges collapse to one") {
    const Graph g = parse("a b\na b");
    CHECK(g.n() == 2);
    CHECK(g.adjacency()(0, 1) == 1.0);
    CHECK(g.adjacency()(1, 0) == 1.0);
}

TEST_CASE("edge list: duplicates keep the maximum weight, reversed pairs included") {
    const Graph g = parse("a b 2\nb a 5\na b 3");
    CHECK(g.adjacency()(0, 1) == 5.0);
    CHECK(g.adjacency()(1, 0) == 5.0);
}

TEST_CASE("edge list: self-loop is dropped but the node is kept") {
    const Graph g = parse("a a");
    REQUIRE(g.n() == 1);
    CHECK(g.adjacency()(0, 0) == 0.0);
}

TEST_CASE("edge list: comments and blank lines") {
    const Graph g = parse("# header\n% other comment\n\n  x y 0.5\n");
    CHECK(g.n() == 2);
    CHECK(g.adjacency()(0, 1) == 0.5);
}

TEST_CASE("edge list: directed input keeps orientation") {
    const Graph g = parse("a b", Directedness::Directed);
    CHECK(g.adjacency()(0, 1) == 1.0);
    CHECK(g.adjacency()(1, 0) == 0.0);
}

TEST_CASE("edge list: malformed input reports the line") {
    auto line_of = [](const std::string& text) {
        try {
            parse(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        FAIL("no ParseError");
        return std::size_t{0};
    };
    CHECK(line_of("a b\nc\n") == 2);
    CHECK(line_of("a b\nb c d e") == 2);
    CHECK(line_of("# c\na b x") == 2);
    CHECK(line_of("a b -1") == 1);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("# only comments\n"), ParseError);
}

TEST_CASE("density") {
    CHECK(density(parse("a b\nb c\na c")) == doctest::Approx(1.0));
    CHECK(density(parse("a b\nb c")) == doctest::Approx(4.0 / 6.0));
    const Graph empty({"a", "b", "c"}, MatrixXd::Zero(3, 3));
    CHECK(density(empty) == 0.0);
    CHECK_THROWS_AS(density(parse("a a")), std::invalid_argument);
}

TEST_CASE("graph constructor enforces invariants") {
    MatrixXd diag = MatrixXd::Zero(2, 2);
    diag(0, 0) = 1;
    CHECK_THROWS_AS(Graph({"a", "b"}, diag), std::invalid_argument);
    MatrixXd neg = MatrixXd::Zero(2, 2);
    neg(0, 1) = -1;
    CHECK_THROWS_AS(Graph({"a", "b"}, neg), std::invalid_argument);
    CHECK_THROWS_AS(Graph({"a", "a"}, MatrixXd::Zero(2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(Graph({"a"}, MatrixXd::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("undirected load is symmetric and round-trips through save") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::ostringstream text;
        std::uniform_int_distribution<int> node(0, 14);
        std::uniform_int_distribution<int> weight(1, 3);
        for (int e = 0; e < 30; ++e)
            text << "n" << node(rng) << " n" << node(rng) << ' ' << weight(rng) << '\n';
        const Graph g = parse(text.str());
        CHECK(g.is_symmetric());

        std::ostringstream saved;
        write_edge_list(saved, g);
        const Graph back = parse(saved.str());
        REQUIRE(back.n() == g.n());
        for (Index i = 0; i < g.n(); ++i)
            for (Index j = 0; j < g.n(); ++j)
                CHECK(back.adjacency()(back.index_of(g.node_ids()[i]), back.index_of(g.node_ids()[j])) ==
                      g.adjacency()(i, j));
    }
}

TEST_CASE("isolated nodes survive a save/load cycle") {
    const Graph g({"a", "b", "c"}, MatrixXd::Zero(3, 3));
    std::ostringstream saved;
    write_edge_list(saved, g);
    std::istringstream in(saved.str());
    const Graph back = parse_edge_list(in);
    CHECK(back.node_ids() == g.node_ids());
    CHECK(back.adjacency().isZero(0.0));
}

TEST_CASE("file helpers") {
    const auto path = std::filesystem::temp_directory_path() / "cpnmf_graph_test.txt";
    const Graph g = parse("a b\nb c 2");
    save_edge_list(path, g);
    const Graph back = load_edge_list(path);
    CHECK(back.adjacency() == g.adjacency());
    std::filesystem::remove(path);
    CHECK_THROWS(load_edge_list(path));
}
