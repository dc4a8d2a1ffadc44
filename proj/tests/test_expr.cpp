#include <doctest.h>

#include "riskmc/mdp.hpp"
#include "riskmc/parser.hpp"

using namespace riskmc;

namespace {

Value eval_on(const std::string& expr, const std::vector<std::string>& names,
              const std::vector<Value>& vals) {
    return eval_expr(names, vals, *parse_expr_text(expr));
}

} // namespace

TEST_CASE("expression evaluation on valuations") {
    CHECK(eval_on("x <= 3", {"x"}, {3}) == 1);
    CHECK(eval_on("a & !b", {"a", "b"}, {1, 0}) == 1);
    CHECK(eval_on("m = 1 | m = 2", {"m"}, {2}) == 1);
    CHECK(eval_on("m = 1 | m = 2", {"m"}, {3}) == 0);
    CHECK(eval_on("x + 1", {"x"}, {4}) == 5);
    CHECK(eval_on("x - 2 >= y", {"x", "y"}, {5, 3}) == 1);
    CHECK(eval_on("-x", {"x"}, {7}) == -7);
}

TEST_CASE("unbound variables are rejected") {
    CHECK_THROWS_AS(eval_on("q", {"x"}, {0}), EvalError);
}

TEST_CASE("printing round-trips through the parser") {
    const char* exprs[] = {
        "x <= 3", "a & !b | c", "m = 1 | m = 2", "x + 1 - 2 < y",
        "!(a | b) & c", "true", "false", "-x + 3 >= 0",
    };
    for (auto* e : exprs) {
        ExprPtr p1 = parse_expr_text(e);
        ExprPtr p2 = parse_expr_text(to_string(*p1));
        CHECK(expr_equal(p1, p2));
    }
}

TEST_CASE("operator precedence: | binds weaker than &") {
    // a | b & c parses as a | (b & c)
    CHECK(eval_on("a | b & c", {"a", "b", "c"}, {1, 0, 0}) == 1);
    CHECK(eval_on("a | b & c", {"a", "b", "c"}, {0, 1, 0}) == 0);
}
