#include <doctest.h>
#include "mrfno/grid.hpp"
using namespace mrfno;
TEST_CASE("one_hot basics") {
    CHECK(one_hot_embedding(1, 2)(0) == 1.0);
}
