#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "rsrae/alloc.hpp"

int main(int argc, char** argv) {
    rsrae::tune_allocator();
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
