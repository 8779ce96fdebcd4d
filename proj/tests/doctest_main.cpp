#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "handmesh/tensor.hpp"

int main(int argc, char** argv) {
    handmesh::checked_mode() = true; // NaN/Inf detection on for every test run
    doctest::Context context;
    context.applyCommandLine(argc, argv);
    return context.run();
}
