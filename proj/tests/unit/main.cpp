#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
    // Tests that inspect log output install their own logger.
    spdlog::set_level(spdlog::level::off);
    return doctest::Context(argc, argv).run();
}
