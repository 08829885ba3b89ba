#include <ctxsum/cli.hpp>

int main(int argc, char** argv) { return ctxsum::cli::run(argc, argv); }
