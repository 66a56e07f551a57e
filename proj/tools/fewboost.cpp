#include "fewboost/cli.hpp"

int main(int argc, char** argv) { return fewboost::cli::run(argc, argv); }
