#include "mopred/cli.hpp"

int main(int argc, char** argv) { return mopred::cli_dispatch(argc, argv); }
