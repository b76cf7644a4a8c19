#include "provdet/cli.hpp"

int main(int argc, char** argv) { return provdet::cli::dispatch(argc, argv); }
