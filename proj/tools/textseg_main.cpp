#include "textseg/cli.hpp"

int main(int argc, char** argv) { return textseg::run_cli(argc, argv); }
