// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "relmusic/cli/app.hpp"

int main(int argc, char** argv) { return relmusic::cli::run(argc, argv, std::cout, std::cerr); }
