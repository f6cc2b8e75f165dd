// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include <iostream>

#include "etpp/cli.hpp"

int main(int argc, char** argv) { return etpp::cli::run(argc, argv, std::cout, std::cerr); }
