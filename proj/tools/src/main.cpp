// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "falqon_cli/commands.hpp"

int main(int argc, char** argv) { return falqon::cli::run_cli(argc, argv, std::cout, std::cerr); }
