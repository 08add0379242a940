// SPDX-License-Identifier: Apache-2.0
#include "bilevel/cli.hpp"

int main(int argc, char** argv) { return bilevel::run_cli(argc, argv); }
