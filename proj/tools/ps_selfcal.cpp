// SPDX-License-Identifier: Apache-2.0
#include "pscal/cli.hpp"

int main(int argc, char** argv) { return pscal::cli::run(argc, argv); }
