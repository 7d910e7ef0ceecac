// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/cli.hpp"

int main(int argc, char** argv) { return semsplat::run_cli(argc, argv); }
